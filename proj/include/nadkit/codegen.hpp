// Copyright 2026 The nadkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Macro skeleton assembly (stem, stacks of cells joined by downsample blocks,
// pooled linear head), parameter/MAC counting, budgeted width search and the
// emit backends. Shapes and counts are per sample (batch 1).

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "nadkit/archdsl.hpp"
#include "nadkit/validator.hpp"

namespace nadkit::codegen {

std::vector<int> default_width_grid();  // 8, 16, ..., 128

struct MacroConfig {
  int stacks = 3;
  int cells_per_stack = 5;
  int height = 32;
  int width = 32;
  int in_channels = 3;
  int num_classes = 10;
  std::int64_t max_params = 1'500'000;
  std::int64_t max_flops = 200'000'000;
  double flops_per_mac = 1.0;
  std::vector<int> width_grid = default_width_grid();

  /// Throws ConfigError.
  void check() const;
  std::string to_json() const;
  static MacroConfig from_json(std::string_view text);
  friend bool operator==(const MacroConfig&, const MacroConfig&) = default;
};

/// An integer, or an expression string in the batch size B.
using Scalar = std::variant<std::int64_t, std::string>;

struct NetArg {
  std::string name;
  std::vector<Scalar> values;
  bool list = false;  // variadic argument list
  friend bool operator==(const NetArg&, const NetArg&) = default;
};

struct NetNode {
  int id = 0;
  std::string op;
  std::vector<NetArg> args;
  std::string section;   // input | stem | stack-i-cell-j | downsample-i | head | output
  std::vector<int> inputs;  // ordered
  check::Shape shape;       // at batch 1
  friend bool operator==(const NetNode&, const NetNode&) = default;
};

struct NetworkGraph {
  MacroConfig macro;
  int width = 0;
  std::vector<NetNode> nodes;  // ids are 0..n-1 in topological order
  std::vector<std::pair<int, int>> edges;

  const NetNode& node(int id) const { return nodes.at(static_cast<std::size_t>(id)); }
  friend bool operator==(const NetworkGraph&, const NetworkGraph&) = default;
};

struct ResourceCount {
  std::int64_t params = 0;
  std::int64_t macs = 0;
  friend bool operator==(const ResourceCount&, const ResourceCount&) = default;
};

/// Throws BindingError when a block does not validate under its assembly
/// binding or a non-list parameter depends on B.
NetworkGraph assemble(const dsl::Block& cell, const dsl::Block& stem, const dsl::Block& downsample,
                      const MacroConfig& macro, int width);

ResourceCount count_resources(const NetworkGraph& net);

/// Counts one block under a binding (use B=1 for per-sample MACs). Throws
/// BindingError when the block does not pass infer_shapes.
ResourceCount count_block(const dsl::Block& block, const dsl::VarBinding& binding);

bool within_budget(const ResourceCount& r, const MacroConfig& macro) noexcept;

/// Largest feasible grid width, then bisection between it and the next
/// infeasible width. The result w satisfies: w feasible, w+1 infeasible.
/// Unassemblable widths count as infeasible. Throws Infeasible.
int search_width(const dsl::Block& cell, const dsl::Block& stem, const dsl::Block& downsample,
                 const MacroConfig& macro);

std::string to_network_json(const NetworkGraph& net);
NetworkGraph from_network_json(std::string_view text);

/// Registered backend ids ("json", "pytorch").
std::vector<std::string> backends();

/// (relative path, file contents). Throws UnknownBackend.
std::vector<std::pair<std::string, std::string>> emit(const NetworkGraph& net, std::string_view backend);

}  // namespace nadkit::codegen
