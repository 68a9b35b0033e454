// Copyright 2026 The nadkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Structural checks and concrete shape inference for blocks. Findings are
// data: nothing here throws on an invalid block.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nadkit/archdsl.hpp"

namespace nadkit::check {

using Shape = std::vector<std::int64_t>;

/// "(2,16,32,32)"
std::string format_shape(const Shape& shape);

enum class FindingKind {
  kUndefinedOp,
  kBadArgument,
  kCycle,
  kDeadNode,
  kInputEdges,
  kOutputArity,
  kOpArity,
  kEvalError,
  kBadValue,
  kRankMismatch,
  kBroadcastMismatch,
  kMatmulMismatch,
  kGroupsDivisibility,
  kConcatMismatch,
  kReshapeCount,
  kPermuteRank,
  kBadDim,
  kSpatialUnderflow,
  kStemFactor,
  kDownsampleFactor,
  kCellChannels,
  kOutputContract,
};

std::string_view finding_kind_name(FindingKind kind) noexcept;
std::optional<FindingKind> finding_kind_from_name(std::string_view name) noexcept;

struct Finding {
  int node = 0;
  FindingKind kind = FindingKind::kUndefinedOp;
  std::string message;  // "node <i> error: <reason>"
};

struct ValidationReport {
  std::vector<Finding> findings;
  std::map<int, Shape> inferred;

  bool ok() const noexcept { return findings.empty(); }
  /// Finding messages joined with "; ".
  std::string context() const;
  /// {"status":"success"} or {"status":"error","context":"..."}.
  std::string feedback_json() const;
};

enum class Role { kCell, kStem, kDownsample };

std::string_view role_name(Role role) noexcept;
std::optional<Role> role_from_name(std::string_view name) noexcept;

/// Unknown ops and argument errors, cycles, dead nodes, output fan-in and
/// per-op input arity. Reports every finding.
ValidationReport check_structure(const dsl::Block& block);

/// Propagates concrete shapes from input=(B,C,H,W). Runs check_structure
/// first and stops at the first failing node.
ValidationReport infer_shapes(const dsl::Block& block, const dsl::VarBinding& binding);

/// check_structure, then infer_shapes plus the role's output contract under
/// every binding. Stops at the first failing binding.
ValidationReport validate(const dsl::Block& block, Role role, std::span<const dsl::VarBinding> bindings);

/// Two bindings per role with distinct C and H. Cell: dim=C. Stem: C=3 and
/// dim is the stem width. Downsample: dim=2C.
std::vector<dsl::VarBinding> default_bindings(Role role);

/// validate() with default_bindings(role).
ValidationReport validate(const dsl::Block& block, Role role);

}  // namespace nadkit::check
