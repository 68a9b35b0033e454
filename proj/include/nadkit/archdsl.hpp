// Copyright 2026 The nadkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// The block-definition language: a block is a named DAG whose nodes are
// catalog operations with integer parameter expressions over the variables
// B, C, dim, H and W.
//
//   ##resnet_basic##
//   0:input
//   1:Conv2d(out_channels=C,kernel_size=3)
//   ...
//   0->1

#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nadkit/error.hpp"

namespace nadkit::dsl {

enum class Var { kB, kC, kDim, kH, kW };

std::string_view var_name(Var v) noexcept;
std::optional<Var> var_from_name(std::string_view name) noexcept;

/// Immutable expression tree. Copies share structure.
class ParamExpr {
 public:
  enum class Kind { kLiteral, kVariable, kNegate, kBinary };
  enum class BinOp { kAdd, kSub, kMul, kDiv };

  ParamExpr();  // literal 0

  static ParamExpr literal(std::int64_t value);
  static ParamExpr variable(Var v);
  static ParamExpr negate(ParamExpr operand);
  static ParamExpr binary(BinOp op, ParamExpr lhs, ParamExpr rhs);

  Kind kind() const noexcept;
  std::int64_t value() const;  // kLiteral
  Var var() const;             // kVariable
  BinOp op() const;            // kBinary
  const ParamExpr& lhs() const;
  const ParamExpr& rhs() const;
  const ParamExpr& operand() const;  // kNegate

  bool is_literal(std::int64_t v) const noexcept {
    return kind() == Kind::kLiteral && value() == v;
  }
  bool depends_on(Var v) const noexcept;
  bool is_constant() const noexcept;

  /// Minimal-parenthesis rendering; parse_expr(to_string()) is structurally
  /// equal to *this.
  std::string to_string() const;

  friend bool operator==(const ParamExpr& a, const ParamExpr& b) noexcept;

 private:
  struct Node;
  explicit ParamExpr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

/// Parses a standalone expression. Errors are reported on line 1.
ParamExpr parse_expr(std::string_view text);

struct VarBinding {
  std::int64_t B = 1;
  std::int64_t C = 1;
  std::int64_t dim = 1;
  std::int64_t H = 1;
  std::int64_t W = 1;

  std::int64_t get(Var v) const noexcept;
  std::string to_string() const;  // "B=2,C=16,H=32,W=32,dim=16"
  friend bool operator==(const VarBinding&, const VarBinding&) = default;
};

/// Exact integer evaluation. Throws EvalError on inexact division, division
/// by zero or int64 overflow.
std::int64_t eval_expr(const ParamExpr& expr, const VarBinding& binding);

/// Values for a subset of the variables.
using PartialBinding = std::map<Var, std::int64_t>;

/// Symbolic normal form: substitutes `bound`, folds constants (exact
/// divisions only), flattens +/- and * chains and orders commutative operands
/// canonically. Equal normal forms imply equal values under every binding.
ParamExpr normalize(const ParamExpr& expr, const PartialBinding& bound = {});

// ---------------------------------------------------------------------------
// Operation catalog

enum class Arity {
  kSource,  // input: no incoming edges
  kSink,    // output: exactly one incoming edge
  kUnary,   // exactly one incoming edge
  kMulti,   // two or more incoming edges
};

struct ParamSpec {
  std::string_view name;
  std::optional<std::int64_t> default_value;
  /// When set, the default is the value of the named earlier parameter
  /// (pooling stride defaults to kernel_size).
  std::string_view default_from;

  bool required() const noexcept { return !default_value && default_from.empty(); }
};

struct OpSpec {
  std::string_view name;
  Arity arity;
  std::vector<ParamSpec> params;
  /// Variadic ops (permute, repeat, reshape) take a positional list instead.
  bool variadic = false;
};

std::span<const OpSpec> catalog() noexcept;
const OpSpec* find_op(std::string_view name) noexcept;

// ---------------------------------------------------------------------------
// Blocks

struct Arg {
  std::optional<std::string> name;
  ParamExpr value;

  friend bool operator==(const Arg&, const Arg&) = default;
};

/// Catalog-resolved arguments: every fixed parameter in catalog order with
/// defaults filled in, or the positional list of a variadic op.
struct ResolvedArgs {
  std::vector<std::pair<std::string, ParamExpr>> named;
  std::vector<ParamExpr> list;

  const ParamExpr& at(std::string_view name) const;
  friend bool operator==(const ResolvedArgs&, const ResolvedArgs&) = default;
};

struct OpInstance {
  std::string op;
  std::vector<Arg> args;

  const OpSpec* spec() const noexcept { return find_op(op); }

  /// Resolves args against the catalog. Returns nullopt and sets `error`
  /// when the op is unknown or the arguments do not fit its signature.
  std::optional<ResolvedArgs> resolve(std::string* error = nullptr) const;

  /// Canonical rendering: explicit names, defaults omitted.
  std::string to_string() const;

  /// Semantic equality: positional and named spellings of the same call
  /// compare equal.
  friend bool operator==(const OpInstance& a, const OpInstance& b);
};

struct Edge {
  int src = 0;
  int dst = 0;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

class Block {
 public:
  Block() = default;
  /// Validates the structural invariants (unique input/output, edges refer to
  /// existing nodes, no duplicate edges). Throws Error on violation.
  Block(std::string name, std::map<int, OpInstance> nodes, std::vector<Edge> edges);

  const std::string& name() const noexcept { return name_; }
  const std::map<int, OpInstance>& nodes() const noexcept { return nodes_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  int input_index() const;
  int output_index() const;
  const OpInstance& node(int index) const;
  bool has_node(int index) const noexcept { return nodes_.contains(index); }

  /// Sources of edges into `index`, ascending.
  std::vector<int> predecessors(int index) const;
  std::vector<int> successors(int index) const;

  Block renamed(std::string name) const;

  friend bool operator==(const Block& a, const Block& b);

 private:
  std::string name_;
  std::map<int, OpInstance> nodes_;
  std::vector<Edge> edges_;
};

/// Parses one block. Blank lines and comment lines (`#...` that is not a
/// header, `//...`) are ignored; trailing `//` comments are stripped.
Block parse_block(std::string_view text);

/// Canonical text: header, nodes by index, edges sorted by (src, dst).
std::string print_block(const Block& block);

}  // namespace nadkit::dsl
