// Copyright 2026 The nadkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "nadkit/validator.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <queue>
#include <set>

#include <json.hpp>

namespace nadkit::check {

using dsl::Arity;
using dsl::Block;
using dsl::OpInstance;
using dsl::ParamExpr;
using dsl::VarBinding;

std::string format_shape(const Shape& shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(shape[i]);
  }
  return out + ")";
}

namespace {

constexpr std::pair<FindingKind, std::string_view> kKindNames[] = {
    {FindingKind::kUndefinedOp, "undefined-op"},
    {FindingKind::kBadArgument, "bad-argument"},
    {FindingKind::kCycle, "cycle"},
    {FindingKind::kDeadNode, "dead-node"},
    {FindingKind::kInputEdges, "input-edges"},
    {FindingKind::kOutputArity, "output-arity"},
    {FindingKind::kOpArity, "op-arity"},
    {FindingKind::kEvalError, "eval-error"},
    {FindingKind::kBadValue, "bad-value"},
    {FindingKind::kRankMismatch, "rank-mismatch"},
    {FindingKind::kBroadcastMismatch, "broadcast-mismatch"},
    {FindingKind::kMatmulMismatch, "matmul-mismatch"},
    {FindingKind::kGroupsDivisibility, "groups-divisibility"},
    {FindingKind::kConcatMismatch, "concat-mismatch"},
    {FindingKind::kReshapeCount, "reshape-count"},
    {FindingKind::kPermuteRank, "permute-rank"},
    {FindingKind::kBadDim, "bad-dim"},
    {FindingKind::kSpatialUnderflow, "spatial-underflow"},
    {FindingKind::kStemFactor, "stem-factor"},
    {FindingKind::kDownsampleFactor, "downsample-factor"},
    {FindingKind::kCellChannels, "cell-channels"},
    {FindingKind::kOutputContract, "output-contract"},
};

}  // namespace

std::string_view finding_kind_name(FindingKind kind) noexcept {
  for (const auto& [k, n] : kKindNames) {
    if (k == kind) return n;
  }
  return "unknown";
}

std::optional<FindingKind> finding_kind_from_name(std::string_view name) noexcept {
  for (const auto& [k, n] : kKindNames) {
    if (n == name) return k;
  }
  return std::nullopt;
}

std::string ValidationReport::context() const {
  std::string out;
  for (std::size_t i = 0; i < findings.size(); ++i) {
    if (i) out += "; ";
    out += findings[i].message;
  }
  return out;
}

std::string ValidationReport::feedback_json() const {
  nlohmann::ordered_json j;
  if (ok()) {
    j["status"] = "success";
  } else {
    j["status"] = "error";
    j["context"] = context();
  }
  return j.dump();
}

std::string_view role_name(Role role) noexcept {
  switch (role) {
    case Role::kCell: return "cell";
    case Role::kStem: return "stem";
    case Role::kDownsample: return "downsample";
  }
  return "cell";
}

std::optional<Role> role_from_name(std::string_view name) noexcept {
  if (name == "cell") return Role::kCell;
  if (name == "stem") return Role::kStem;
  if (name == "downsample") return Role::kDownsample;
  return std::nullopt;
}

namespace {

void add(ValidationReport& r, int node, FindingKind kind, const std::string& reason) {
  r.findings.push_back({node, kind, "node " + std::to_string(node) + " error: " + reason});
}

std::string join_path(const std::vector<int>& path) {
  std::string out;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (i) out += "->";
    out += std::to_string(path[i]);
  }
  return out;
}

// Adjacency over node indices.
struct Graph {
  std::map<int, std::vector<int>> out;
  std::map<int, std::vector<int>> in;

  explicit Graph(const Block& b) {
    for (const auto& [idx, inst] : b.nodes()) {
      out[idx];
      in[idx];
    }
    for (const auto& e : b.edges()) {
      out[e.src].push_back(e.dst);
      in[e.dst].push_back(e.src);
    }
  }
};

// Tarjan's SCC; returns components with a cycle (size > 1 or a self-loop),
// each sorted ascending, ordered by smallest member.
std::vector<std::vector<int>> cyclic_components(const Graph& g) {
  std::map<int, int> index;
  std::map<int, int> low;
  std::set<int> on_stack;
  std::vector<int> stack;
  std::vector<std::vector<int>> comps;
  int counter = 0;

  std::function<void(int)> strong = [&](int v) {
    index[v] = low[v] = counter++;
    stack.push_back(v);
    on_stack.insert(v);
    for (int w : g.out.at(v)) {
      if (!index.contains(w)) {
        strong(w);
        low[v] = std::min(low[v], low[w]);
      } else if (on_stack.contains(w)) {
        low[v] = std::min(low[v], index[w]);
      }
    }
    if (low[v] == index[v]) {
      std::vector<int> comp;
      int w = 0;
      do {
        w = stack.back();
        stack.pop_back();
        on_stack.erase(w);
        comp.push_back(w);
      } while (w != v);
      const auto& succ = g.out.at(v);
      bool self_loop = std::find(succ.begin(), succ.end(), v) != succ.end();
      if (comp.size() > 1 || self_loop) {
        std::sort(comp.begin(), comp.end());
        comps.push_back(std::move(comp));
      }
    }
  };
  for (const auto& [v, succ] : g.out) {
    if (!index.contains(v)) strong(v);
  }
  std::sort(comps.begin(), comps.end());
  return comps;
}

// A concrete cycle inside `comp` starting and ending at its smallest member.
std::vector<int> cycle_path(const Graph& g, const std::vector<int>& comp) {
  std::set<int> members(comp.begin(), comp.end());
  int start = comp.front();
  std::map<int, int> parent;
  std::queue<int> q;
  q.push(start);
  parent[start] = start;
  while (!q.empty()) {
    int v = q.front();
    q.pop();
    for (int w : g.out.at(v)) {
      if (!members.contains(w)) continue;
      if (w == start) {
        std::vector<int> path{start};
        for (int x = v; x != start; x = parent[x]) path.push_back(x);
        std::reverse(path.begin() + 1, path.end());
        path.push_back(start);
        return path;
      }
      if (!parent.contains(w)) {
        parent[w] = v;
        q.push(w);
      }
    }
  }
  return {start, start};
}

std::set<int> reach(const std::map<int, std::vector<int>>& adj, int from) {
  std::set<int> seen{from};
  std::vector<int> todo{from};
  while (!todo.empty()) {
    int v = todo.back();
    todo.pop_back();
    for (int w : adj.at(v)) {
      if (seen.insert(w).second) todo.push_back(w);
    }
  }
  return seen;
}

}  // namespace

ValidationReport check_structure(const Block& block) {
  ValidationReport r;
  Graph g(block);

  for (const auto& [idx, inst] : block.nodes()) {
    std::string why;
    if (!inst.resolve(&why)) {
      add(r, idx, inst.spec() ? FindingKind::kBadArgument : FindingKind::kUndefinedOp, why);
    }
  }

  for (const auto& comp : cyclic_components(g)) {
    add(r, comp.front(), FindingKind::kCycle, "the graph contains a cycle " + join_path(cycle_path(g, comp)));
  }

  int in_idx = block.input_index();
  int out_idx = block.output_index();
  std::set<int> from_input = reach(g.out, in_idx);
  std::set<int> to_output = reach(g.in, out_idx);
  for (const auto& [idx, inst] : block.nodes()) {
    if (!from_input.contains(idx)) {
      add(r, idx, FindingKind::kDeadNode, "node " + std::to_string(idx) + " (" + inst.op +
                                              ") is not reachable from the input node");
    } else if (!to_output.contains(idx)) {
      add(r, idx, FindingKind::kDeadNode, "node " + std::to_string(idx) + " (" + inst.op +
                                              ") does not lead to the output node");
    }
  }

  if (!g.in.at(in_idx).empty()) {
    add(r, in_idx, FindingKind::kInputEdges, "the input node cannot have incoming edges");
  }
  std::size_t fan_in = g.in.at(out_idx).size();
  if (fan_in != 1) {
    add(r, out_idx, FindingKind::kOutputArity,
        "the output node can have only one input, got " + std::to_string(fan_in));
  }
  if (!g.out.at(out_idx).empty()) {
    add(r, out_idx, FindingKind::kOutputArity, "the output node cannot have outgoing edges");
  }

  for (const auto& [idx, inst] : block.nodes()) {
    const dsl::OpSpec* spec = inst.spec();
    if (!spec) continue;
    std::size_t n = g.in.at(idx).size();
    if (spec->arity == Arity::kUnary && n != 1) {
      add(r, idx, FindingKind::kOpArity, inst.op + " takes exactly one input, got " + std::to_string(n));
    } else if (spec->arity == Arity::kMulti && n < 2) {
      add(r, idx, FindingKind::kOpArity, inst.op + " needs at least two inputs, got " + std::to_string(n));
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Shape inference

namespace {

struct NodeFailure {
  FindingKind kind;
  std::string reason;
};

class ShapeRules {
 public:
  ShapeRules(const OpInstance& inst, const dsl::ResolvedArgs& args, const VarBinding& binding)
      : inst_(inst), args_(args), binding_(binding) {}

  // Returns the output shape or sets failure_.
  std::optional<Shape> apply(const std::vector<Shape>& in) {
    try {
      return dispatch(in);
    } catch (const NodeFailure& f) {
      failure_ = f;
      return std::nullopt;
    }
  }

  const NodeFailure& failure() const { return *failure_; }

 private:
  [[noreturn]] static void fail(FindingKind kind, std::string reason) { throw NodeFailure{kind, std::move(reason)}; }

  std::int64_t eval(const ParamExpr& e, std::string_view what) const {
    try {
      return dsl::eval_expr(e, binding_);
    } catch (const EvalError& err) {
      fail(FindingKind::kEvalError, "cannot evaluate " + std::string(what) + "=" + e.to_string() + ": " + err.what());
    }
  }

  std::int64_t positive(std::string_view name) const {
    std::int64_t v = eval(args_.at(name), name);
    if (v < 1) fail(FindingKind::kBadValue, inst_.op + " " + std::string(name) + " must be >= 1, got " + std::to_string(v));
    return v;
  }

  std::vector<std::int64_t> list() const {
    std::vector<std::int64_t> out;
    for (std::size_t i = 0; i < args_.list.size(); ++i) {
      out.push_back(eval(args_.list[i], "argument " + std::to_string(i)));
    }
    return out;
  }

  void require_rank(const Shape& s, std::size_t rank, std::string_view layout) const {
    if (s.size() != rank) {
      fail(FindingKind::kRankMismatch, inst_.op + " expects a " + std::to_string(rank) + "-d input " +
                                           std::string(layout) + ", got " + format_shape(s));
    }
  }

  std::size_t axis(const Shape& s) const {
    std::int64_t d = eval(args_.at("dim"), "dim");
    auto rank = static_cast<std::int64_t>(s.size());
    if (d < -rank || d >= rank) {
      fail(FindingKind::kBadDim, inst_.op + " dim=" + std::to_string(d) + " is out of range for input " + format_shape(s));
    }
    return static_cast<std::size_t>(d < 0 ? d + rank : d);
  }

  static std::int64_t window(std::int64_t x, std::int64_t k, std::int64_t stride, std::int64_t dilation,
                             std::int64_t pad) {
    std::int64_t span = x + 2 * pad - dilation * (k - 1) - 1;
    if (span < 0) return 0;
    return span / stride + 1;
  }

  std::optional<Shape> broadcast(const Shape& a, const Shape& b) const {
    std::size_t rank = std::max(a.size(), b.size());
    Shape out(rank);
    for (std::size_t i = 0; i < rank; ++i) {
      std::int64_t x = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
      std::int64_t y = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
      if (x != y && x != 1 && y != 1) return std::nullopt;
      out[i] = std::max(x, y);
    }
    return out;
  }

  static std::int64_t numel(const Shape& s) {
    std::int64_t n = 1;
    for (auto d : s) {
      if (__builtin_mul_overflow(n, d, &n)) fail(FindingKind::kBadValue, "tensor size overflows");
    }
    return n;
  }

  Shape dispatch(const std::vector<Shape>& in) {
    const std::string& op = inst_.op;
    const Shape& x = in.front();

    if (op == "output") return x;

    if (op == "Conv2d") {
      require_rank(x, 4, "(B,C,H,W)");
      std::int64_t out_ch = positive("out_channels");
      std::int64_t k = positive("kernel_size");
      std::int64_t stride = positive("stride");
      std::int64_t dilation = positive("dilation");
      std::int64_t groups = positive("groups");
      if (x[1] % groups != 0 || out_ch % groups != 0) {
        fail(FindingKind::kGroupsDivisibility,
             "Conv2d in_channels " + std::to_string(x[1]) + " and out_channels " + std::to_string(out_ch) +
                 " must both be divisible by groups " + std::to_string(groups) + " (input " + format_shape(x) + ")");
      }
      std::int64_t pad = dilation * (k - 1) / 2;
      Shape out{x[0], out_ch, window(x[2], k, stride, dilation, pad), window(x[3], k, stride, dilation, pad)};
      if (out[2] < 1 || out[3] < 1) {
        fail(FindingKind::kSpatialUnderflow, "Conv2d output " + format_shape(out) + " from input " + format_shape(x) +
                                                 " has an empty spatial dimension");
      }
      return out;
    }
    if (op == "Linear") {
      Shape out = x;
      out.back() = positive("out_channels");
      return out;
    }
    if (op == "AvgPool2d" || op == "MaxPool2d") {
      require_rank(x, 4, "(B,C,H,W)");
      std::int64_t k = positive("kernel_size");
      std::int64_t stride = positive("stride");
      Shape out{x[0], x[1], window(x[2], k, stride, 1, 0), window(x[3], k, stride, 1, 0)};
      if (out[2] < 1 || out[3] < 1) {
        fail(FindingKind::kSpatialUnderflow, op + " kernel_size " + std::to_string(k) + " does not fit input " +
                                                 format_shape(x));
      }
      return out;
    }
    if (op == "AdaptiveAvgPool2d" || op == "AdaptiveMaxPool2d") {
      require_rank(x, 4, "(B,C,H,W)");
      std::int64_t size = positive("output_size");
      return {x[0], x[1], size, size};
    }
    if (op == "Add" || op == "Mul") {
      Shape acc = x;
      for (std::size_t i = 1; i < in.size(); ++i) {
        auto b = broadcast(acc, in[i]);
        if (!b) {
          fail(FindingKind::kBroadcastMismatch, op + " inputs " + format_shape(acc) + " and " + format_shape(in[i]) +
                                                    " do not conform to the broadcasting rule");
        }
        acc = *b;
      }
      return acc;
    }
    if (op == "Multiply") {
      Shape acc = x;
      for (std::size_t i = 1; i < in.size(); ++i) {
        const Shape& b = in[i];
        if (acc.size() < 2 || b.size() < 2) {
          fail(FindingKind::kMatmulMismatch, "Multiply needs inputs of rank >= 2, got " + format_shape(acc) + " and " +
                                                 format_shape(b));
        }
        if (acc.back() != b[b.size() - 2]) {
          fail(FindingKind::kMatmulMismatch, "Multiply inputs " + format_shape(acc) + " and " + format_shape(b) +
                                                 " do not conform to the matrix multiplication rule");
        }
        Shape lead_a(acc.begin(), acc.end() - 2);
        Shape lead_b(b.begin(), b.end() - 2);
        auto lead = broadcast(lead_a, lead_b);
        if (!lead) {
          fail(FindingKind::kMatmulMismatch, "Multiply batch dimensions of " + format_shape(acc) + " and " +
                                                 format_shape(b) + " do not broadcast");
        }
        Shape out = *lead;
        out.push_back(acc[acc.size() - 2]);
        out.push_back(b.back());
        acc = out;
      }
      return acc;
    }
    if (op == "concat") {
      std::size_t d = axis(x);
      Shape out = x;
      for (std::size_t i = 1; i < in.size(); ++i) {
        const Shape& y = in[i];
        bool same = y.size() == x.size();
        for (std::size_t j = 0; same && j < x.size(); ++j) {
          if (j != d && x[j] != y[j]) same = false;
        }
        if (!same) {
          fail(FindingKind::kConcatMismatch, "concat(dim=" + std::to_string(d) + ") inputs " + format_shape(x) +
                                                 " and " + format_shape(y) + " differ outside the concat dimension");
        }
        out[d] += y[d];
      }
      return out;
    }
    if (op == "mean" || op == "max" || op == "sum") {
      Shape out = x;
      out[axis(x)] = 1;
      return out;
    }
    if (op == "softmax") {
      axis(x);
      return x;
    }
    if (op == "ReLU" || op == "GELU" || op == "Sigmoid" || op == "LN") return x;
    if (op == "BN") {
      require_rank(x, 4, "(B,C,H,W)");
      return x;
    }
    if (op == "permute") {
      auto dims = list();
      std::vector<std::int64_t> sorted = dims;
      std::sort(sorted.begin(), sorted.end());
      bool is_perm = dims.size() == x.size();
      for (std::size_t i = 0; is_perm && i < sorted.size(); ++i) {
        if (sorted[i] != static_cast<std::int64_t>(i)) is_perm = false;
      }
      if (!is_perm) {
        fail(FindingKind::kPermuteRank, "permute" + format_shape(dims) + " is not a permutation of the " +
                                            std::to_string(x.size()) + " dimensions of input " + format_shape(x));
      }
      Shape out;
      for (auto d : dims) out.push_back(x[static_cast<std::size_t>(d)]);
      return out;
    }
    if (op == "repeat") {
      auto sizes = list();
      if (sizes.size() < x.size()) {
        fail(FindingKind::kRankMismatch, "repeat" + format_shape(sizes) + " has fewer sizes than the input rank of " +
                                             format_shape(x));
      }
      Shape out(sizes.size());
      std::size_t lead = sizes.size() - x.size();
      for (std::size_t i = 0; i < sizes.size(); ++i) {
        if (sizes[i] < 1) fail(FindingKind::kBadValue, "repeat sizes must be >= 1, got " + format_shape(sizes));
        std::int64_t base = i < lead ? 1 : x[i - lead];
        if (__builtin_mul_overflow(base, sizes[i], &out[i])) fail(FindingKind::kBadValue, "repeat overflows");
      }
      numel(out);
      return out;
    }
    if (op == "reshape") {
      auto dims = list();
      int wildcards = 0;
      std::int64_t known = 1;
      for (auto d : dims) {
        if (d == -1) {
          ++wildcards;
        } else if (d < 1) {
          fail(FindingKind::kBadValue, "reshape" + format_shape(dims) + " has an invalid size " + std::to_string(d));
        } else if (__builtin_mul_overflow(known, d, &known)) {
          fail(FindingKind::kBadValue, "reshape target overflows");
        }
      }
      std::int64_t total = numel(x);
      if (wildcards > 1) {
        fail(FindingKind::kReshapeCount, "reshape" + format_shape(dims) + " may use -1 at most once");
      }
      if (wildcards == 1) {
        if (total % known != 0) {
          fail(FindingKind::kReshapeCount, "reshape" + format_shape(dims) + " cannot hold the " + std::to_string(total) +
                                               " elements of input " + format_shape(x));
        }
        for (auto& d : dims) {
          if (d == -1) d = total / known;
        }
      } else if (known != total) {
        fail(FindingKind::kReshapeCount, "reshape" + format_shape(dims) + " has " + std::to_string(known) +
                                             " elements but input " + format_shape(x) + " has " + std::to_string(total));
      }
      return dims;
    }
    fail(FindingKind::kUndefinedOp, "Undefined computation " + op + " is used");
  }

  const OpInstance& inst_;
  const dsl::ResolvedArgs& args_;
  const VarBinding& binding_;
  std::optional<NodeFailure> failure_;
};

std::vector<int> topo_order(const Block& block) {
  std::map<int, int> indegree;
  for (const auto& [idx, inst] : block.nodes()) indegree[idx] = 0;
  for (const auto& e : block.edges()) ++indegree[e.dst];
  std::priority_queue<int, std::vector<int>, std::greater<>> ready;
  for (const auto& [idx, deg] : indegree) {
    if (deg == 0) ready.push(idx);
  }
  std::vector<int> order;
  while (!ready.empty()) {
    int v = ready.top();
    ready.pop();
    order.push_back(v);
    for (int w : block.successors(v)) {
      if (--indegree[w] == 0) ready.push(w);
    }
  }
  return order;
}

}  // namespace

ValidationReport infer_shapes(const Block& block, const VarBinding& binding) {
  ValidationReport r = check_structure(block);
  if (!r.ok()) return r;

  const std::string suffix = " (under " + binding.to_string() + ")";
  for (int idx : topo_order(block)) {
    const OpInstance& inst = block.node(idx);
    if (inst.op == "input") {
      r.inferred[idx] = {binding.B, binding.C, binding.H, binding.W};
      continue;
    }
    std::vector<Shape> in;
    for (int p : block.predecessors(idx)) in.push_back(r.inferred.at(p));
    auto args = inst.resolve();
    ShapeRules rules(inst, *args, binding);
    auto shape = rules.apply(in);
    if (!shape) {
      add(r, idx, rules.failure().kind, rules.failure().reason + suffix);
      return r;
    }
    r.inferred[idx] = std::move(*shape);
  }
  return r;
}

namespace {

void check_role(ValidationReport& r, const Block& block, Role role, const VarBinding& b) {
  int out = block.output_index();
  const Shape& got = r.inferred.at(out);
  const std::string suffix = " (under " + b.to_string() + ")";
  auto fail = [&](FindingKind kind, const std::string& reason) { add(r, out, kind, reason + suffix); };

  if (got.size() != 4 || got[0] != b.B) {
    fail(FindingKind::kOutputContract, "the output of a " + std::string(role_name(role)) +
                                           " block must have shape (B,dim,H',W'), got " + format_shape(got));
    return;
  }
  switch (role) {
    case Role::kCell: {
      Shape want{b.B, b.C, b.H, b.W};
      if (got[1] != b.C) {
        fail(FindingKind::kCellChannels, "the input channels and output channels of a cell must both be C=" +
                                             std::to_string(b.C) + ": expected " + format_shape(want) + ", got " +
                                             format_shape(got));
      } else if (got != want) {
        fail(FindingKind::kOutputContract, "a cell must preserve the spatial size: expected " + format_shape(want) +
                                               ", got " + format_shape(got));
      }
      return;
    }
    case Role::kStem: {
      if (got[1] != b.dim) {
        fail(FindingKind::kOutputContract, "the stem output must have dim=" + std::to_string(b.dim) +
                                               " channels, got " + format_shape(got));
        return;
      }
      std::int64_t h = got[2];
      std::int64_t w = got[3];
      if (b.H % h != 0 || b.W % w != 0 || b.H / h != b.W / w) {
        fail(FindingKind::kStemFactor, "stem output spatial size must divide the input evenly by one factor: " +
                                           std::to_string(b.H) + "x" + std::to_string(b.W) + " -> " +
                                           std::to_string(h) + "x" + std::to_string(w));
      } else if (b.H / h < 2) {
        fail(FindingKind::kStemFactor, "stem must downsample by at least 2x: " + std::to_string(b.H) + "x" +
                                           std::to_string(b.W) + " -> " + std::to_string(h) + "x" + std::to_string(w));
      }
      return;
    }
    case Role::kDownsample: {
      if (got[1] != b.dim) {
        fail(FindingKind::kOutputContract, "the downsample output must have dim=" + std::to_string(b.dim) +
                                               " channels, got " + format_shape(got));
        return;
      }
      if (b.H % 2 != 0 || b.W % 2 != 0 || got[2] * 2 != b.H || got[3] * 2 != b.W) {
        Shape want{b.B, b.dim, b.H / 2, b.W / 2};
        fail(FindingKind::kDownsampleFactor, "the downsample block must reduce the spatial size exactly 2x: expected " +
                                                 format_shape(want) + ", got " + format_shape(got));
      }
      return;
    }
  }
}

}  // namespace

ValidationReport validate(const Block& block, Role role, std::span<const VarBinding> bindings) {
  ValidationReport first;
  bool have_first = false;
  for (const auto& b : bindings) {
    ValidationReport r = infer_shapes(block, b);
    if (r.ok()) check_role(r, block, role, b);
    if (!r.ok()) return r;
    if (!have_first) {
      first = std::move(r);
      have_first = true;
    }
  }
  if (!have_first) return check_structure(block);
  return first;
}

std::vector<VarBinding> default_bindings(Role role) {
  switch (role) {
    case Role::kCell:
      return {{.B = 2, .C = 16, .dim = 16, .H = 32, .W = 32}, {.B = 3, .C = 24, .dim = 24, .H = 16, .W = 16}};
    case Role::kStem:
      return {{.B = 2, .C = 3, .dim = 16, .H = 32, .W = 32}, {.B = 3, .C = 3, .dim = 24, .H = 64, .W = 64}};
    case Role::kDownsample:
      return {{.B = 2, .C = 16, .dim = 32, .H = 32, .W = 32}, {.B = 3, .C = 24, .dim = 48, .H = 16, .W = 16}};
  }
  return {};
}

ValidationReport validate(const Block& block, Role role) {
  auto b = default_bindings(role);
  return validate(block, role, b);
}

}  // namespace nadkit::check
