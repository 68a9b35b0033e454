// Copyright 2026 The nadkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "nadkit/codegen.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <queue>

#include <json.hpp>

namespace nadkit::codegen {

using check::Shape;
using dsl::Block;
using dsl::VarBinding;
using nlohmann::ordered_json;

std::vector<int> default_width_grid() {
  std::vector<int> g;
  for (int w = 8; w <= 128; w += 8) g.push_back(w);
  return g;
}

void MacroConfig::check() const {
  if (stacks < 1 || cells_per_stack < 1) throw ConfigError("macro needs stacks >= 1 and cells_per_stack >= 1");
  if (height < 1 || width < 1 || in_channels < 1 || num_classes < 1) {
    throw ConfigError("macro input size, channels and classes must be positive");
  }
  if (max_params < 0 || max_flops < 0 || !(flops_per_mac > 0)) throw ConfigError("macro budgets must be >= 0");
  if (width_grid.empty()) throw ConfigError("width grid is empty");
  for (std::size_t i = 0; i < width_grid.size(); ++i) {
    if (width_grid[i] < 1 || (i && width_grid[i] <= width_grid[i - 1])) {
      throw ConfigError("width grid must be positive and strictly increasing");
    }
  }
}

namespace {

ordered_json macro_json(const MacroConfig& m) {
  ordered_json j;
  j["stacks"] = m.stacks;
  j["cells_per_stack"] = m.cells_per_stack;
  j["height"] = m.height;
  j["width"] = m.width;
  j["in_channels"] = m.in_channels;
  j["num_classes"] = m.num_classes;
  j["max_params"] = m.max_params;
  j["max_flops"] = m.max_flops;
  j["flops_per_mac"] = m.flops_per_mac;
  j["width_grid"] = m.width_grid;
  return j;
}

MacroConfig macro_from(const ordered_json& j) {
  MacroConfig m;
  m.stacks = j.value("stacks", m.stacks);
  m.cells_per_stack = j.value("cells_per_stack", m.cells_per_stack);
  m.height = j.value("height", m.height);
  m.width = j.value("width", m.width);
  m.in_channels = j.value("in_channels", m.in_channels);
  m.num_classes = j.value("num_classes", m.num_classes);
  m.max_params = j.value("max_params", m.max_params);
  m.max_flops = j.value("max_flops", m.max_flops);
  m.flops_per_mac = j.value("flops_per_mac", m.flops_per_mac);
  if (j.contains("width_grid")) m.width_grid = j["width_grid"].get<std::vector<int>>();
  m.check();
  return m;
}

}  // namespace

std::string MacroConfig::to_json() const { return macro_json(*this).dump(); }

MacroConfig MacroConfig::from_json(std::string_view text) {
  try {
    return macro_from(ordered_json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("macro config: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Per-node cost

namespace {

std::int64_t numel(const Shape& s) {
  std::int64_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

Shape broadcast(const Shape& a, const Shape& b) {
  std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    std::int64_t x = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    std::int64_t y = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    out[i] = std::max(x, y);
  }
  return out;
}

using IntArgs = std::map<std::string, std::int64_t>;

ResourceCount node_cost(const std::string& op, const IntArgs& args, const std::vector<Shape>& in, const Shape& out) {
  ResourceCount r;
  if (op == "Conv2d") {
    std::int64_t cin = in[0][1];
    std::int64_t k = args.at("kernel_size");
    r.params = cin / args.at("groups") * k * k * args.at("out_channels");
    r.macs = r.params * out[2] * out[3];
  } else if (op == "BN") {
    r.params = 2 * in[0][1];
  } else if (op == "LN") {
    r.params = 2 * in[0].back();
  } else if (op == "Linear") {
    std::int64_t cin = in[0].back();
    std::int64_t cout = args.at("out_channels");
    r.params = cin * cout + cout;
    r.macs = cin * cout * (numel(out) / cout);
  } else if (op == "Multiply") {
    Shape acc = in[0];
    for (std::size_t i = 1; i < in.size(); ++i) {
      const Shape& b = in[i];
      Shape lead = broadcast(Shape(acc.begin(), acc.end() - 2), Shape(b.begin(), b.end() - 2));
      lead.push_back(acc[acc.size() - 2]);
      lead.push_back(b.back());
      r.macs += numel(lead) * acc.back();
      acc = lead;
    }
  }
  return r;
}

std::vector<int> topo_order(const Block& block) {
  std::map<int, int> indegree;
  for (const auto& [idx, inst] : block.nodes()) indegree[idx] = 0;
  for (const auto& e : block.edges()) ++indegree[e.dst];
  std::priority_queue<int, std::vector<int>, std::greater<>> ready;
  for (const auto& [idx, d] : indegree) {
    if (d == 0) ready.push(idx);
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

IntArgs eval_args(const dsl::ResolvedArgs& args, const VarBinding& b) {
  IntArgs out;
  for (const auto& [name, expr] : args.named) out[name] = dsl::eval_expr(expr, b);
  return out;
}

}  // namespace

ResourceCount count_block(const Block& block, const VarBinding& binding) {
  auto report = check::infer_shapes(block, binding);
  if (!report.ok()) throw BindingError(report.context());
  ResourceCount total;
  for (const auto& [idx, inst] : block.nodes()) {
    if (inst.op == "input" || inst.op == "output") continue;
    std::vector<Shape> in;
    for (int p : block.predecessors(idx)) in.push_back(report.inferred.at(p));
    auto r = node_cost(inst.op, eval_args(*inst.resolve(), binding), in, report.inferred.at(idx));
    total.params += r.params;
    total.macs += r.macs;
  }
  return total;
}

bool within_budget(const ResourceCount& r, const MacroConfig& macro) noexcept {
  return r.params <= macro.max_params &&
         static_cast<double>(r.macs) * macro.flops_per_mac <= static_cast<double>(macro.max_flops);
}

// ---------------------------------------------------------------------------
// Assembly

namespace {

std::string_view list_name(std::string_view op) {
  if (op == "permute") return "dims";
  if (op == "repeat") return "sizes";
  return "shape";
}

class Assembler {
 public:
  explicit Assembler(const MacroConfig& macro, int width) {
    net_.macro = macro;
    net_.width = width;
  }

  int add(std::string op, std::vector<NetArg> args, std::string section, std::vector<int> inputs, Shape shape) {
    int id = static_cast<int>(net_.nodes.size());
    for (int src : inputs) net_.edges.emplace_back(src, id);
    net_.nodes.push_back({id, std::move(op), std::move(args), std::move(section), std::move(inputs), std::move(shape)});
    return id;
  }

  // Splices `block` after node `cur`; returns the node feeding its output.
  int splice(const Block& block, check::Role role, const VarBinding& b, const std::string& section, int cur) {
    auto report = check::validate(block, role, std::span<const VarBinding>(&b, 1));
    if (!report.ok()) throw BindingError(section + ": " + report.context());

    const dsl::PartialBinding fixed{{dsl::Var::kC, b.C}, {dsl::Var::kDim, b.dim}, {dsl::Var::kH, b.H}, {dsl::Var::kW, b.W}};
    std::map<int, int> global;
    int result = -1;
    for (int idx : topo_order(block)) {
      const auto& inst = block.node(idx);
      if (inst.op == "input") {
        global[idx] = cur;
        continue;
      }
      std::vector<int> inputs;
      for (int p : block.predecessors(idx)) inputs.push_back(global.at(p));
      if (inst.op == "output") {
        result = inputs.front();
        continue;
      }
      auto resolved = *inst.resolve();
      std::vector<NetArg> args;
      for (const auto& [name, expr] : resolved.named) {
        auto norm = dsl::normalize(expr, fixed);
        if (!norm.is_constant()) {
          throw BindingError(section + ": parameter " + name + "=" + expr.to_string() + " of node " +
                             std::to_string(idx) + " depends on the batch size");
        }
        args.push_back({name, {dsl::eval_expr(expr, b)}, false});
      }
      if (inst.spec()->variadic) {
        NetArg list{std::string(list_name(inst.op)), {}, true};
        for (const auto& expr : resolved.list) {
          auto norm = dsl::normalize(expr, fixed);
          if (norm.is_constant()) {
            list.values.emplace_back(dsl::eval_expr(expr, b));
          } else {
            list.values.emplace_back(norm.to_string());
          }
        }
        args.push_back(std::move(list));
      }
      global[idx] = add(inst.op, std::move(args), section, std::move(inputs), report.inferred.at(idx));
    }
    return result;
  }

  NetworkGraph take() { return std::move(net_); }
  const NetNode& node(int id) const { return net_.nodes.at(static_cast<std::size_t>(id)); }

 private:
  NetworkGraph net_;
};

}  // namespace

NetworkGraph assemble(const Block& cell, const Block& stem, const Block& downsample, const MacroConfig& macro,
                      int width) {
  macro.check();
  if (width < 1) throw BindingError("width must be >= 1");
  Assembler a(macro, width);
  int cur = a.add("input", {}, "input", {}, {1, macro.in_channels, macro.height, macro.width});

  VarBinding sb{.B = 1, .C = macro.in_channels, .dim = width, .H = macro.height, .W = macro.width};
  cur = a.splice(stem, check::Role::kStem, sb, "stem", cur);

  for (int i = 0; i < macro.stacks; ++i) {
    const Shape s = a.node(cur).shape;
    std::int64_t c = s[1];
    for (int j = 0; j < macro.cells_per_stack; ++j) {
      VarBinding cb{.B = 1, .C = c, .dim = c, .H = s[2], .W = s[3]};
      cur = a.splice(cell, check::Role::kCell, cb, "stack-" + std::to_string(i) + "-cell-" + std::to_string(j), cur);
    }
    if (i + 1 < macro.stacks) {
      const Shape t = a.node(cur).shape;
      VarBinding db{.B = 1, .C = t[1], .dim = 2 * t[1], .H = t[2], .W = t[3]};
      cur = a.splice(downsample, check::Role::kDownsample, db, "downsample-" + std::to_string(i), cur);
    }
  }

  std::int64_t c = a.node(cur).shape[1];
  cur = a.add("AdaptiveAvgPool2d", {{"output_size", {std::int64_t{1}}, false}}, "head", {cur}, {1, c, 1, 1});
  cur = a.add("reshape", {{"shape", {std::string("B"), c}, true}}, "head", {cur}, {1, c});
  cur = a.add("Linear", {{"out_channels", {std::int64_t{macro.num_classes}}, false}}, "head", {cur},
              {1, macro.num_classes});
  a.add("output", {}, "output", {cur}, {1, macro.num_classes});
  return a.take();
}

ResourceCount count_resources(const NetworkGraph& net) {
  ResourceCount total;
  for (const auto& n : net.nodes) {
    if (n.op == "input" || n.op == "output") continue;
    IntArgs args;
    for (const auto& a : n.args) {
      if (!a.list && a.values.size() == 1 && std::holds_alternative<std::int64_t>(a.values[0])) {
        args[a.name] = std::get<std::int64_t>(a.values[0]);
      }
    }
    std::vector<Shape> in;
    for (int src : n.inputs) in.push_back(net.node(src).shape);
    auto r = node_cost(n.op, args, in, n.shape);
    total.params += r.params;
    total.macs += r.macs;
  }
  return total;
}

int search_width(const Block& cell, const Block& stem, const Block& downsample, const MacroConfig& macro) {
  macro.check();
  std::map<int, bool> memo;
  auto feasible = [&](int w) {
    auto it = memo.find(w);
    if (it != memo.end()) return it->second;
    bool ok = false;
    try {
      ok = within_budget(count_resources(assemble(cell, stem, downsample, macro, w)), macro);
    } catch (const BindingError&) {
      ok = false;
    }
    memo[w] = ok;
    return ok;
  };

  const auto& grid = macro.width_grid;
  int best = -1;
  std::size_t best_i = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (feasible(grid[i])) {
      best = grid[i];
      best_i = i;
    }
  }
  if (best < 0) {
    throw Infeasible("no width in the grid fits the budgets (" + std::to_string(macro.max_params) + " params, " +
                     std::to_string(macro.max_flops) + " FLOPs)");
  }

  // Upper bracket: the next grid point, or keep stepping past the grid end.
  int step = grid.size() > 1 ? grid[1] - grid[0] : grid[0];
  int hi = best_i + 1 < grid.size() ? grid[best_i + 1] : best + step;
  while (feasible(hi)) {
    best = hi;
    hi += step;
    if (hi > (1 << 20)) throw Infeasible("width search did not terminate below 2^20");
  }
  int lo = best;
  while (hi - lo > 1) {
    int mid = lo + (hi - lo) / 2;
    if (feasible(mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

// ---------------------------------------------------------------------------
// Network JSON

namespace {

constexpr int kNetworkSchema = 1;

ordered_json scalar_json(const Scalar& s) {
  if (std::holds_alternative<std::int64_t>(s)) return std::get<std::int64_t>(s);
  return std::get<std::string>(s);
}

Scalar scalar_from(const ordered_json& j) {
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_string()) return j.get<std::string>();
  throw ConfigError("network JSON argument values must be integers or strings");
}

}  // namespace

std::string to_network_json(const NetworkGraph& net) {
  ordered_json j;
  j["schema_version"] = kNetworkSchema;
  j["macro"] = macro_json(net.macro);
  j["width"] = net.width;
  ordered_json nodes = ordered_json::array();
  for (const auto& n : net.nodes) {
    ordered_json e;
    e["id"] = n.id;
    e["op"] = n.op;
    ordered_json args = ordered_json::object();
    for (const auto& a : n.args) {
      if (a.list) {
        ordered_json arr = ordered_json::array();
        for (const auto& v : a.values) arr.push_back(scalar_json(v));
        args[a.name] = std::move(arr);
      } else {
        args[a.name] = scalar_json(a.values.at(0));
      }
    }
    e["args"] = std::move(args);
    e["section"] = n.section;
    e["inputs"] = n.inputs;
    e["shape"] = n.shape;
    nodes.push_back(std::move(e));
  }
  j["nodes"] = std::move(nodes);
  ordered_json edges = ordered_json::array();
  for (auto [s, d] : net.edges) edges.push_back({s, d});
  j["edges"] = std::move(edges);
  auto r = count_resources(net);
  j["resources"] = {{"params", r.params}, {"macs", r.macs}};
  return j.dump(1) + "\n";
}

NetworkGraph from_network_json(std::string_view text) {
  try {
    auto j = ordered_json::parse(text);
    if (j.at("schema_version").get<int>() != kNetworkSchema) throw ConfigError("unsupported network schema_version");
    NetworkGraph net;
    net.macro = macro_from(j.at("macro"));
    net.width = j.at("width").get<int>();
    for (const auto& e : j.at("nodes")) {
      NetNode n;
      n.id = e.at("id").get<int>();
      if (n.id != static_cast<int>(net.nodes.size())) throw ConfigError("network node ids must be 0..n-1 in order");
      n.op = e.at("op").get<std::string>();
      for (const auto& [name, v] : e.at("args").items()) {
        NetArg a{name, {}, v.is_array()};
        if (v.is_array()) {
          for (const auto& x : v) a.values.push_back(scalar_from(x));
        } else {
          a.values.push_back(scalar_from(v));
        }
        n.args.push_back(std::move(a));
      }
      n.section = e.at("section").get<std::string>();
      n.inputs = e.at("inputs").get<std::vector<int>>();
      for (int src : n.inputs) {
        if (src < 0 || src >= n.id) throw ConfigError("network node " + std::to_string(n.id) + " has a bad input");
      }
      n.shape = e.at("shape").get<Shape>();
      net.nodes.push_back(std::move(n));
    }
    for (const auto& e : j.at("edges")) net.edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("network JSON: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Backends

namespace {

std::string py_scalar(const Scalar& s) {
  if (std::holds_alternative<std::int64_t>(s)) return std::to_string(std::get<std::int64_t>(s));
  return "(" + std::get<std::string>(s) + ")";
}

std::int64_t int_arg(const NetNode& n, std::string_view name) {
  for (const auto& a : n.args) {
    if (a.name == name) return std::get<std::int64_t>(a.values.at(0));
  }
  throw ConfigError("node " + std::to_string(n.id) + " has no argument " + std::string(name));
}

std::string list_args(const NetNode& n) {
  std::string out;
  for (const auto& a : n.args) {
    if (!a.list) continue;
    for (std::size_t i = 0; i < a.values.size(); ++i) out += (i ? ", " : "") + py_scalar(a.values[i]);
  }
  return out;
}

// Per-op text templates. {x} is the first input, {xs} all inputs, {m} the
// submodule, {id} the node id; other fields are argument values.
struct OpTemplate {
  std::string_view init;     // submodule constructor, empty for functional ops
  std::string_view forward;  // expression
};

const std::map<std::string, OpTemplate, std::less<>>& py_templates() {
  static const std::map<std::string, OpTemplate, std::less<>> t = {
      {"Conv2d", {"nn.Conv2d({cin}, {out_channels}, {kernel_size}, stride={stride}, padding={pad}, "
                  "dilation={dilation}, groups={groups}, bias=False)",
                  "{m}({x})"}},
      {"Linear", {"nn.Linear({cin_last}, {out_channels})", "{m}({x})"}},
      {"AvgPool2d", {"nn.AvgPool2d({kernel_size}, {stride})", "{m}({x})"}},
      {"MaxPool2d", {"nn.MaxPool2d({kernel_size}, {stride})", "{m}({x})"}},
      {"AdaptiveAvgPool2d", {"nn.AdaptiveAvgPool2d({output_size})", "{m}({x})"}},
      {"AdaptiveMaxPool2d", {"nn.AdaptiveMaxPool2d({output_size})", "{m}({x})"}},
      {"BN", {"nn.BatchNorm2d({cin})", "{m}({x})"}},
      {"LN", {"nn.LayerNorm({cin_last})", "{m}({x})"}},
      {"ReLU", {"", "torch.relu({x})"}},
      {"GELU", {"", "F.gelu({x})"}},
      {"Sigmoid", {"", "torch.sigmoid({x})"}},
      {"Add", {"", "{sum}"}},
      {"Mul", {"", "{prod}"}},
      {"Multiply", {"", "{matmul}"}},
      {"concat", {"", "torch.cat([{xs}], dim={dim})"}},
      {"mean", {"", "{x}.mean(dim={dim}, keepdim=True)"}},
      {"max", {"", "{x}.amax(dim={dim}, keepdim=True)"}},
      {"sum", {"", "{x}.sum(dim={dim}, keepdim=True)"}},
      {"softmax", {"", "torch.softmax({x}, dim={dim})"}},
      {"permute", {"", "{x}.permute({list})"}},
      {"repeat", {"", "{x}.repeat({list})"}},
      {"reshape", {"", "{x}.reshape({list})"}},
  };
  return t;
}

std::string fill(std::string_view tmpl, const std::map<std::string, std::string>& fields) {
  std::string out;
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    auto open = tmpl.find('{', pos);
    if (open == std::string_view::npos) break;
    auto close = tmpl.find('}', open);
    out.append(tmpl.substr(pos, open - pos));
    out += fields.at(std::string(tmpl.substr(open + 1, close - open - 1)));
    pos = close + 1;
  }
  out.append(tmpl.substr(pos));
  return out;
}

std::string emit_pytorch(const NetworkGraph& net) {
  std::string init;
  std::string fwd;
  for (const auto& n : net.nodes) {
    if (n.op == "input") {
      fwd += "        x" + std::to_string(n.id) + " = x\n        B = x.shape[0]\n";
      continue;
    }
    if (n.op == "output") {
      fwd += "        return x" + std::to_string(n.inputs.at(0)) + "\n";
      continue;
    }
    auto it = py_templates().find(n.op);
    if (it == py_templates().end()) throw UnknownBackend("pytorch backend has no template for " + n.op);
    std::map<std::string, std::string> f;
    for (const auto& a : n.args) {
      if (!a.list) f[a.name] = py_scalar(a.values.at(0));
    }
    const Shape& in0 = net.node(n.inputs.at(0)).shape;
    f["cin"] = std::to_string(in0.size() > 1 ? in0[1] : 0);
    f["cin_last"] = std::to_string(in0.back());
    if (n.op == "Conv2d") f["pad"] = std::to_string(int_arg(n, "dilation") * (int_arg(n, "kernel_size") - 1) / 2);
    std::string x = "x" + std::to_string(n.inputs.at(0));
    std::string xs;
    std::string sum;
    std::string prod;
    std::string matmul = x;
    for (std::size_t i = 0; i < n.inputs.size(); ++i) {
      std::string xi = "x" + std::to_string(n.inputs[i]);
      xs += (i ? ", " : "") + xi;
      sum += (i ? " + " : "") + xi;
      prod += (i ? " * " : "") + xi;
      if (i) matmul = "torch.matmul(" + matmul + ", " + xi + ")";
    }
    f["x"] = x;
    f["xs"] = xs;
    f["sum"] = sum;
    f["prod"] = prod;
    f["matmul"] = matmul;
    f["list"] = list_args(n);
    std::string m = "self.n" + std::to_string(n.id);
    f["m"] = m;
    if (!it->second.init.empty()) init += "        " + m + " = " + fill(it->second.init, f) + "\n";
    fwd += "        x" + std::to_string(n.id) + " = " + fill(it->second.forward, f) + "  # " + n.section + "\n";
  }
  std::string out =
      "# Generated by nadkit from a canonical network JSON.\n"
      "import torch\nimport torch.nn as nn\nimport torch.nn.functional as F\n\n\n"
      "class Network(nn.Module):\n    def __init__(self):\n        super().__init__()\n";
  out += init.empty() ? "        pass\n" : init;
  out += "\n    def forward(self, x):\n" + fwd;
  return out;
}

}  // namespace

std::vector<std::string> backends() { return {"json", "pytorch"}; }

std::vector<std::pair<std::string, std::string>> emit(const NetworkGraph& net, std::string_view backend) {
  if (backend == "json") return {{"network.json", to_network_json(net)}};
  if (backend == "pytorch") return {{"model.py", emit_pytorch(net)}};
  throw UnknownBackend("unknown emit backend '" + std::string(backend) + "'");
}

}  // namespace nadkit::codegen
