// Copyright 2026 The nadkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "support.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "util.hpp"

namespace nadkit::testing {

using dsl::Block;
using dsl::Edge;
using dsl::OpInstance;
using dsl::ParamExpr;

std::filesystem::path data_dir() { return NADKIT_TEST_DATA; }

Block read_block(const std::filesystem::path& path) { return dsl::parse_block(util::read_file(path)); }

std::vector<IsoPair> read_iso_pairs() {
  std::vector<IsoPair> out;
  std::istringstream in(util::read_file(data_dir() / "iso" / "pairs.txt"));
  std::string a, b, *cur = nullptr;
  auto flush = [&] {
    if (!out.empty() && cur) {
      out.back().a = dsl::parse_block(a);
      out.back().b = dsl::parse_block(b);
    }
  };
  for (std::string line; std::getline(in, line);) {
    if (line.rfind("===", 0) == 0) {
      flush();
      std::istringstream head(line.substr(3));
      std::string verdict, name;
      head >> verdict >> name;
      out.push_back({name, verdict == "same", {}, {}});
      a.clear();
      b.clear();
      cur = &a;
    } else if (line == "---") {
      cur = &b;
    } else if (cur && !(line.size() && line[0] == '#' && line.rfind("##", 0) != 0)) {
      *cur += line + "\n";
    }
  }
  flush();
  return out;
}

namespace {

int pick(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
bool coin(Rng& rng, double p = 0.5) { return std::bernoulli_distribution(p)(rng); }

ParamExpr random_expr(Rng& rng, int depth) {
  static const dsl::Var kVars[] = {dsl::Var::kB, dsl::Var::kC, dsl::Var::kDim, dsl::Var::kH, dsl::Var::kW};
  int kind = depth <= 0 ? pick(rng, 0, 1) : pick(rng, 0, 4);
  switch (kind) {
    case 0:
      return ParamExpr::literal(pick(rng, 0, 64));
    case 1:
      return ParamExpr::variable(kVars[pick(rng, 0, 4)]);
    case 2:
      return ParamExpr::negate(random_expr(rng, depth - 1));
    default: {
      auto op = static_cast<ParamExpr::BinOp>(pick(rng, 0, 3));
      return ParamExpr::binary(op, random_expr(rng, depth - 1), random_expr(rng, depth - 1));
    }
  }
}

OpInstance random_op(Rng& rng) {
  if (coin(rng, 0.05)) {
    OpInstance inst{"ROIAlign", {}};
    for (int i = pick(rng, 0, 2); i > 0; --i) inst.args.push_back({std::nullopt, random_expr(rng, 1)});
    return inst;
  }
  auto cat = dsl::catalog();
  const dsl::OpSpec* spec = nullptr;
  do {
    spec = &cat[static_cast<std::size_t>(pick(rng, 0, static_cast<int>(cat.size()) - 1))];
  } while (spec->arity == dsl::Arity::kSource || spec->arity == dsl::Arity::kSink);
  OpInstance inst{std::string(spec->name), {}};
  if (spec->variadic) {
    for (int i = pick(rng, 1, 4); i > 0; --i) inst.args.push_back({std::nullopt, random_expr(rng, 2)});
    return inst;
  }
  // Positional prefix, then named; optional trailing parameters may be left out.
  std::size_t last = 0;
  for (std::size_t i = 0; i < spec->params.size(); ++i) {
    if (spec->params[i].required() || coin(rng, 0.4)) last = i + 1;
  }
  std::size_t positional = static_cast<std::size_t>(pick(rng, 0, static_cast<int>(last)));
  for (std::size_t i = 0; i < last; ++i) {
    const auto& p = spec->params[i];
    if (i >= positional && !p.required() && coin(rng, 0.3)) continue;
    std::optional<std::string> name;
    if (i >= positional) name = std::string(p.name);
    inst.args.push_back({name, random_expr(rng, 2)});
  }
  return inst;
}

OpInstance op(const std::string& text) {
  return dsl::parse_block("##t##\n0:input\n1:" + text + "\n2:output\n0->1\n1->2\n").node(1);
}

// Distinct sorted indices with gaps.
std::vector<int> spread_indices(Rng& rng, int n) {
  std::vector<int> pool(static_cast<std::size_t>(3 * n + 3));
  std::iota(pool.begin(), pool.end(), 0);
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(static_cast<std::size_t>(n));
  return pool;
}

std::string label_of(const OpInstance& inst) {
  auto resolved = inst.resolve();
  if (!resolved) return inst.op + "!" + inst.to_string();
  std::string s = inst.op;
  for (const auto& [name, expr] : resolved->named) s += "|" + name + "=" + dsl::normalize(expr).to_string();
  for (const auto& expr : resolved->list) s += "|" + dsl::normalize(expr).to_string();
  return s;
}

}  // namespace

Block random_block(Rng& rng, int max_nodes) {
  int n = pick(rng, 3, std::max(3, max_nodes));
  std::vector<int> idx = spread_indices(rng, n);  // idx[0] input, idx[n-1] output, order = topological
  std::map<int, OpInstance> nodes;
  nodes[idx[0]] = {"input", {}};
  nodes[idx[static_cast<std::size_t>(n - 1)]] = {"output", {}};
  std::set<std::pair<int, int>> edges;
  for (int i = 1; i < n - 1; ++i) {
    nodes[idx[static_cast<std::size_t>(i)]] = random_op(rng);
    int fan_in = pick(rng, 1, std::min(i, 3));
    for (int k = 0; k < fan_in; ++k) edges.insert({idx[static_cast<std::size_t>(pick(rng, 0, i - 1))], idx[static_cast<std::size_t>(i)]});
  }
  edges.insert({idx[static_cast<std::size_t>(pick(rng, std::max(0, n - 3), n - 2))], idx[static_cast<std::size_t>(n - 1)]});
  std::vector<Edge> list;
  for (auto [s, d] : edges) list.push_back({s, d});
  std::shuffle(list.begin(), list.end(), rng);
  return Block("blk" + std::to_string(pick(rng, 0, 99)), std::move(nodes), std::move(list));
}

Block random_valid_cell(Rng& rng, int inner_nodes) {
  static const char* kUnary[] = {"BN", "ReLU", "GELU", "Sigmoid",
                                 "Conv2d(out_channels=dim, kernel_size=3)",
                                 "Conv2d(out_channels=dim, kernel_size=1)",
                                 "Conv2d(out_channels=dim, kernel_size=5)",
                                 "Conv2d(out_channels=dim, kernel_size=3, dilation=2)",
                                 "Conv2d(out_channels=dim, kernel_size=3, groups=dim)"};
  static const char* kJoin[] = {"Add", "Mul"};
  std::map<int, OpInstance> nodes;
  std::set<std::pair<int, int>> edges;
  nodes[0] = {"input", {}};
  int next = 1;
  std::set<int> sinks = {0};
  for (int i = 0; i < inner_nodes; ++i) {
    int id = next++;
    std::vector<int> existing;
    for (const auto& [k, v] : nodes) existing.push_back(k);
    if (existing.size() >= 2 && coin(rng, 0.25)) {
      nodes[id] = op(kJoin[pick(rng, 0, 1)]);
      std::shuffle(existing.begin(), existing.end(), rng);
      for (int k = 0; k < 2; ++k) edges.insert({existing[static_cast<std::size_t>(k)], id});
    } else {
      nodes[id] = op(kUnary[pick(rng, 0, 8)]);
      // Favour extending a current sink so the graph grows deep, not wide.
      int src = coin(rng, 0.7) ? *std::next(sinks.begin(), pick(rng, 0, static_cast<int>(sinks.size()) - 1))
                               : existing[static_cast<std::size_t>(pick(rng, 0, static_cast<int>(existing.size()) - 1))];
      edges.insert({src, id});
    }
    for (const auto& [s, d] : edges) {
      if (d == id) sinks.erase(s);
    }
    sinks.insert(id);
  }
  sinks.erase(0);
  int last = 0;
  if (sinks.size() > 1) {
    last = next++;
    nodes[last] = op("Add");
    for (int s : sinks) edges.insert({s, last});
  } else if (sinks.size() == 1) {
    last = *sinks.begin();
  }
  int out = next;
  nodes[out] = {"output", {}};
  edges.insert({last, out});
  std::vector<Edge> list;
  for (auto [s, d] : edges) list.push_back({s, d});
  return Block("cell", std::move(nodes), std::move(list));
}

Block shuffle_indices(const Block& block, Rng& rng) {
  std::vector<int> fresh = spread_indices(rng, static_cast<int>(block.size()));
  std::map<int, int> remap;
  std::size_t i = 0;
  for (const auto& [k, v] : block.nodes()) remap[k] = fresh[i++];
  std::map<int, OpInstance> nodes;
  for (const auto& [k, v] : block.nodes()) nodes[remap[k]] = v;
  std::vector<Edge> edges;
  for (const auto& e : block.edges()) edges.push_back({remap[e.src], remap[e.dst]});
  std::shuffle(edges.begin(), edges.end(), rng);
  return Block(block.name(), std::move(nodes), std::move(edges));
}

Block perturb(const Block& block, Rng& rng) {
  std::map<int, OpInstance> nodes = block.nodes();
  std::vector<Edge> edges = block.edges();
  std::vector<int> inner;
  for (const auto& [k, v] : nodes) {
    if (v.op != "input" && v.op != "output") inner.push_back(k);
  }
  int choice = pick(rng, 0, 2);
  if (choice == 0 && !inner.empty()) {
    int k = inner[static_cast<std::size_t>(pick(rng, 0, static_cast<int>(inner.size()) - 1))];
    static const char* kSwap[] = {"ReLU", "GELU", "Sigmoid", "BN", "LN"};
    nodes[k] = op(kSwap[pick(rng, 0, 4)]);
  } else if (choice == 1 && !inner.empty()) {
    int k = inner[static_cast<std::size_t>(pick(rng, 0, static_cast<int>(inner.size()) - 1))];
    auto& args = nodes[k].args;
    if (args.empty()) {
      nodes[k] = random_op(rng);
    } else {
      args[static_cast<std::size_t>(pick(rng, 0, static_cast<int>(args.size()) - 1))].value =
          ParamExpr::literal(pick(rng, 0, 8));
    }
  } else {
    // Move one edge's source to another node that is not the output.
    auto& e = edges[static_cast<std::size_t>(pick(rng, 0, static_cast<int>(edges.size()) - 1))];
    std::vector<int> sources;
    for (const auto& [k, v] : nodes) {
      if (v.op != "output" && k != e.dst) sources.push_back(k);
    }
    int src = sources[static_cast<std::size_t>(pick(rng, 0, static_cast<int>(sources.size()) - 1))];
    bool dup = std::any_of(edges.begin(), edges.end(), [&](const Edge& x) { return x.src == src && x.dst == e.dst; });
    if (!dup) e.src = src;
  }
  return Block(block.name(), std::move(nodes), std::move(edges));
}

std::string mutate_text(const std::string& text, Rng& rng) {
  static const std::string kAlphabet = "0123456789:->#()=,+-*/ \n\tBCHWdimConvReLUoutputinput_.xyz";
  static const char* kSnippets[] = {"99999999999999999999999", "((((((", "))", "->->", "##", ":", "-2147483649",
                                    "dim/0", "\xff\xfe", "Conv2d(,)", "=\n", "1:input\n"};
  std::string s = text;
  for (int m = pick(rng, 1, 4); m > 0; --m) {
    std::size_t at = s.empty() ? 0 : static_cast<std::size_t>(pick(rng, 0, static_cast<int>(s.size())));
    switch (pick(rng, 0, 6)) {
      case 0:
        if (!s.empty()) s.erase(std::min(at, s.size() - 1), static_cast<std::size_t>(pick(rng, 1, 5)));
        break;
      case 1:
        s.insert(at, 1, kAlphabet[static_cast<std::size_t>(pick(rng, 0, static_cast<int>(kAlphabet.size()) - 1))]);
        break;
      case 2:
        s.insert(at, kSnippets[pick(rng, 0, 11)]);
        break;
      case 3:
        s.resize(at);
        break;
      default: {
        auto lines = util::split_lines(s);
        if (lines.empty()) break;
        std::size_t i = static_cast<std::size_t>(pick(rng, 0, static_cast<int>(lines.size()) - 1));
        std::size_t j = static_cast<std::size_t>(pick(rng, 0, static_cast<int>(lines.size()) - 1));
        if (coin(rng)) {
          std::swap(lines[i], lines[j]);
        } else if (coin(rng)) {
          lines.insert(lines.begin() + static_cast<std::ptrdiff_t>(i), lines[j]);
        } else {
          lines.erase(lines.begin() + static_cast<std::ptrdiff_t>(i));
        }
        s.clear();
        for (const auto& l : lines) s += l + "\n";
      }
    }
  }
  return s;
}

bool brute_force_isomorphic(const Block& a, const Block& b) {
  if (a.size() != b.size() || a.edges().size() != b.edges().size()) return false;
  std::vector<int> ia;
  std::vector<int> ib;
  for (const auto& [k, v] : a.nodes()) ia.push_back(k);
  for (const auto& [k, v] : b.nodes()) ib.push_back(k);
  std::map<int, std::string> la;
  std::map<int, std::string> lb;
  for (const auto& [k, v] : a.nodes()) la[k] = label_of(v);
  for (const auto& [k, v] : b.nodes()) lb[k] = label_of(v);
  std::set<std::pair<int, int>> eb;
  for (const auto& e : b.edges()) eb.insert({e.src, e.dst});

  std::vector<std::size_t> perm(ib.size());
  std::iota(perm.begin(), perm.end(), 0);
  do {
    bool ok = true;
    std::map<int, int> m;
    for (std::size_t i = 0; i < ia.size() && ok; ++i) {
      int bi = ib[perm[i]];
      ok = la[ia[i]] == lb[bi];
      m[ia[i]] = bi;
    }
    if (!ok) continue;
    for (const auto& e : a.edges()) {
      if (!eb.contains({m[e.src], m[e.dst]})) {
        ok = false;
        break;
      }
    }
    if (ok) return true;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return false;
}

// ---------------------------------------------------------------------------
// ScriptedModel

namespace {

std::string between(const std::string& text, const std::string& open, const std::string& close) {
  auto a = text.find(open);
  if (a == std::string::npos) return {};
  a += open.size();
  auto b = text.find(close, a);
  return text.substr(a, b == std::string::npos ? std::string::npos : b - a);
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

int next_index(const Block& b) { return b.nodes().rbegin()->first + 1; }

// Puts a chain of ops between the output and its producer.
Block insert_before_output(const Block& b, const std::vector<std::string>& chain) {
  auto nodes = b.nodes();
  std::vector<Edge> edges;
  int out = b.output_index();
  int prev = b.predecessors(out).front();
  for (const auto& e : b.edges()) {
    if (e.dst != out) edges.push_back(e);
  }
  int id = next_index(b);
  for (const auto& text : chain) {
    nodes[id] = op(text);
    edges.push_back({prev, id});
    prev = id++;
  }
  edges.push_back({prev, out});
  return Block(b.name(), std::move(nodes), std::move(edges));
}

Block squeeze_excite(const Block& b) {
  auto nodes = b.nodes();
  std::vector<Edge> edges;
  int out = b.output_index();
  int x = b.predecessors(out).front();
  for (const auto& e : b.edges()) {
    if (e.dst != out) edges.push_back(e);
  }
  int p = next_index(b);
  nodes[p] = op("AdaptiveAvgPool2d(output_size=1)");
  nodes[p + 1] = op("Conv2d(out_channels=dim, kernel_size=1)");
  nodes[p + 2] = op("Sigmoid");
  nodes[p + 3] = op("Mul");
  edges.insert(edges.end(), {{x, p}, {p, p + 1}, {p + 1, p + 2}, {x, p + 3}, {p + 2, p + 3}, {p + 3, out}});
  return Block(b.name(), std::move(nodes), std::move(edges));
}

Block swap_activation(const Block& b, const std::string& from, const std::string& to) {
  auto nodes = b.nodes();
  for (auto& [k, v] : nodes) {
    if (v.op == from) v = op(to);
  }
  return Block(b.name(), std::move(nodes), b.edges());
}

constexpr const char* kCompanionReply =
    "Both blocks follow the definition.\n"
    "##stem##\n0:input\n1:Conv2d(out_channels=dim, kernel_size=3, stride=2)\n2:BN\n3:ReLU\n4:output\n"
    "0->1\n1->2\n2->3\n3->4\n\n"
    "##downsample##\n0:input\n1:Conv2d(out_channels=dim, kernel_size=3, stride=2)\n2:BN\n3:output\n"
    "0->1\n1->2\n2->3\n";

// Preference used when ranking inspirations.
int preference(const std::string& text) {
  static const char* kOrder[] = {"excitation", "dilat", "region", "depthwise", "smooth", "normaliz"};
  std::string t = lower(text);
  for (int i = 0; i < 6; ++i) {
    if (t.find(kOrder[i]) != std::string::npos) return i;
  }
  return 6;
}

}  // namespace

llm::Completion ScriptedModel::reply(std::string text, const std::vector<llm::Message>& messages) const {
  std::int64_t in = 0;
  for (const auto& m : messages) in += llm::count_words(m.text);
  std::int64_t out = llm::count_words(text);
  return {std::move(text), in, out};
}

std::string ScriptedModel::modify(const std::vector<llm::Message>& messages) {
  const std::string& user = messages.at(1).text;
  std::string key = llm::fingerprint({messages[0], messages[1]});
  auto known = std::find(dialogue_keys_.begin(), dialogue_keys_.end(), key);
  int number = 0;
  if (known == dialogue_keys_.end()) {
    dialogue_keys_.push_back(key);
    number = ++dialogues_;
  } else {
    number = static_cast<int>(known - dialogue_keys_.begin()) + 1;
  }
  int retries = 0;
  for (const auto& m : messages) retries += m.role == llm::Role::kAssistant;

  Block base = dsl::parse_block(util::trim(between(user, "###block###\n", "\n###inspiration###")));
  std::string idea = lower(between(user, "###inspiration###\n", "\n###Design Experience###"));

  Block out = base;
  if (number == options_.hopeless_dialogue || idea.find("roialign") != std::string::npos) {
    out = insert_before_output(base, {"ROIAlign(7)"});
  } else if (idea.find("excitation") != std::string::npos) {
    out = squeeze_excite(base);
  } else if (idea.find("dilat") != std::string::npos) {
    out = insert_before_output(base, {"Conv2d(out_channels=dim, kernel_size=3, dilation=2)", "BN"});
  } else if (idea.find("region") != std::string::npos) {
    out = retries == 0 ? insert_before_output(base, {"ROIAlign(7)"})
                       : insert_before_output(base, {"Conv2d(out_channels=dim, kernel_size=1)", "BN"});
  } else if (idea.find("depthwise") != std::string::npos) {
    out = insert_before_output(base, {"Conv2d(out_channels=dim, kernel_size=3, groups=dim)", "BN"});
  } else if (idea.find("smooth") != std::string::npos) {
    out = swap_activation(base, "ReLU", "GELU");
  } else {
    out = insert_before_output(base, {"BN"});
  }
  return "Here is the modified block.\n```\n" + dsl::print_block(out) + "\n```\n";
}

llm::Completion ScriptedModel::operator()(const std::vector<llm::Message>& messages) {
  const std::string& user = messages.at(1).text;
  if (user.find("###Title###") != std::string::npos) {
    std::string abstract = lower(between(user, "###Abstract###\n", "\n###Output###"));
    bool yes = abstract.find("block") != std::string::npos || abstract.find("convolution") != std::string::npos;
    return reply(std::string("The work concerns ") + (yes ? "backbone blocks" : "another topic") +
                     ".\n##response## " + (yes ? "yes" : "no"),
                 messages);
  }
  if (user.find("The following is the content of the paper:") != std::string::npos) {
    std::string text;
    std::istringstream in(user);
    for (std::string line; std::getline(in, line);) {
      if (line.rfind("Idea: ", 0) == 0) {
        if (!text.empty()) text += ",\n";
        text += "<inspiration>" + line.substr(6) + "</inspiration>";
      }
    }
    return reply(text, messages);
  }
  if (user.find("###Candidate inspirations###") != std::string::npos) {
    std::string listing = between(user, "'inspiration index:inspiration'.\n", "\n###Output###");
    std::vector<std::pair<int, int>> ranked;  // (preference, index)
    std::istringstream in(listing);
    for (std::string line; std::getline(in, line);) {
      auto colon = line.find(':');
      if (colon == std::string::npos) continue;
      ranked.emplace_back(preference(line.substr(colon + 1)), std::stoi(line.substr(0, colon)));
    }
    std::sort(ranked.begin(), ranked.end());
    std::string order;
    for (const auto& [p, i] : ranked) order += (order.empty() ? "" : ",") + std::to_string(i);
    return reply("<response>" + order + "</response>", messages);
  }
  if (user.find("###inspiration###") != std::string::npos) return reply(modify(messages), messages);
  if (user.find("###Cell###") != std::string::npos) return reply(kCompanionReply, messages);
  if (user.find("Error reason:") != std::string::npos) {
    return reply("<tip>Only use operations from the catalog and check each tensor shape against the next "
                 "operation.</tip>",
                 messages);
  }
  if (user.find("Their is the raw model") != std::string::npos) {
    return reply("<suggestion>Keep the original residual path intact and place new operations on a branch so the "
                 "input signal still reaches the output.</suggestion>",
                 messages);
  }
  return reply("I cannot help with that.", messages);
}

}  // namespace nadkit::testing
