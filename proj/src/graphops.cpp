// Copyright 2026 The nadkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "nadkit/graphops.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <tuple>
#include <vector>

#include "util.hpp"

namespace nadkit::graph {

using dsl::Block;

std::string node_label(const dsl::OpInstance& inst) {
  auto args = inst.resolve();
  if (!args) return inst.op + "!" + inst.to_string();
  std::string out = inst.op + "(";
  bool first = true;
  for (const auto& [name, expr] : args->named) {
    if (!first) out += ',';
    first = false;
    out += name + "=" + dsl::normalize(expr).to_string();
  }
  for (const auto& expr : args->list) {
    if (!first) out += ',';
    first = false;
    out += dsl::normalize(expr).to_string();
  }
  return out + ")";
}

namespace {

// Dense view of a block: vertices 0..n-1 in index order.
struct Dense {
  std::vector<int> index;
  std::vector<std::string> label;
  std::vector<std::vector<int>> out;
  std::vector<std::vector<int>> in;
  std::vector<std::vector<char>> adj;

  explicit Dense(const Block& b) {
    if (b.size() > kMaxNodes) {
      throw SizeLimitExceeded("block has " + std::to_string(b.size()) + " nodes, limit is " +
                              std::to_string(kMaxNodes));
    }
    std::map<int, int> pos;
    for (const auto& [idx, inst] : b.nodes()) {
      pos[idx] = static_cast<int>(index.size());
      index.push_back(idx);
      label.push_back(node_label(inst));
    }
    std::size_t n = index.size();
    out.resize(n);
    in.resize(n);
    adj.assign(n, std::vector<char>(n, 0));
    for (const auto& e : b.edges()) {
      int s = pos.at(e.src);
      int d = pos.at(e.dst);
      out[s].push_back(d);
      in[d].push_back(s);
      adj[s][d] = 1;
    }
  }

  int size() const { return static_cast<int>(index.size()); }
};

// Ranks of `keys` (equal keys share a rank, ranks follow key order).
template <typename Key>
std::vector<int> ranks(const std::vector<Key>& keys) {
  std::vector<int> order(keys.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return keys[a] < keys[b]; });
  std::vector<int> r(keys.size());
  int rank = -1;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i == 0 || keys[order[i - 1]] < keys[order[i]]) ++rank;
    r[order[i]] = rank;
  }
  return r;
}

int count_colors(const std::vector<int>& c) {
  return c.empty() ? 0 : *std::max_element(c.begin(), c.end()) + 1;
}

// Color refinement on an ordered partition: a vertex's new color is the rank
// of (old color, sorted successor colors, sorted predecessor colors). The
// old color leads the key, so cells only split and keep their relative order.
std::vector<int> refine(const std::vector<std::vector<int>>& out, const std::vector<std::vector<int>>& in,
                        std::vector<int> color) {
  using Sig = std::tuple<int, std::vector<int>, std::vector<int>>;
  int k = count_colors(color);
  for (;;) {
    std::vector<Sig> sig(color.size());
    for (std::size_t v = 0; v < color.size(); ++v) {
      std::vector<int> succ;
      std::vector<int> pred;
      for (int w : out[v]) succ.push_back(color[w]);
      for (int w : in[v]) pred.push_back(color[w]);
      std::sort(succ.begin(), succ.end());
      std::sort(pred.begin(), pred.end());
      sig[v] = {color[v], std::move(succ), std::move(pred)};
    }
    auto next = ranks(sig);
    int k2 = count_colors(next);
    if (k2 == k) return next;
    color = std::move(next);
    k = k2;
  }
}

// ---------------------------------------------------------------------------
// Pairwise isomorphism

class Matcher {
 public:
  Matcher(const Dense& a, const Dense& b, std::vector<int> ca, std::vector<int> cb)
      : a_(a), b_(b), ca_(std::move(ca)), cb_(std::move(cb)) {
    int n = a.size();
    map_.assign(n, -1);
    used_.assign(n, 0);
    // Match the most constrained vertices first: many already-ordered
    // neighbours, then small color classes.
    std::vector<int> class_size(count_colors(ca_), 0);
    for (int c : ca_) ++class_size[c];
    std::vector<char> placed(n, 0);
    std::vector<int> links(n, 0);
    for (int step = 0; step < n; ++step) {
      int pick = -1;
      for (int v = 0; v < n; ++v) {
        if (placed[v]) continue;
        if (pick < 0 || links[v] > links[pick] ||
            (links[v] == links[pick] && class_size[ca_[v]] < class_size[ca_[pick]])) {
          pick = v;
        }
      }
      placed[pick] = 1;
      order_.push_back(pick);
      for (int w : a.out[pick]) ++links[w];
      for (int w : a.in[pick]) ++links[w];
    }
  }

  bool run() { return extend(0); }

 private:
  bool consistent(int u, int v) const {
    if (a_.adj[u][u] != b_.adj[v][v]) return false;
    for (int x = 0; x < a_.size(); ++x) {
      int y = map_[x];
      if (y < 0) continue;
      if (a_.adj[u][x] != b_.adj[v][y] || a_.adj[x][u] != b_.adj[y][v]) return false;
    }
    return true;
  }

  bool extend(std::size_t depth) {
    if (depth == order_.size()) return true;
    int u = order_[depth];
    for (int v = 0; v < b_.size(); ++v) {
      if (used_[v] || cb_[v] != ca_[u] || !consistent(u, v)) continue;
      map_[u] = v;
      used_[v] = 1;
      if (extend(depth + 1)) return true;
      map_[u] = -1;
      used_[v] = 0;
    }
    return false;
  }

  const Dense& a_;
  const Dense& b_;
  std::vector<int> ca_;
  std::vector<int> cb_;
  std::vector<int> order_;
  std::vector<int> map_;
  std::vector<char> used_;
};

// ---------------------------------------------------------------------------
// Canonical labeling by individualization-refinement

class Canonizer {
 public:
  explicit Canonizer(const Dense& g) : g_(g), label_rank_(ranks(g.label)) {}

  void run() {
    std::vector<int> prefix;
    search(label_rank_, prefix);
  }

  const std::vector<int>& best_colors() const { return best_colors_; }

 private:
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  std::vector<int> certificate(const std::vector<int>& pos) const {
    int n = g_.size();
    std::vector<int> at(n);
    for (int v = 0; v < n; ++v) at[pos[v]] = v;
    std::vector<int> cert;
    cert.reserve(n + 2 * n);
    for (int p = 0; p < n; ++p) cert.push_back(label_rank_[at[p]]);
    std::vector<std::pair<int, int>> edges;
    for (int v = 0; v < n; ++v) {
      for (int w : g_.out[v]) edges.emplace_back(pos[v], pos[w]);
    }
    std::sort(edges.begin(), edges.end());
    for (auto [s, d] : edges) {
      cert.push_back(s);
      cert.push_back(d);
    }
    return cert;
  }

  // gamma maps a vertex at position p in `pos` to the vertex at position p
  // in `ref`.
  std::vector<int> automorphism(const std::vector<int>& pos, const std::vector<int>& ref) const {
    int n = g_.size();
    std::vector<int> at(n);
    for (int v = 0; v < n; ++v) at[ref[v]] = v;
    std::vector<int> gamma(n);
    for (int v = 0; v < n; ++v) gamma[v] = at[pos[v]];
    return gamma;
  }

  std::size_t leaf(const std::vector<int>& pos, const std::vector<int>& prefix) {
    auto cert = certificate(pos);
    if (first_path_.empty() && first_colors_.empty()) {
      first_path_ = prefix;
      first_colors_ = pos;
      first_cert_ = cert;
      best_cert_ = cert;
      best_colors_ = pos;
      return kNone;
    }
    if (cert == first_cert_) {
      generators_.push_back(automorphism(pos, first_colors_));
      std::size_t common = 0;
      while (common < prefix.size() && common < first_path_.size() && prefix[common] == first_path_[common]) {
        ++common;
      }
      return common;
    }
    if (cert == best_cert_) {
      generators_.push_back(automorphism(pos, best_colors_));
    } else if (cert < best_cert_) {
      best_cert_ = std::move(cert);
      best_colors_ = pos;
    }
    return kNone;
  }

  // Union-find over the orbits of the generators that fix `prefix` pointwise.
  std::vector<int> orbits(const std::vector<int>& prefix) const {
    std::vector<int> parent(g_.size());
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (const auto& gamma : generators_) {
      bool fixes = std::all_of(prefix.begin(), prefix.end(), [&](int p) { return gamma[p] == p; });
      if (!fixes) continue;
      for (int v = 0; v < g_.size(); ++v) {
        int a = find(v);
        int b = find(gamma[v]);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }
    }
    for (int v = 0; v < g_.size(); ++v) parent[v] = find(v);
    return parent;
  }

  std::size_t search(const std::vector<int>& colors_in, std::vector<int>& prefix) {
    auto colors = refine(g_.out, g_.in, colors_in);
    int n = g_.size();
    int k = count_colors(colors);
    if (k == n) return leaf(colors, prefix);

    std::vector<int> size(k, 0);
    for (int c : colors) ++size[c];
    int target = 0;
    while (size[target] == 1) ++target;

    std::size_t depth = prefix.size();
    std::vector<int> explored;
    for (int v = 0; v < n; ++v) {
      if (colors[v] != target) continue;
      if (!explored.empty()) {
        auto orbit = orbits(prefix);
        bool seen = std::any_of(explored.begin(), explored.end(), [&](int e) { return orbit[e] == orbit[v]; });
        if (seen) continue;
      }
      std::vector<std::pair<int, int>> key(n);
      for (int u = 0; u < n; ++u) key[u] = {colors[u], u == v ? 0 : 1};
      prefix.push_back(v);
      std::size_t jump = search(ranks(key), prefix);
      prefix.pop_back();
      explored.push_back(v);
      if (jump != kNone && jump < depth) return jump;
    }
    return kNone;
  }

  const Dense& g_;
  std::vector<int> label_rank_;
  std::vector<int> first_path_;
  std::vector<int> first_colors_;
  std::vector<int> first_cert_;
  std::vector<int> best_cert_;
  std::vector<int> best_colors_;
  std::vector<std::vector<int>> generators_;
};

}  // namespace

bool is_isomorphic(const Block& a, const Block& b) {
  Dense da(a);
  Dense db(b);
  if (da.size() != db.size() || a.edges().size() != b.edges().size()) return false;
  int n = da.size();

  // Refine the disjoint union so colors are comparable across both blocks.
  std::vector<std::string> labels = da.label;
  labels.insert(labels.end(), db.label.begin(), db.label.end());
  std::vector<std::vector<int>> out(2 * n);
  std::vector<std::vector<int>> in(2 * n);
  for (int v = 0; v < n; ++v) {
    out[v] = da.out[v];
    in[v] = da.in[v];
    for (int w : db.out[v]) out[n + v].push_back(n + w);
    for (int w : db.in[v]) in[n + v].push_back(n + w);
  }
  auto color = refine(out, in, ranks(labels));
  std::vector<int> ca(color.begin(), color.begin() + n);
  std::vector<int> cb(color.begin() + n, color.end());
  auto sa = ca;
  auto sb = cb;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  if (sa != sb) return false;
  return Matcher(da, db, std::move(ca), std::move(cb)).run();
}

CanonicalForm canonical_hash(const Block& block) {
  Dense g(block);
  Canonizer canon(g);
  canon.run();
  const auto& pos = canon.best_colors();
  int n = g.size();

  std::vector<int> at(n);
  for (int v = 0; v < n; ++v) at[pos[v]] = v;
  std::string cert = std::string(kSchemaTag) + "\nnodes " + std::to_string(n) + "\n";
  for (int p = 0; p < n; ++p) cert += std::to_string(p) + ":" + g.label[at[p]] + "\n";
  std::vector<std::pair<int, int>> edges;
  for (int v = 0; v < n; ++v) {
    for (int w : g.out[v]) edges.emplace_back(pos[v], pos[w]);
  }
  std::sort(edges.begin(), edges.end());
  cert += "edges " + std::to_string(edges.size()) + "\n";
  for (auto [s, d] : edges) cert += std::to_string(s) + "->" + std::to_string(d) + "\n";

  CanonicalForm form;
  form.digest = util::sha256_hex(cert);
  for (int v = 0; v < n; ++v) form.relabel[g.index[v]] = pos[v];
  form.certificate = std::move(cert);
  return form;
}

}  // namespace nadkit::graph
