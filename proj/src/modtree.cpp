// Copyright 2026 The nadkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "nadkit/modtree.hpp"

#include <algorithm>
#include <cstdio>
#include <tuple>

#include <json.hpp>

#include "nadkit/graphops.hpp"

namespace nadkit::tree {

using nlohmann::ordered_json;

std::string_view status_name(Status s) noexcept {
  switch (s) {
    case Status::kTrained: return "trained";
    case Status::kFailedTraining: return "failed-training";
    case Status::kPending: return "pending";
  }
  return "pending";
}

Status status_from_name(std::string_view name) {
  if (name == "trained") return Status::kTrained;
  if (name == "failed-training") return Status::kFailedTraining;
  if (name == "pending") return Status::kPending;
  throw ConfigError("unknown node status '" + std::string(name) + "'");
}

namespace {

void check_accuracy(std::optional<double> acc) {
  if (acc && !(*acc >= 0.0 && *acc <= 1.0)) {
    throw Error("accuracy must lie in [0,1], got " + std::to_string(*acc));
  }
}

}  // namespace

ModTree::ModTree(ArchSet root, std::optional<double> accuracy, std::optional<double> accuracy_test) {
  check_accuracy(accuracy);
  TreeNode n;
  n.id = next_id();
  n.seq = next_seq_ - 1;
  n.digest = graph::canonical_hash(root.cell).digest;
  n.arch = std::move(root);
  n.accuracy = accuracy;
  n.accuracy_test = accuracy_test;
  n.status = accuracy ? Status::kTrained : Status::kPending;
  root_ = n.id;
  children_[n.id];
  nodes_.emplace(n.id, std::move(n));
}

std::string ModTree::next_id() { return "n" + std::to_string(next_seq_++); }

const TreeNode& ModTree::node(const std::string& id) const {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw UnknownParent("no tree node '" + id + "'");
  return it->second;
}

const std::vector<std::string>& ModTree::children(const std::string& id) const {
  auto it = children_.find(id);
  if (it == children_.end()) throw UnknownParent("no tree node '" + id + "'");
  return it->second;
}

int ModTree::depth(const std::string& id) const {
  int d = 0;
  for (const TreeNode* n = &node(id); n->parent; n = &node(*n->parent)) ++d;
  return d;
}

std::optional<std::string> ModTree::find_digest(std::string_view digest) const {
  const TreeNode* hit = nullptr;
  for (const auto& [id, n] : nodes_) {
    if (n.status == Status::kFailedTraining || n.digest != digest) continue;
    if (!hit || n.seq < hit->seq) hit = &n;
  }
  if (!hit) return std::nullopt;
  return hit->id;
}

AddOutcome ModTree::add_result(const std::string& parent, std::string suggestion, ArchSet arch,
                               std::optional<double> accuracy, std::optional<double> accuracy_test, bool failed) {
  if (!nodes_.contains(parent)) throw UnknownParent("no tree node '" + parent + "'");
  check_accuracy(accuracy);
  std::string digest = graph::canonical_hash(arch.cell).digest;
  if (auto dup = find_digest(digest)) return {*dup, true};

  TreeNode n;
  n.id = next_id();
  n.seq = next_seq_ - 1;
  n.arch = std::move(arch);
  n.digest = std::move(digest);
  n.parent = parent;
  n.suggestion = std::move(suggestion);
  if (failed) {
    n.status = Status::kFailedTraining;
  } else if (accuracy) {
    n.status = Status::kTrained;
    n.accuracy = accuracy;
    n.accuracy_test = accuracy_test;
  }
  children_[parent].push_back(n.id);
  children_[n.id];
  std::string id = n.id;
  nodes_.emplace(id, std::move(n));
  return {id, false};
}

void ModTree::set_result(const std::string& id, double accuracy, std::optional<double> accuracy_test) {
  check_accuracy(accuracy);
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw UnknownParent("no tree node '" + id + "'");
  auto& n = it->second;
  if (n.status != Status::kPending) throw Error("node " + id + " is not pending");
  n.status = Status::kTrained;
  n.accuracy = accuracy;
  n.accuracy_test = accuracy_test;
}

void ModTree::mark_failed(const std::string& id) {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw UnknownParent("no tree node '" + id + "'");
  auto& n = it->second;
  if (n.status != Status::kPending) throw Error("node " + id + " is not pending");
  n.status = Status::kFailedTraining;
}

std::string ModTree::select_candidate(const SelectionPolicy& policy, std::int64_t iteration) const {
  if (policy.bfs_period < 1 || policy.max_children < 1) throw ConfigError("selection policy needs k >= 1 and m >= 1");
  std::vector<const TreeNode*> trained;
  for (const auto& [id, n] : nodes_) {
    if (n.status == Status::kTrained) trained.push_back(&n);
  }
  if (trained.empty()) throw NoTrainedNodes();

  std::vector<const TreeNode*> open;
  for (const auto* n : trained) {
    if (children_.at(n->id).size() < static_cast<std::size_t>(policy.max_children)) open.push_back(n);
  }
  // Every trained node is full: fall back to all of them rather than stall.
  const auto& pool = open.empty() ? trained : open;

  if (iteration % policy.bfs_period == 0) {
    auto key = [&](const TreeNode* n) {
      return std::make_tuple(depth(n->id), children_.at(n->id).size(), -*n->accuracy, n->seq);
    };
    return (*std::min_element(pool.begin(), pool.end(), [&](auto* a, auto* b) { return key(a) < key(b); }))->id;
  }
  auto key = [&](const TreeNode* n) { return std::make_tuple(-*n->accuracy, -depth(n->id), n->seq); };
  return (*std::min_element(pool.begin(), pool.end(), [&](auto* a, auto* b) { return key(a) < key(b); }))->id;
}

std::string ModTree::best() const {
  const TreeNode* best = nullptr;
  for (const auto& [id, n] : nodes_) {
    if (n.status != Status::kTrained) continue;
    if (!best || *n.accuracy > *best->accuracy || (*n.accuracy == *best->accuracy && n.seq < best->seq)) best = &n;
  }
  if (!best) throw NoTrainedNodes();
  return best->id;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

constexpr int kSchemaVersion = 1;

template <typename T>
ordered_json opt(const std::optional<T>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

std::optional<double> opt_double(const ordered_json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<double>();
}

std::optional<dsl::Block> opt_block(const ordered_json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return dsl::parse_block(j[key].get<std::string>());
}

}  // namespace

std::string ModTree::to_json() const {
  std::vector<const TreeNode*> order;
  for (const auto& [id, n] : nodes_) order.push_back(&n);
  std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->seq < b->seq; });

  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["root"] = root_;
  j["next_seq"] = next_seq_;
  ordered_json nodes = ordered_json::array();
  for (const auto* n : order) {
    ordered_json e;
    e["id"] = n->id;
    e["seq"] = n->seq;
    e["parent"] = opt(n->parent);
    e["suggestion"] = opt(n->suggestion);
    e["status"] = status_name(n->status);
    e["accuracy"] = opt(n->accuracy);
    e["accuracy_test"] = opt(n->accuracy_test);
    e["digest"] = n->digest;
    e["cell"] = dsl::print_block(n->arch.cell);
    e["stem"] = n->arch.stem ? ordered_json(dsl::print_block(*n->arch.stem)) : ordered_json(nullptr);
    e["downsample"] =
        n->arch.downsample ? ordered_json(dsl::print_block(*n->arch.downsample)) : ordered_json(nullptr);
    nodes.push_back(std::move(e));
  }
  j["nodes"] = std::move(nodes);
  ordered_json children = ordered_json::object();
  for (const auto* n : order) children[n->id] = children_.at(n->id);
  j["children"] = std::move(children);
  return j.dump(2) + "\n";
}

ModTree ModTree::from_json(std::string_view text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("tree JSON: ") + e.what());
  }
  try {
    if (j.at("schema_version").get<int>() != kSchemaVersion) {
      throw ConfigError("unsupported tree schema_version " + j.at("schema_version").dump());
    }
    ModTree t;
    t.root_ = j.at("root").get<std::string>();
    t.next_seq_ = j.at("next_seq").get<std::uint64_t>();
    for (const auto& e : j.at("nodes")) {
      TreeNode n;
      n.id = e.at("id").get<std::string>();
      n.seq = e.at("seq").get<std::uint64_t>();
      if (!e.at("parent").is_null()) n.parent = e["parent"].get<std::string>();
      if (!e.at("suggestion").is_null()) n.suggestion = e["suggestion"].get<std::string>();
      n.status = status_from_name(e.at("status").get<std::string>());
      n.accuracy = opt_double(e, "accuracy");
      n.accuracy_test = opt_double(e, "accuracy_test");
      n.digest = e.at("digest").get<std::string>();
      n.arch.cell = dsl::parse_block(e.at("cell").get<std::string>());
      n.arch.stem = opt_block(e, "stem");
      n.arch.downsample = opt_block(e, "downsample");
      if ((n.status == Status::kTrained) != n.accuracy.has_value()) {
        throw ConfigError("tree node " + n.id + ": accuracy must be present exactly when trained");
      }
      t.nodes_.emplace(n.id, std::move(n));
    }
    for (const auto& [id, kids] : j.at("children").items()) {
      t.children_[id] = kids.get<std::vector<std::string>>();
    }
    if (!t.nodes_.contains(t.root_)) throw ConfigError("tree root " + t.root_ + " is not a node");
    for (const auto& [id, n] : t.nodes_) {
      if (!t.children_.contains(id)) throw ConfigError("tree node " + id + " has no children entry");
      if (n.parent) {
        const auto& sib = t.children_.at(*n.parent);
        if (std::find(sib.begin(), sib.end(), id) == sib.end()) {
          throw ConfigError("tree node " + id + " is missing from its parent's children");
        }
      }
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("tree JSON: ") + e.what());
  }
}

namespace {

std::string dot_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out;
}

std::string short_text(std::string_view s, std::size_t limit) {
  if (s.size() <= limit) return std::string(s);
  return std::string(s.substr(0, limit)) + "...";
}

}  // namespace

std::string ModTree::to_graphviz() const {
  std::vector<const TreeNode*> order;
  for (const auto& [id, n] : nodes_) order.push_back(&n);
  std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->seq < b->seq; });

  std::string out = "digraph modtree {\n  node [shape=box, fontname=\"Helvetica\"];\n";
  for (const auto* n : order) {
    std::string label = n->id;
    if (n->accuracy) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.2f", 100.0 * *n->accuracy);
      label += "\\nacc " + std::string(buf);
    } else {
      label += "\\n" + std::string(status_name(n->status));
    }
    out += "  \"" + n->id + "\" [label=\"" + label + "\"";
    if (n->status == Status::kFailedTraining) out += ", style=dashed";
    out += "];\n";
  }
  for (const auto* n : order) {
    if (!n->parent) continue;
    out += "  \"" + *n->parent + "\" -> \"" + n->id + "\" [label=\"" +
           dot_escape(short_text(n->suggestion.value_or(""), 40)) + "\"];\n";
  }
  return out + "}\n";
}

}  // namespace nadkit::tree
