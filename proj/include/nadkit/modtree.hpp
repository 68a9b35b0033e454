// Copyright 2026 The nadkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// The modification tree: the root is the base architecture, every edge is
// an applied suggestion. Also candidate selection for the proposer.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nadkit/archdsl.hpp"

namespace nadkit::tree {

enum class Status { kTrained, kFailedTraining, kPending };

std::string_view status_name(Status s) noexcept;
Status status_from_name(std::string_view name);

struct ArchSet {
  dsl::Block cell;
  std::optional<dsl::Block> stem;
  std::optional<dsl::Block> downsample;
};

struct TreeNode {
  std::string id;
  std::uint64_t seq = 0;  // creation order, used for "older" ties
  ArchSet arch;
  std::string digest;  // canonical hash of the cell
  std::optional<double> accuracy;       // validation accuracy
  std::optional<double> accuracy_test;  // reported, never used for selection
  std::optional<std::string> parent;
  std::optional<std::string> suggestion;
  Status status = Status::kPending;
};

struct SelectionPolicy {
  int bfs_period = 4;    // k
  int max_children = 3;  // m
};

struct AddOutcome {
  std::string id;
  bool duplicate = false;
};

class ModTree {
 public:
  /// Tree holding only the base architecture. A root accuracy marks it
  /// trained; without one it is pending.
  explicit ModTree(ArchSet root, std::optional<double> accuracy = std::nullopt,
                   std::optional<double> accuracy_test = std::nullopt);

  const std::string& root_id() const noexcept { return root_; }
  const std::map<std::string, TreeNode>& nodes() const noexcept { return nodes_; }
  const TreeNode& node(const std::string& id) const;
  bool contains(const std::string& id) const noexcept { return nodes_.contains(id); }
  const std::vector<std::string>& children(const std::string& id) const;
  std::size_t size() const noexcept { return nodes_.size(); }
  int depth(const std::string& id) const;

  /// Id of a non-failed node whose cell has this digest.
  std::optional<std::string> find_digest(std::string_view digest) const;

  /// Appends a child of `parent`. With an accuracy the node is trained;
  /// `failed` marks it failed-training; otherwise pending. When the cell is
  /// isomorphic to a non-failed node, nothing is added and that node's id is
  /// returned with duplicate=true. Throws UnknownParent.
  AddOutcome add_result(const std::string& parent, std::string suggestion, ArchSet arch,
                        std::optional<double> accuracy, std::optional<double> accuracy_test = std::nullopt,
                        bool failed = false);

  /// Pending -> trained.
  void set_result(const std::string& id, double accuracy, std::optional<double> accuracy_test = std::nullopt);
  /// Pending -> failed-training.
  void mark_failed(const std::string& id);

  /// Throws NoTrainedNodes.
  std::string select_candidate(const SelectionPolicy& policy, std::int64_t iteration) const;
  /// Highest validation accuracy, earliest on ties. Throws NoTrainedNodes.
  std::string best() const;

  std::string to_json() const;
  static ModTree from_json(std::string_view text);
  std::string to_graphviz() const;

  friend bool operator==(const ModTree& a, const ModTree& b) { return a.to_json() == b.to_json(); }

 private:
  ModTree() = default;
  std::string next_id();

  std::map<std::string, TreeNode> nodes_;
  std::map<std::string, std::vector<std::string>> children_;
  std::string root_;
  std::uint64_t next_seq_ = 0;
};

}  // namespace nadkit::tree
