// Copyright 2026 The nadkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "nadkit/graphops.hpp"
#include "nadkit/modtree.hpp"
#include "support.hpp"

namespace nadkit {
namespace {

using tree::ArchSet;
using tree::ModTree;
using tree::SelectionPolicy;

// Distinct cells: a chain of `n` ReLUs.
ArchSet chain(int n) {
  std::string text = "##c##\n0:input\n";
  for (int i = 1; i <= n; ++i) text += std::to_string(i) + ":ReLU\n";
  text += std::to_string(n + 1) + ":output\n";
  for (int i = 0; i <= n; ++i) text += std::to_string(i) + "->" + std::to_string(i + 1) + "\n";
  return {dsl::parse_block(text), std::nullopt, std::nullopt};
}

TEST(Tree, FirstChild) {
  ModTree t(chain(1), 0.70);
  auto out = t.add_result(t.root_id(), "add attention", chain(2), 0.7086);
  EXPECT_FALSE(out.duplicate);
  EXPECT_EQ(t.size(), 2u);
  EXPECT_EQ(t.node(out.id).parent, t.root_id());
  EXPECT_EQ(t.node(out.id).status, tree::Status::kTrained);
  EXPECT_EQ(*t.node(out.id).accuracy, 0.7086);
  EXPECT_EQ(t.depth(out.id), 1);
}

TEST(Tree, DuplicateReturnsExistingNode) {
  ModTree t(chain(1), 0.70);
  auto a = t.add_result(t.root_id(), "x", chain(3), 0.71);
  testing::Rng rng(1);
  ArchSet permuted{testing::shuffle_indices(chain(3).cell, rng), std::nullopt, std::nullopt};
  auto b = t.add_result(t.root_id(), "y", permuted, 0.99);
  EXPECT_TRUE(b.duplicate);
  EXPECT_EQ(b.id, a.id);
  EXPECT_EQ(t.size(), 2u);
  EXPECT_EQ(t.find_digest(graph::canonical_hash(chain(3).cell).digest), a.id);
}

TEST(Tree, FailedNodesDoNotBlockRetraining) {
  ModTree t(chain(1), 0.70);
  auto f = t.add_result(t.root_id(), "x", chain(2), std::nullopt, std::nullopt, true);
  EXPECT_EQ(t.node(f.id).status, tree::Status::kFailedTraining);
  EXPECT_FALSE(t.node(f.id).accuracy.has_value());
  auto again = t.add_result(t.root_id(), "x", chain(2), 0.72);
  EXPECT_FALSE(again.duplicate);
  EXPECT_EQ(t.size(), 3u);
}

TEST(Tree, UnknownParent) { EXPECT_THROW(ModTree(chain(1), 0.7).add_result("zzz", "s", chain(2), 0.7), UnknownParent); }

TEST(Tree, PendingLifecycle) {
  ModTree t(chain(1), 0.70);
  auto p = t.add_result(t.root_id(), "x", chain(2), std::nullopt);
  EXPECT_EQ(t.node(p.id).status, tree::Status::kPending);
  t.set_result(p.id, 0.75, 0.74);
  EXPECT_EQ(t.node(p.id).status, tree::Status::kTrained);
  EXPECT_EQ(*t.node(p.id).accuracy_test, 0.74);
  auto q = t.add_result(t.root_id(), "y", chain(3), std::nullopt);
  t.mark_failed(q.id);
  EXPECT_EQ(t.node(q.id).status, tree::Status::kFailedTraining);
}

TEST(Select, RootOnly) {
  ModTree t(chain(1), 0.70);
  for (int it = 0; it < 9; ++it) EXPECT_EQ(t.select_candidate({}, it), t.root_id());
  EXPECT_EQ(t.best(), t.root_id());
}

TEST(Select, NoTrained) {
  ModTree t(chain(1));
  EXPECT_THROW(t.select_candidate({}, 1), NoTrainedNodes);
  EXPECT_THROW(t.best(), NoTrainedNodes);
}

TEST(Select, ChainExample) {
  // root(0.70) -> A(0.74) -> B(0.72), m=3, k=4.
  ModTree t(chain(1), 0.70);
  auto A = t.add_result(t.root_id(), "a", chain(2), 0.74).id;
  auto B = t.add_result(A, "b", chain(3), 0.72).id;
  SelectionPolicy pol{4, 3};
  EXPECT_EQ(t.select_candidate(pol, 1), A);
  EXPECT_EQ(t.select_candidate(pol, 2), A);
  // BFS step: depth 0 has only the root.
  EXPECT_EQ(t.select_candidate(pol, 4), t.root_id());
  EXPECT_EQ(t.best(), A);
  (void)B;
}

TEST(Select, DfsSkipsFullNodes) {
  ModTree t(chain(1), 0.80);
  for (int i = 0; i < 3; ++i) t.add_result(t.root_id(), "s", chain(2 + i), 0.60 + 0.01 * i);
  SelectionPolicy pol{4, 3};
  // Root is full (3 children); best remaining is 0.62.
  std::string expect;
  for (const auto& [id, n] : t.nodes()) {
    if (n.accuracy && *n.accuracy == 0.60 + 0.01 * 2) expect = id;
  }
  EXPECT_EQ(t.select_candidate(pol, 1), expect);
}

TEST(Select, DfsTieGoesDeeper) {
  ModTree t(chain(1), 0.70);
  auto A = t.add_result(t.root_id(), "a", chain(2), 0.74).id;
  auto B = t.add_result(A, "b", chain(3), 0.74).id;
  EXPECT_EQ(t.select_candidate({4, 3}, 1), B);
  // best() breaks ties toward the older node.
  EXPECT_EQ(t.best(), A);
}

TEST(Select, BfsFewestChildren) {
  ModTree t(chain(1), 0.70);
  auto A = t.add_result(t.root_id(), "a", chain(2), 0.60).id;
  auto B = t.add_result(t.root_id(), "b", chain(3), 0.65).id;
  auto C = t.add_result(t.root_id(), "c", chain(4), 0.55).id;
  t.add_result(B, "d", chain(5), 0.50);
  SelectionPolicy pol{2, 3};
  // Root is full; depth 1 has A and C with no children, A is more accurate.
  EXPECT_EQ(t.select_candidate(pol, 2), A);
  t.add_result(A, "e", chain(6), 0.40);
  EXPECT_EQ(t.select_candidate(pol, 4), C);
  // DFS step: most accurate open node.
  EXPECT_EQ(t.select_candidate(pol, 3), B);
}

TEST(Json, RoundTrip) {
  ModTree t(chain(1), 0.70, 0.69);
  auto A = t.add_result(t.root_id(), "a \"quoted\"\nline", chain(2), 0.74).id;
  t.add_result(A, "b", chain(3), std::nullopt, std::nullopt, true);
  t.add_result(A, "c", chain(4), std::nullopt);
  ModTree back = ModTree::from_json(t.to_json());
  EXPECT_EQ(back, t);
  EXPECT_EQ(back.to_json(), t.to_json());
  EXPECT_EQ(back.children(A).size(), 2u);
  auto next = back.add_result(A, "d", chain(5), 0.5).id;
  EXPECT_FALSE(t.contains(next));
  auto dot = t.to_graphviz();
  EXPECT_EQ(dot.rfind("digraph", 0), 0u);
  EXPECT_NE(dot.find(A), std::string::npos);
}

}  // namespace
}  // namespace nadkit
