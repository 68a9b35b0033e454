// Copyright 2026 The nadkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "nadkit/validator.hpp"
#include "support.hpp"

namespace nadkit {
namespace {

using check::FindingKind;
using check::Role;
using dsl::parse_block;

struct Case {
  std::string file;
  Role role;
  FindingKind kind;
  std::vector<int> nodes;
};

std::vector<Case> manifest() {
  std::ifstream in(testing::data_dir() / "validator" / "manifest.tsv");
  std::vector<Case> out;
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    std::string file, role, kind, nodes;
    row >> file >> role >> kind >> nodes;
    Case c{file, *check::role_from_name(role), *check::finding_kind_from_name(kind), {}};
    std::istringstream ns(nodes);
    for (std::string n; std::getline(ns, n, ',');) c.nodes.push_back(std::stoi(n));
    out.push_back(c);
  }
  return out;
}

dsl::VarBinding cell_binding(std::int64_t B, std::int64_t C, std::int64_t H) {
  return {B, C, C, H, H};
}

TEST(Corpus, EveryCaseHasExactlyTheExpectedFinding) {
  auto cases = manifest();
  ASSERT_GE(cases.size(), 30u);
  std::set<FindingKind> kinds;
  for (const auto& c : cases) {
    auto block = testing::read_block(testing::data_dir() / "validator" / (c.file + ".block"));
    auto report = check::validate(block, c.role);
    ASSERT_FALSE(report.ok()) << c.file;
    std::vector<int> nodes;
    for (const auto& f : report.findings) {
      EXPECT_EQ(f.kind, c.kind) << c.file << ": " << f.message;
      nodes.push_back(f.node);
      EXPECT_EQ(f.message.rfind("node " + std::to_string(f.node) + " error: ", 0), 0u) << f.message;
    }
    EXPECT_EQ(nodes, c.nodes) << c.file << ": " << report.context();
    kinds.insert(c.kind);
  }
  for (auto k : {FindingKind::kUndefinedOp, FindingKind::kCycle, FindingKind::kDeadNode, FindingKind::kOutputArity,
                 FindingKind::kBroadcastMismatch, FindingKind::kGroupsDivisibility, FindingKind::kReshapeCount,
                 FindingKind::kPermuteRank, FindingKind::kConcatMismatch, FindingKind::kStemFactor,
                 FindingKind::kCellChannels}) {
    EXPECT_TRUE(kinds.contains(k)) << check::finding_kind_name(k);
  }
}

TEST(Corpus, RoiAlignVerbatim) {
  auto block = testing::read_block(testing::data_dir() / "validator" / "undefined_roialign.block");
  auto report = check::validate(block, Role::kCell);
  EXPECT_EQ(report.context(), "node 8 error: Undefined computation ROIAlign is used");
  EXPECT_EQ(report.feedback_json(),
            R"({"status":"error","context":"node 8 error: Undefined computation ROIAlign is used"})");
}

TEST(Structure, Identity) {
  auto report = check::validate(parse_block("##id##\n0:input\n1:output\n0->1"), Role::kCell);
  EXPECT_TRUE(report.ok());
  EXPECT_EQ(report.feedback_json(), R"({"status":"success"})");
}

TEST(Structure, CycleNamesItsNodes) {
  auto b = parse_block("##c##\n0:input\n1:Add\n2:ReLU\n3:ReLU\n4:output\n0->1\n1->2\n2->3\n3->1\n3->4");
  auto report = check::check_structure(b);
  bool found = false;
  for (const auto& f : report.findings) {
    if (f.kind == FindingKind::kCycle) {
      found = true;
      EXPECT_NE(f.message.find("1->2->3->1"), std::string::npos) << f.message;
    }
  }
  EXPECT_TRUE(found) << report.context();
}

TEST(Structure, ReportsAllStructuralFindings) {
  auto b = parse_block("##m##\n0:input\n1:Foo\n2:ReLU\n3:Add\n4:output\n0->1\n1->4\n0->3\n3->4\n");
  auto report = check::check_structure(b);
  std::set<FindingKind> kinds;
  for (const auto& f : report.findings) kinds.insert(f.kind);
  EXPECT_TRUE(kinds.contains(FindingKind::kUndefinedOp));
  EXPECT_TRUE(kinds.contains(FindingKind::kDeadNode));
  EXPECT_TRUE(kinds.contains(FindingKind::kOutputArity));
  EXPECT_TRUE(kinds.contains(FindingKind::kOpArity));
}

TEST(Shapes, AddOfEqualShapes) {
  auto b = parse_block("##a##\n0:input\n1:ReLU\n2:Add\n3:output\n0->1\n1->2\n0->2\n2->3");
  auto report = check::infer_shapes(b, cell_binding(2, 16, 32));
  ASSERT_TRUE(report.ok()) << report.context();
  EXPECT_EQ(report.inferred.at(2), (check::Shape{2, 16, 32, 32}));
}

TEST(Shapes, MeanKeepsReducedDim) {
  auto b = parse_block("##m##\n0:input\n1:reshape(B,C,H*W)\n2:permute(0,2,1)\n3:mean(dim=1)\n4:output\n"
                       "0->1\n1->2\n2->3\n3->4");
  auto report = check::infer_shapes(b, cell_binding(2, 16, 8));
  ASSERT_TRUE(report.ok()) << report.context();
  EXPECT_EQ(report.inferred.at(2), (check::Shape{2, 64, 16}));
  EXPECT_EQ(report.inferred.at(3), (check::Shape{2, 1, 16}));
}

TEST(Shapes, GroupsDivisibility) {
  auto b = parse_block("##g##\n0:input\n1:Conv2d(out_channels=15,kernel_size=3,groups=4)\n2:output\n0->1\n1->2");
  auto report = check::infer_shapes(b, cell_binding(2, 16, 32));
  ASSERT_FALSE(report.ok());
  EXPECT_EQ(report.findings.front().node, 1);
  EXPECT_EQ(report.findings.front().kind, FindingKind::kGroupsDivisibility);
}

TEST(Shapes, PoolBranchMismatch) {
  // f(32) = floor((32 - 2 - 1) / 1) + 1 = 30 for MaxPool2d(3,1) with no padding.
  auto b = parse_block("##p##\n0:input\n1:MaxPool2d(3,1)\n2:ReLU\n3:Add\n4:output\n0->1\n0->2\n1->3\n2->3\n3->4");
  auto report = check::infer_shapes(b, cell_binding(2, 16, 32));
  ASSERT_FALSE(report.ok());
  EXPECT_EQ(report.inferred.at(1), (check::Shape{2, 16, 30, 30}));
  EXPECT_EQ(report.findings.front().node, 3);
  EXPECT_EQ(report.findings.front().kind, FindingKind::kBroadcastMismatch);
}

TEST(Shapes, ConvSamePadding) {
  // p = floor(d(k-1)/2); f(x) = floor((x + 2p - d(k-1) - 1)/s) + 1.
  struct K {
    int k, s, d;
  };
  for (K c : {K{3, 1, 1}, K{5, 2, 1}, K{3, 2, 2}, K{1, 1, 1}, K{4, 1, 1}, K{7, 3, 2}}) {
    int p = c.d * (c.k - 1) / 2;
    int expect = (32 + 2 * p - c.d * (c.k - 1) - 1) / c.s + 1;
    auto b = parse_block("##c##\n0:input\n1:Conv2d(out_channels=8,kernel_size=" + std::to_string(c.k) +
                         ",stride=" + std::to_string(c.s) + ",dilation=" + std::to_string(c.d) +
                         ")\n2:output\n0->1\n1->2");
    auto report = check::infer_shapes(b, cell_binding(1, 16, 32));
    ASSERT_TRUE(report.inferred.contains(1)) << report.context();
    EXPECT_EQ(report.inferred.at(1), (check::Shape{1, 8, expect, expect}));
  }
}

TEST(Validate, ResnetUnderTwoBindings) {
  auto b = testing::read_block(testing::data_dir() / "arch" / "resnet_cell.block");
  std::vector<dsl::VarBinding> bindings = {cell_binding(2, 16, 32), cell_binding(3, 24, 16)};
  EXPECT_TRUE(check::validate(b, Role::kCell, bindings).ok());
  EXPECT_TRUE(check::validate(b, Role::kCell).ok());
}

TEST(Validate, ShapeErrorsNameTheBinding) {
  auto b = testing::read_block(testing::data_dir() / "validator" / "cell_double_channels.block");
  auto report = check::validate(b, Role::kCell);
  ASSERT_FALSE(report.ok());
  EXPECT_NE(report.context().find("(under B="), std::string::npos) << report.context();
}

TEST(Validate, StemMustDownsample) {
  auto b = parse_block("##stem##\n0:input\n1:Conv2d(dim,3)\n2:output\n0->1\n1->2");
  auto report = check::validate(b, Role::kStem);
  ASSERT_FALSE(report.ok());
  EXPECT_EQ(report.findings.front().kind, FindingKind::kStemFactor);
  EXPECT_NE(report.context().find("stem must downsample by at least 2x"), std::string::npos);
  EXPECT_TRUE(check::validate(testing::read_block(testing::data_dir() / "arch" / "stem.block"), Role::kStem).ok());
  EXPECT_TRUE(check::validate(testing::read_block(testing::data_dir() / "arch" / "downsample.block"),
                              Role::kDownsample)
                  .ok());
}

TEST(Validate, CellDoubleChannelsFailsAtOutput) {
  auto b = parse_block("##c##\n0:input\n1:Conv2d(2*C,1)\n2:output\n0->1\n1->2");
  auto report = check::validate(b, Role::kCell);
  ASSERT_FALSE(report.ok());
  EXPECT_EQ(report.findings.front().node, 2);
}

TEST(Validate, DefaultBindings) {
  auto cell = check::default_bindings(Role::kCell);
  ASSERT_EQ(cell.size(), 2u);
  EXPECT_NE(cell[0].C, cell[1].C);
  EXPECT_NE(cell[0].H, cell[1].H);
  for (const auto& b : cell) EXPECT_EQ(b.dim, b.C);
  for (const auto& b : check::default_bindings(Role::kStem)) EXPECT_EQ(b.C, 3);
  for (const auto& b : check::default_bindings(Role::kDownsample)) EXPECT_EQ(b.dim, 2 * b.C);
}

TEST(Property, RandomValidCellsValidate) {
  testing::Rng rng(31);
  for (int i = 0; i < 200; ++i) {
    auto b = testing::random_valid_cell(rng, 1 + i % 8);
    auto report = check::validate(b, Role::kCell);
    EXPECT_TRUE(report.ok()) << dsl::print_block(b) << "\n" << report.context();
  }
}

TEST(Property, RandomBlocksNeverThrow) {
  testing::Rng rng(32);
  for (int i = 0; i < 1000; ++i) {
    auto b = testing::random_block(rng, 10);
    auto report = check::validate(b, Role::kCell);
    EXPECT_EQ(report.ok(), report.findings.empty());
    if (!report.ok()) EXPECT_EQ(report.feedback_json().rfind(R"({"status":"error")", 0), 0u);
  }
}

}  // namespace
}  // namespace nadkit
