// Copyright 2026 The nadkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "nadkit/agents.hpp"
#include "support.hpp"

namespace nadkit {
namespace {

using agents::Proposal;
using check::Role;
using llm::Completion;
using llm::Message;

const char* kResnet =
    "##cell##\n0:input\n1:Conv2d(dim,3)\n2:BN\n3:ReLU\n4:Conv2d(dim,3)\n5:BN\n6:Add\n7:ReLU\n8:output\n"
    "0->1\n1->2\n2->3\n3->4\n4->5\n5->6\n0->6\n6->7\n7->8";

// The ROIAlign reply: node 8 uses an op outside the catalog.
const char* kRoiReply =
    "##cell##\n0:input\n1:Conv2d(dim,3)\n2:BN\n3:ReLU\n4:Conv2d(dim,3)\n5:BN\n6:Add\n7:ReLU\n8:ROIAlign(7)\n"
    "9:output\n0->1\n1->2\n2->3\n3->4\n4->5\n5->6\n0->6\n6->7\n7->8\n8->9";

const char* kFixedReply =
    "Sorry, here is the fixed block.\n```\n##cell##\n0:input\n1:Conv2d(dim,3)\n2:BN\n3:ReLU\n4:Conv2d(dim,3)\n"
    "5:BN\n6:Add\n7:ReLU\n8:BN\n9:output\n0->1\n1->2\n2->3\n3->4\n4->5\n5->6\n0->6\n6->7\n7->8\n8->9\n```";

struct Scripted {
  std::vector<std::string> replies;
  std::vector<std::vector<Message>> seen;
  llm::CallbackClient client{[this](const std::vector<Message>& m) {
    seen.push_back(m);
    return Completion{replies.at(seen.size() - 1), 0, 0};
  }};
};

TEST(Extract, PlainFencedAndMissing) {
  auto b = dsl::parse_block(kResnet);
  EXPECT_EQ(agents::extract_block(kResnet), b);
  EXPECT_EQ(agents::extract_block(std::string("Here you go:\n```text\n") + kResnet + "\n```\nDone."), b);
  EXPECT_THROW(agents::extract_block("I would add attention."), NoBlockFound);
  auto two = agents::extract_blocks(std::string(kResnet) + "\n\n##other##\n0:input\n1:output\n0->1");
  ASSERT_EQ(two.size(), 2u);
  EXPECT_EQ(two[1].name(), "other");
}

TEST(Extract, ParseErrorLineIsRelativeToReply) {
  try {
    agents::extract_block("intro line\n##c##\n0:input\n1:output\n0->7");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 5);
  }
}

TEST(Rank, SingleCandidateSkipsTheModel) {
  Scripted s;
  std::vector<std::pair<int, std::string>> cands = {{4, "only"}};
  auto r = agents::proposer_rank(dsl::parse_block(kResnet), cands, s.client);
  EXPECT_EQ(r.order, (std::vector<int>{4}));
  EXPECT_FALSE(r.llm_called);
  EXPECT_TRUE(s.seen.empty());
}

TEST(Rank, ParsesOrder) {
  Scripted s{{"<response>3,1,2</response>"}};
  std::vector<std::pair<int, std::string>> cands = {{1, "a"}, {2, "b"}, {3, "c"}};
  auto r = agents::proposer_rank(dsl::parse_block(kResnet), cands, s.client);
  EXPECT_EQ(r.order, (std::vector<int>{3, 1, 2}));
  EXPECT_FALSE(r.repaired());
  EXPECT_TRUE(r.llm_called);
}

TEST(Rank, RepairsOrder) {
  Scripted s{{"<response>3,9</response>"}};
  std::vector<std::pair<int, std::string>> cands = {{1, "a"}, {2, "b"}, {3, "c"}};
  auto r = agents::proposer_rank(dsl::parse_block(kResnet), cands, s.client);
  EXPECT_EQ(r.order, (std::vector<int>{3, 1, 2}));
  EXPECT_EQ(r.dropped, (std::vector<int>{9}));
  EXPECT_EQ(r.appended, (std::vector<int>{1, 2}));
  EXPECT_TRUE(r.repaired());
}

TEST(Rank, MalformedTwice) {
  Scripted s{{"no tags", "still none"}};
  std::vector<std::pair<int, std::string>> cands = {{1, "a"}, {2, "b"}};
  EXPECT_THROW(agents::proposer_rank(dsl::parse_block(kResnet), cands, s.client), MalformedResponse);
  EXPECT_EQ(s.seen.size(), 2u);
}

TEST(Modifier, RepairInTwoTurns) {
  Scripted s{{kRoiReply, kFixedReply}};
  Proposal p{"n0", "Use region-aware pooling before the output", "k3"};
  auto r = agents::modifier_dialogue(p, dsl::parse_block(kResnet), {}, Role::kCell, 3, s.client);
  ASSERT_TRUE(r.success);
  EXPECT_EQ(r.dialogue.turns_used, 2);
  ASSERT_EQ(r.attempts.size(), 2u);
  EXPECT_FALSE(r.attempts[0].valid);
  EXPECT_EQ(r.attempts[0].feedback,
            R"({"status":"error","context":"node 8 error: Undefined computation ROIAlign is used"})");
  EXPECT_TRUE(r.attempts[1].valid);
  // The second request carries the feedback.
  ASSERT_EQ(s.seen.size(), 2u);
  EXPECT_NE(s.seen[1].back().text.find("Undefined computation ROIAlign is used"), std::string::npos);
  EXPECT_EQ(r.block->node(8).op, "BN");
}

TEST(Modifier, FirstReplyValid) {
  Scripted s{{kFixedReply}};
  Proposal p{"n0", "pool", "expert"};
  auto r = agents::modifier_dialogue(p, dsl::parse_block(kResnet), {}, Role::kCell, 3, s.client);
  ASSERT_TRUE(r.success);
  EXPECT_EQ(r.dialogue.turns_used, 1);
  EXPECT_EQ(r.dialogue.messages.size(), 3u);
  EXPECT_EQ(r.dialogue.messages.back().role, llm::Role::kAssistant);
}

TEST(Modifier, ExhaustsRetries) {
  Scripted s{{kRoiReply, "no block at all", kRoiReply}};
  Proposal p{"n0", "roi", "expert"};
  auto r = agents::modifier_dialogue(p, dsl::parse_block(kResnet), {}, Role::kCell, 3, s.client);
  EXPECT_FALSE(r.success);
  EXPECT_FALSE(r.block.has_value());
  EXPECT_EQ(r.dialogue.turns_used, 3);
  EXPECT_EQ(r.attempts.size(), 3u);
  EXPECT_TRUE(r.attempts[1].block.empty());
}

TEST(Modifier, ExperiencesReachThePrompt) {
  Scripted s{{kFixedReply}};
  knowledge::ExperienceRecord tip;
  tip.category = knowledge::Category::kFailureToSuccess;
  tip.kind = "tip";
  tip.advice = "Check groups divisibility first.";
  knowledge::ExperienceRecord sugg;
  sugg.category = knowledge::Category::kFailure;
  sugg.kind = "suggestion";
  sugg.advice = "Keep the residual path.";
  std::vector<knowledge::ExperienceRecord> exps = {tip, sugg};
  agents::modifier_dialogue({"n0", "pool", "expert"}, dsl::parse_block(kResnet), exps, Role::kCell, 3, s.client);
  std::string all;
  for (const auto& m : s.seen[0]) all += m.text;
  EXPECT_NE(all.find("Check groups divisibility first."), std::string::npos);
  EXPECT_NE(all.find("Keep the residual path."), std::string::npos);
  EXPECT_NE(all.find(agents::channel_constraint(Role::kCell)), std::string::npos);
}

const char* kStemSame = "##stem##\n0:input\n1:Conv2d(dim,3)\n2:output\n0->1\n1->2";
const char* kStemGood = "##stem##\n0:input\n1:Conv2d(dim,3,2)\n2:BN\n3:output\n0->1\n1->2\n2->3";
const char* kDownGood = "##downsample##\n0:input\n1:Conv2d(dim,3,2)\n2:BN\n3:output\n0->1\n1->2\n2->3";

TEST(Companion, BothValidFirstTurn) {
  Scripted s{{std::string(kStemGood) + "\n\n" + kDownGood}};
  auto r = agents::modifier_companion_blocks(dsl::parse_block(kResnet), {}, s.client, 3);
  ASSERT_TRUE(r.success);
  EXPECT_EQ(r.dialogue.turns_used, 1);
  // Stride 2, same padding: f(32) = floor((32 + 2 - 2 - 1)/2) + 1 = 16.
  auto report = check::infer_shapes(*r.stem, {1, 3, 16, 32, 32});
  ASSERT_TRUE(report.ok());
  EXPECT_EQ(report.inferred.at(r.stem->output_index()), (check::Shape{1, 16, 16, 16}));
}

TEST(Companion, StemWithoutDownsamplingIsRetried) {
  Scripted s{{std::string(kStemSame) + "\n" + kDownGood, std::string(kDownGood) + "\n" + kStemGood}};
  auto r = agents::modifier_companion_blocks(dsl::parse_block(kResnet), {}, s.client, 3);
  ASSERT_TRUE(r.success);
  EXPECT_EQ(r.dialogue.turns_used, 2);
  EXPECT_NE(r.attempts[0].feedback.find("stem must downsample"), std::string::npos) << r.attempts[0].feedback;
  EXPECT_EQ(r.stem->name(), "stem");
  EXPECT_EQ(r.downsample->name(), "downsample");
}

TEST(Companion, ScriptedModelIsValid) {
  testing::ScriptedModel model;
  llm::CallbackClient c([&](const std::vector<Message>& m) { return model(m); });
  auto r = agents::modifier_companion_blocks(dsl::parse_block(kResnet), {}, c, 3);
  EXPECT_TRUE(r.success);
}

}  // namespace
}  // namespace nadkit
