// Copyright 2026 The nadkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Proposer ranking and the modifier's bounded repair dialogues.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nadkit/archdsl.hpp"
#include "nadkit/history.hpp"
#include "nadkit/knowledge.hpp"
#include "nadkit/llm.hpp"
#include "nadkit/validator.hpp"

namespace nadkit::agents {

inline constexpr int kDefaultMaxRetry = 3;

struct Proposal {
  std::string candidate_id;
  std::string suggestion;
  std::string source = "expert";  // knowledge item id or "expert"
};

struct Dialogue {
  std::vector<llm::Message> messages;
  int turns_used = 0;
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;

  /// Sends the conversation, appends the reply and counts the turn.
  const std::string& step(llm::LLMClient& client);
};

/// First ##name## headed region of an LLM reply, with code fences and prose
/// around it removed. Throws NoBlockFound, or ParseError with a line number
/// relative to the reply.
dsl::Block extract_block(std::string_view reply);

/// Every headed region, in order.
std::vector<dsl::Block> extract_blocks(std::string_view reply);

struct RankResult {
  std::vector<int> order;
  std::vector<int> dropped;   // indexes in the reply that are not candidates
  std::vector<int> appended;  // candidates the reply left out
  bool llm_called = false;

  bool repaired() const noexcept { return !dropped.empty() || !appended.empty(); }
};

/// Ranks candidate inspirations for `block`. A single candidate is returned
/// without asking. Throws MalformedResponse after one reprompt.
RankResult proposer_rank(const dsl::Block& block, std::span<const std::pair<int, std::string>> candidates,
                         llm::LLMClient& llm);

struct ModifierResult {
  bool success = false;
  std::optional<dsl::Block> block;
  Dialogue dialogue;
  std::vector<history::Attempt> attempts;
};

/// The constraint line given to the modifier for a block role.
std::string_view channel_constraint(check::Role role) noexcept;

/// Asks for a modified block and feeds validator errors back until a reply
/// validates or max_retry replies have been rejected (success=false).
ModifierResult modifier_dialogue(const Proposal& proposal, const dsl::Block& base,
                                 std::span<const knowledge::ExperienceRecord> experiences, check::Role role,
                                 int max_retry, llm::LLMClient& llm, std::span<const dsl::VarBinding> bindings);

/// Overload using check::default_bindings(role).
ModifierResult modifier_dialogue(const Proposal& proposal, const dsl::Block& base,
                                 std::span<const knowledge::ExperienceRecord> experiences, check::Role role,
                                 int max_retry, llm::LLMClient& llm);

struct CompanionExample {
  dsl::Block cell;
  dsl::Block stem;
  dsl::Block downsample;
};

struct CompanionResult {
  bool success = false;
  std::optional<dsl::Block> stem;
  std::optional<dsl::Block> downsample;
  Dialogue dialogue;
  std::vector<history::Attempt> attempts;
};

/// One dialogue that asks for a stem and a downsample block matching `cell`.
/// Blocks are told apart by name ("stem", "down...") or else by order.
CompanionResult modifier_companion_blocks(const dsl::Block& cell, std::span<const CompanionExample> examples,
                                          llm::LLMClient& llm, int max_retry,
                                          std::span<const dsl::VarBinding> stem_bindings,
                                          std::span<const dsl::VarBinding> downsample_bindings);

CompanionResult modifier_companion_blocks(const dsl::Block& cell, std::span<const CompanionExample> examples,
                                          llm::LLMClient& llm, int max_retry);

}  // namespace nadkit::agents
