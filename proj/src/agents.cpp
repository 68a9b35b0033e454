// Copyright 2026 The nadkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "nadkit/agents.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>

#include <json.hpp>

#include "nadkit/prompts.hpp"
#include "protocol.hpp"
#include "util.hpp"

namespace nadkit::agents {

using prompts::TemplateId;

const std::string& Dialogue::step(llm::LLMClient& client) {
  llm::Completion c = client.chat(messages);
  input_tokens += c.input_tokens;
  output_tokens += c.output_tokens;
  ++turns_used;
  messages.push_back({llm::Role::kAssistant, std::move(c.text)});
  return messages.back().text;
}

// ---------------------------------------------------------------------------
// Block extraction

namespace {

bool is_header(std::string_view line) {
  std::string t = util::trim(line);
  return t.size() > 4 && t.starts_with("##") && t.ends_with("##") && t.find('#', 2) == t.size() - 2;
}

bool is_fence(std::string_view line) { return util::trim(line).starts_with("```"); }

// A line that can belong to a block body.
bool is_dsl_line(std::string_view line) {
  std::string t = util::trim(line);
  if (t.empty() || t.starts_with("#") || t.starts_with("//")) return true;
  if (t.find("->") != std::string::npos) return true;
  std::size_t i = 0;
  while (i < t.size() && std::isdigit(static_cast<unsigned char>(t[i]))) ++i;
  while (i < t.size() && (t[i] == ' ' || t[i] == '\t')) ++i;
  return i > 0 && i < t.size() && t[i] == ':';
}

struct Region {
  int first_line;  // 0-based line of the header within the reply
  std::string text;
};

std::vector<Region> regions(std::string_view reply) {
  auto lines = util::split_lines(reply);
  std::vector<Region> out;
  std::size_t i = 0;
  while (i < lines.size()) {
    if (!is_header(lines[i])) {
      ++i;
      continue;
    }
    Region r{static_cast<int>(i), lines[i]};
    std::size_t j = i + 1;
    for (; j < lines.size(); ++j) {
      if (is_header(lines[j]) || is_fence(lines[j]) || !is_dsl_line(lines[j])) break;
      r.text += "\n" + lines[j];
    }
    out.push_back(std::move(r));
    i = j;
  }
  return out;
}

dsl::Block parse_region(const Region& r) {
  try {
    return dsl::parse_block(r.text);
  } catch (const ParseError& e) {
    throw ParseError(e.line() + r.first_line, e.reason());
  }
}

}  // namespace

dsl::Block extract_block(std::string_view reply) {
  auto rs = regions(reply);
  if (rs.empty()) throw NoBlockFound();
  return parse_region(rs.front());
}

std::vector<dsl::Block> extract_blocks(std::string_view reply) {
  std::vector<dsl::Block> out;
  for (const auto& r : regions(reply)) out.push_back(parse_region(r));
  return out;
}

// ---------------------------------------------------------------------------
// Proposer

RankResult proposer_rank(const dsl::Block& block, std::span<const std::pair<int, std::string>> candidates,
                         llm::LLMClient& llm) {
  if (candidates.empty()) throw Error("proposer_rank needs at least one candidate");
  RankResult result;
  if (candidates.size() == 1) {
    result.order = {candidates.front().first};
    return result;
  }
  std::string listing;
  for (const auto& [idx, text] : candidates) listing += std::to_string(idx) + ":" + text + "\n";
  if (!listing.empty()) listing.pop_back();
  auto msgs = prompts::render(TemplateId::kProposerRank, {{"block", dsl::print_block(block)}, {"candidates", listing}});

  auto parsed = protocol::ask<std::vector<int>>(
      llm, TemplateId::kProposerRank, std::move(msgs), [](std::string_view reply) -> std::optional<std::vector<int>> {
        auto spans = protocol::tagged_spans(reply, "response");
        if (spans.empty()) return std::nullopt;
        std::vector<int> out;
        std::string_view s = spans.front();
        std::size_t pos = 0;
        while (pos <= s.size()) {
          auto comma = s.find(',', pos);
          std::string tok = util::trim(s.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
          int v = 0;
          auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
          if (ec == std::errc() && p == tok.data() + tok.size() && !tok.empty()) out.push_back(v);
          if (comma == std::string_view::npos) break;
          pos = comma + 1;
        }
        if (out.empty()) return std::nullopt;
        return out;
      });
  result.llm_called = true;

  std::set<int> known;
  for (const auto& c : candidates) known.insert(c.first);
  std::set<int> placed;
  for (int idx : parsed) {
    if (!known.contains(idx) || placed.contains(idx)) {
      result.dropped.push_back(idx);
      continue;
    }
    result.order.push_back(idx);
    placed.insert(idx);
  }
  for (const auto& c : candidates) {
    if (placed.contains(c.first)) continue;
    result.order.push_back(c.first);
    result.appended.push_back(c.first);
    placed.insert(c.first);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Modifier

std::string_view channel_constraint(check::Role role) noexcept {
  switch (role) {
    case check::Role::kCell:
      return "Please ensure that the number of input channels and output channels of the generated block are both C.";
    case check::Role::kStem:
      return "Please ensure that the generated block maps the input (B,C,H,W) to dim output channels and downsamples "
             "the spatial size by at least 2x.";
    case check::Role::kDownsample:
      return "Please ensure that the generated block maps the input (B,C,H,W) to (B,dim,H/2,W/2).";
  }
  return "";
}

namespace {

std::string numbered(std::span<const knowledge::ExperienceRecord> records, std::string_view kind) {
  std::string out;
  int n = 0;
  for (const auto& r : records) {
    if (r.kind != kind) continue;
    if (!out.empty()) out += '\n';
    out += std::to_string(++n) + ". " + r.advice;
  }
  return out.empty() ? "None." : out;
}

std::string error_json(const std::string& context) {
  nlohmann::ordered_json j;
  j["status"] = "error";
  j["context"] = context;
  return j.dump();
}

// Extracts and validates one reply. Returns the block on success and fills
// the attempt record either way.
std::optional<dsl::Block> judge(std::string_view reply, check::Role role, std::span<const dsl::VarBinding> bindings,
                                history::Attempt& attempt) {
  try {
    dsl::Block b = extract_block(reply);
    attempt.block = dsl::print_block(b);
    auto report = check::validate(b, role, bindings);
    attempt.feedback = report.feedback_json();
    attempt.valid = report.ok();
    if (report.ok()) return b;
  } catch (const NoBlockFound&) {
    attempt.feedback = error_json("no block found, the reply must contain a block that starts with ##block_name##");
  } catch (const ParseError& e) {
    attempt.feedback = error_json(e.what());
    attempt.block = util::trim(reply);
  } catch (const Error& e) {
    attempt.feedback = error_json(e.what());
  }
  return std::nullopt;
}

}  // namespace

ModifierResult modifier_dialogue(const Proposal& proposal, const dsl::Block& base,
                                 std::span<const knowledge::ExperienceRecord> experiences, check::Role role,
                                 int max_retry, llm::LLMClient& llm, std::span<const dsl::VarBinding> bindings) {
  if (max_retry < 1) throw ConfigError("max_retry must be >= 1");
  if (bindings.empty()) throw ConfigError("modifier needs at least one validation binding");
  ModifierResult result;
  result.dialogue.messages =
      prompts::render(TemplateId::kModifierGenerate, {{"channel_constraint", std::string(channel_constraint(role))},
                                                      {"block_definition", std::string(prompts::block_definition())},
                                                      {"block", dsl::print_block(base)},
                                                      {"inspiration", proposal.suggestion},
                                                      {"experience_correct", numbered(experiences, "tip")},
                                                      {"experience_performance", numbered(experiences, "suggestion")}});
  for (int turn = 0; turn < max_retry; ++turn) {
    if (turn > 0) {
      result.dialogue.messages.push_back(
          {llm::Role::kUser, prompts::render_section(TemplateId::kModifierGenerate, "retry",
                                                     {{"feedback", result.attempts.back().feedback}})});
    }
    const std::string& reply = result.dialogue.step(llm);
    history::Attempt attempt;
    auto block = judge(reply, role, bindings, attempt);
    result.attempts.push_back(std::move(attempt));
    if (block) {
      result.success = true;
      result.block = std::move(block);
      break;
    }
  }
  return result;
}

ModifierResult modifier_dialogue(const Proposal& proposal, const dsl::Block& base,
                                 std::span<const knowledge::ExperienceRecord> experiences, check::Role role,
                                 int max_retry, llm::LLMClient& llm) {
  auto b = check::default_bindings(role);
  return modifier_dialogue(proposal, base, experiences, role, max_retry, llm, b);
}

namespace {

bool name_has(const dsl::Block& b, std::string_view word) {
  std::string n = b.name();
  std::transform(n.begin(), n.end(), n.begin(), [](unsigned char c) { return std::tolower(c); });
  return n.find(word) != std::string::npos;
}

}  // namespace

CompanionResult modifier_companion_blocks(const dsl::Block& cell, std::span<const CompanionExample> examples,
                                          llm::LLMClient& llm, int max_retry,
                                          std::span<const dsl::VarBinding> stem_bindings,
                                          std::span<const dsl::VarBinding> downsample_bindings) {
  if (max_retry < 1) throw ConfigError("max_retry must be >= 1");
  std::string shots;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (i) shots += "\n";
    shots += "Example " + std::to_string(i + 1) + ":\n" + dsl::print_block(examples[i].cell) + "\n" +
             dsl::print_block(examples[i].stem) + "\n" + dsl::print_block(examples[i].downsample) + "\n";
  }
  if (shots.empty()) shots = "None.";

  CompanionResult result;
  result.dialogue.messages =
      prompts::render(TemplateId::kModifierStem, {{"block_definition", std::string(prompts::block_definition())},
                                                  {"examples", shots},
                                                  {"cell", dsl::print_block(cell)}});
  for (int turn = 0; turn < max_retry; ++turn) {
    if (turn > 0) {
      result.dialogue.messages.push_back(
          {llm::Role::kUser, prompts::render_section(TemplateId::kModifierStem, "retry",
                                                     {{"feedback", result.attempts.back().feedback}})});
    }
    const std::string& reply = result.dialogue.step(llm);
    history::Attempt attempt;
    std::vector<dsl::Block> blocks;
    try {
      blocks = extract_blocks(reply);
    } catch (const ParseError& e) {
      attempt.feedback = error_json(e.what());
      attempt.block = util::trim(reply);
      result.attempts.push_back(std::move(attempt));
      continue;
    }
    const dsl::Block* stem = nullptr;
    const dsl::Block* down = nullptr;
    for (const auto& b : blocks) {
      if (!stem && name_has(b, "stem")) stem = &b;
      else if (!down && name_has(b, "down")) down = &b;
    }
    for (const auto& b : blocks) {
      if (&b == stem || &b == down) continue;
      if (!stem) stem = &b;
      else if (!down) down = &b;
    }
    if (!stem || !down) {
      attempt.feedback = error_json("expected two blocks named ##stem## and ##downsample##, found " +
                                    std::to_string(blocks.size()));
      attempt.block = util::trim(reply);
      result.attempts.push_back(std::move(attempt));
      continue;
    }
    attempt.block = dsl::print_block(*stem) + "\n" + dsl::print_block(*down);
    auto rs = check::validate(*stem, check::Role::kStem, stem_bindings);
    auto rd = check::validate(*down, check::Role::kDownsample, downsample_bindings);
    if (rs.ok() && rd.ok()) {
      attempt.valid = true;
      attempt.feedback = rs.feedback_json();
      result.attempts.push_back(std::move(attempt));
      result.success = true;
      result.stem = *stem;
      result.downsample = *down;
      break;
    }
    std::string context;
    for (const auto& f : rs.findings) context += (context.empty() ? "" : "; ") + ("[stem] " + f.message);
    for (const auto& f : rd.findings) context += (context.empty() ? "" : "; ") + ("[downsample] " + f.message);
    attempt.feedback = error_json(context);
    result.attempts.push_back(std::move(attempt));
  }
  return result;
}

CompanionResult modifier_companion_blocks(const dsl::Block& cell, std::span<const CompanionExample> examples,
                                          llm::LLMClient& llm, int max_retry) {
  auto s = check::default_bindings(check::Role::kStem);
  auto d = check::default_bindings(check::Role::kDownsample);
  return modifier_companion_blocks(cell, examples, llm, max_retry, s, d);
}

}  // namespace nadkit::agents
