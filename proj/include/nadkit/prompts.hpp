// Copyright 2026 The nadkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Prompt templates. The text lives in prompts/*.txt and is compiled into the
// library. A template file has @@system, @@user and optional @@reprompt /
// @@retry sections with {{slot}} placeholders.

#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "nadkit/llm.hpp"

namespace nadkit::prompts {

enum class TemplateId {
  kReaderRelevance,
  kReaderExtract,
  kProposerRank,
  kModifierGenerate,
  kModifierStem,
  kReflectorError,
  kReflectorPerf,
};

inline constexpr TemplateId kAllTemplates[] = {
    TemplateId::kReaderRelevance, TemplateId::kReaderExtract,   TemplateId::kProposerRank,
    TemplateId::kModifierGenerate, TemplateId::kModifierStem,   TemplateId::kReflectorError,
    TemplateId::kReflectorPerf,
};

/// "reader-relevance", "modifier-generate", ...
std::string_view template_name(TemplateId id) noexcept;

/// Raw asset text by file stem ("block_definition", "reader_relevance", ...).
/// Throws Error for an unknown asset.
std::string_view asset(std::string_view name);

/// The operation catalog description shared by several templates.
std::string_view block_definition();

using Slots = std::map<std::string, std::string>;

/// Slot names used by the template's @@system and @@user sections.
std::vector<std::string> slot_names(TemplateId id);

/// Protocol markers the matching reply parser relies on. Every rendering
/// contains all of them.
std::vector<std::string_view> required_markers(TemplateId id);

/// [system, user] messages. Throws Error when a slot is left unbound.
std::vector<llm::Message> render(TemplateId id, const Slots& slots);

/// Follow-up user message after a protocol violation (@@reprompt) or a
/// failed block (@@retry). Throws Error if the template has no such section.
std::string render_section(TemplateId id, std::string_view section, const Slots& slots = {});

/// Replaces {{name}} placeholders in one pass; substituted text is never
/// rescanned. Throws Error on an unbound placeholder.
std::string substitute(std::string_view text, const Slots& slots);

}  // namespace nadkit::prompts
