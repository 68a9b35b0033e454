// Copyright 2026 The nadkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "nadkit/prompts.hpp"

#include <set>
#include <utility>

#include "util.hpp"

namespace nadkit::agents::detail {
extern const std::pair<std::string_view, std::string_view> kPromptAssets[];
extern const int kPromptAssetCount;
}  // namespace nadkit::agents::detail

namespace nadkit::prompts {

std::string_view template_name(TemplateId id) noexcept {
  switch (id) {
    case TemplateId::kReaderRelevance: return "reader-relevance";
    case TemplateId::kReaderExtract: return "reader-extract";
    case TemplateId::kProposerRank: return "proposer-rank";
    case TemplateId::kModifierGenerate: return "modifier-generate";
    case TemplateId::kModifierStem: return "modifier-stem";
    case TemplateId::kReflectorError: return "reflector-error";
    case TemplateId::kReflectorPerf: return "reflector-perf";
  }
  return "";
}

std::string_view asset(std::string_view name) {
  for (int i = 0; i < agents::detail::kPromptAssetCount; ++i) {
    if (agents::detail::kPromptAssets[i].first == name) return agents::detail::kPromptAssets[i].second;
  }
  throw Error("no prompt asset named '" + std::string(name) + "'");
}

std::string_view block_definition() { return asset("block_definition"); }

namespace {

std::string asset_name(TemplateId id) {
  std::string n(template_name(id));
  for (char& c : n) {
    if (c == '-') c = '_';
  }
  return n;
}

// Sections of a template file keyed by name, trailing newline stripped.
std::map<std::string, std::string> sections(TemplateId id) {
  std::map<std::string, std::string> out;
  std::string current;
  for (const auto& line : util::split_lines(asset(asset_name(id)))) {
    if (line.starts_with("@@")) {
      current = util::trim(std::string_view(line).substr(2));
      out[current];
      continue;
    }
    if (current.empty()) continue;
    auto& text = out[current];
    if (!text.empty()) text += '\n';
    text += line;
  }
  for (auto& [name, text] : out) {
    while (!text.empty() && text.back() == '\n') text.pop_back();
  }
  return out;
}

void collect_slots(std::string_view text, std::set<std::string>& names) {
  std::size_t pos = 0;
  while ((pos = text.find("{{", pos)) != std::string_view::npos) {
    auto end = text.find("}}", pos + 2);
    if (end == std::string_view::npos) break;
    names.emplace(text.substr(pos + 2, end - pos - 2));
    pos = end + 2;
  }
}

}  // namespace

std::string substitute(std::string_view text, const Slots& slots) {
  std::string out;
  std::size_t pos = 0;
  for (;;) {
    auto open = text.find("{{", pos);
    if (open == std::string_view::npos) break;
    auto close = text.find("}}", open + 2);
    if (close == std::string_view::npos) break;
    std::string name(text.substr(open + 2, close - open - 2));
    auto it = slots.find(name);
    if (it == slots.end()) throw Error("prompt slot '" + name + "' is not bound");
    out.append(text.substr(pos, open - pos));
    out += it->second;
    pos = close + 2;
  }
  out.append(text.substr(pos));
  return out;
}

std::vector<std::string> slot_names(TemplateId id) {
  auto s = sections(id);
  std::set<std::string> names;
  collect_slots(s["system"], names);
  collect_slots(s["user"], names);
  return {names.begin(), names.end()};
}

std::vector<std::string_view> required_markers(TemplateId id) {
  switch (id) {
    case TemplateId::kReaderRelevance: return {"##response##"};
    case TemplateId::kReaderExtract: return {"<inspiration>", "</inspiration>"};
    case TemplateId::kProposerRank: return {"<response>", "</response>"};
    case TemplateId::kModifierGenerate: return {"##block_name##", "index:operation"};
    case TemplateId::kModifierStem: return {"##stem##", "##downsample##", "##block_name##"};
    case TemplateId::kReflectorError: return {"<tip>", "</tip>"};
    case TemplateId::kReflectorPerf: return {"<suggestion>", "</suggestion>"};
  }
  return {};
}

std::vector<llm::Message> render(TemplateId id, const Slots& slots) {
  auto s = sections(id);
  std::vector<llm::Message> out;
  if (!s["system"].empty()) out.push_back({llm::Role::kSystem, substitute(s["system"], slots)});
  out.push_back({llm::Role::kUser, substitute(s["user"], slots)});
  return out;
}

std::string render_section(TemplateId id, std::string_view section, const Slots& slots) {
  auto s = sections(id);
  auto it = s.find(std::string(section));
  if (it == s.end()) {
    throw Error("template " + std::string(template_name(id)) + " has no @@" + std::string(section) + " section");
  }
  return substitute(it->second, slots);
}

}  // namespace nadkit::prompts
