// Copyright 2026 The nadkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "nadkit/history.hpp"

#include <json.hpp>

#include "util.hpp"

namespace nadkit::history {

using nlohmann::ordered_json;

namespace {

template <typename T>
ordered_json opt(const std::optional<T>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

template <typename T>
std::optional<T> get_opt(const ordered_json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<T>();
}

}  // namespace

std::string Entry::to_json_line() const {
  ordered_json j;
  j["id"] = id;
  j["iteration"] = iteration;
  j["clock"] = clock;
  j["parent_id"] = parent_id;
  j["proposal"] = proposal;
  j["source"] = source;
  j["role"] = role;
  ordered_json msgs = ordered_json::array();
  for (const auto& m : dialogue) msgs.push_back({{"role", llm::role_name(m.role)}, {"content", m.text}});
  j["dialogue"] = std::move(msgs);
  ordered_json att = ordered_json::array();
  for (const auto& a : attempts) att.push_back({{"block", a.block}, {"valid", a.valid}, {"feedback", a.feedback}});
  j["attempts"] = std::move(att);
  j["outcome"] = outcome;
  j["detail"] = detail;
  j["digest"] = opt(digest);
  j["node_id"] = opt(node_id);
  j["accuracy"] = opt(accuracy);
  j["accuracy_test"] = opt(accuracy_test);
  j["parent_accuracy"] = opt(parent_accuracy);
  j["input_tokens"] = input_tokens;
  j["output_tokens"] = output_tokens;
  return j.dump();
}

Entry Entry::from_json_line(std::string_view line) {
  try {
    auto j = ordered_json::parse(line);
    Entry e;
    e.id = j.at("id").get<std::string>();
    e.iteration = j.at("iteration").get<std::int64_t>();
    e.clock = j.value("clock", std::int64_t{0});
    e.parent_id = j.at("parent_id").get<std::string>();
    e.proposal = j.at("proposal").get<std::string>();
    e.source = j.value("source", std::string("expert"));
    e.role = j.value("role", std::string("cell"));
    for (const auto& m : j.at("dialogue")) {
      e.dialogue.push_back({llm::role_from_name(m.at("role").get<std::string>()), m.at("content").get<std::string>()});
    }
    for (const auto& a : j.at("attempts")) {
      e.attempts.push_back(
          {a.at("block").get<std::string>(), a.at("valid").get<bool>(), a.at("feedback").get<std::string>()});
    }
    e.outcome = j.at("outcome").get<std::string>();
    e.detail = j.value("detail", std::string());
    e.digest = get_opt<std::string>(j, "digest");
    e.node_id = get_opt<std::string>(j, "node_id");
    e.accuracy = get_opt<double>(j, "accuracy");
    e.accuracy_test = get_opt<double>(j, "accuracy_test");
    e.parent_accuracy = get_opt<double>(j, "parent_accuracy");
    e.input_tokens = j.value("input_tokens", std::int64_t{0});
    e.output_tokens = j.value("output_tokens", std::int64_t{0});
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("bad history entry: ") + ex.what());
  }
}

HistoryLog read_history(const std::filesystem::path& path) {
  HistoryLog out;
  if (!std::filesystem::exists(path)) return out;
  for (const auto& line : util::split_lines(util::read_file(path))) {
    if (util::trim(line).empty()) continue;
    out.push_back(Entry::from_json_line(line));
  }
  return out;
}

}  // namespace nadkit::history
