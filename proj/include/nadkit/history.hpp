// Copyright 2026 The nadkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// One record per design iteration, appended in iteration order and persisted
// as JSON lines.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nadkit/llm.hpp"

namespace nadkit::history {

/// One assistant reply of the modifier dialogue and its verdict.
struct Attempt {
  std::string block;     // extracted block text, empty when none was found
  bool valid = false;
  std::string feedback;  // the feedback JSON object sent back
};

struct Entry {
  std::string id;  // "h<iteration>"
  std::int64_t iteration = 0;
  std::int64_t clock = 0;  // logical timestamp
  std::string parent_id;   // candidate tree node
  std::string proposal;
  std::string source;      // knowledge item id or "expert"
  std::string role = "cell";
  std::vector<llm::Message> dialogue;
  std::vector<Attempt> attempts;
  /// trained | failed-training | invalid | duplicate | companion-failed |
  /// infeasible | error
  std::string outcome;
  std::string detail;
  std::optional<std::string> digest;
  std::optional<std::string> node_id;
  std::optional<double> accuracy;
  std::optional<double> accuracy_test;
  std::optional<double> parent_accuracy;
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;

  std::string to_json_line() const;
  static Entry from_json_line(std::string_view line);
};

using HistoryLog = std::vector<Entry>;

HistoryLog read_history(const std::filesystem::path& path);

}  // namespace nadkit::history
