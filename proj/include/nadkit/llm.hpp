// Copyright 2026 The nadkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Chat-completion client contract and its implementations. Clients are safe
// to share between threads.

#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "nadkit/error.hpp"

namespace nadkit::llm {

enum class Role { kSystem, kUser, kAssistant };

std::string_view role_name(Role r) noexcept;
Role role_from_name(std::string_view name);

struct Message {
  Role role = Role::kUser;
  std::string text;
  friend bool operator==(const Message&, const Message&) = default;
};

struct Completion {
  std::string text;
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
};

class LLMClient {
 public:
  virtual ~LLMClient() = default;
  virtual Completion chat(const std::vector<Message>& messages) = 0;
  virtual std::string model_id() const = 0;
};

/// Hex SHA-256 of the canonical JSON form of `messages`.
std::string fingerprint(const std::vector<Message>& messages);

/// One line of a transcript file.
struct TranscriptRecord {
  std::vector<Message> messages;
  Completion reply;

  std::string to_json_line() const;  // without trailing newline
  static TranscriptRecord from_json_line(std::string_view line);
};

std::vector<TranscriptRecord> read_transcript(const std::filesystem::path& path);

/// Serves recorded replies. Requests are matched by fingerprint; records
/// sharing a fingerprint are served in file order. A request with no
/// remaining record throws ReplayMismatch.
class ReplayClient : public LLMClient {
 public:
  explicit ReplayClient(std::vector<TranscriptRecord> records, std::string model = "replay");
  static std::unique_ptr<ReplayClient> from_file(const std::filesystem::path& path);

  Completion chat(const std::vector<Message>& messages) override;
  std::string model_id() const override { return model_; }

  /// How many records of each fingerprint were consumed, as JSON. Restoring
  /// it lets an interrupted run continue where it stopped.
  std::string export_state() const;
  void restore_state(std::string_view state);
  std::size_t remaining() const;

 private:
  struct Queue {
    std::vector<Completion> replies;
    std::size_t next = 0;
  };
  mutable std::mutex mu_;
  std::map<std::string, Queue> queues_;
  std::string model_;
};

/// Forwards to `inner` and appends every exchange to a transcript file.
class RecordingClient : public LLMClient {
 public:
  RecordingClient(LLMClient& inner, std::filesystem::path path);
  Completion chat(const std::vector<Message>& messages) override;
  std::string model_id() const override { return inner_.model_id(); }

 private:
  LLMClient& inner_;
  std::filesystem::path path_;
  std::mutex mu_;
};

/// Forwards to `inner` and totals token usage.
class MeteredClient : public LLMClient {
 public:
  explicit MeteredClient(LLMClient& inner) : inner_(inner) {}
  Completion chat(const std::vector<Message>& messages) override;
  std::string model_id() const override { return inner_.model_id(); }

  std::int64_t input_tokens() const noexcept { return in_.load(); }
  std::int64_t output_tokens() const noexcept { return out_.load(); }
  std::int64_t calls() const noexcept { return calls_.load(); }

 private:
  LLMClient& inner_;
  std::atomic<std::int64_t> in_{0};
  std::atomic<std::int64_t> out_{0};
  std::atomic<std::int64_t> calls_{0};
};

/// Answers from a callback. Token counts default to a whitespace word count
/// when the callback leaves them at zero.
class CallbackClient : public LLMClient {
 public:
  using Fn = std::function<Completion(const std::vector<Message>&)>;
  explicit CallbackClient(Fn fn, std::string model = "callback") : fn_(std::move(fn)), model_(std::move(model)) {}
  Completion chat(const std::vector<Message>& messages) override;
  std::string model_id() const override { return model_; }

 private:
  Fn fn_;
  std::string model_;
};

std::int64_t count_words(std::string_view text);

struct RemoteConfig {
  std::string endpoint = "https://api.openai.com";  // scheme://host[:port]
  std::string path = "/v1/chat/completions";
  std::string model = "gpt-4o";
  std::string api_key_env = "NADKIT_API_KEY";
  double temperature = 0.0;
  int timeout_seconds = 120;
};

/// OpenAI-compatible chat-completion endpoint. The API key is read from the
/// environment variable named in the config.
class RemoteClient : public LLMClient {
 public:
  explicit RemoteClient(RemoteConfig config);
  Completion chat(const std::vector<Message>& messages) override;
  std::string model_id() const override { return config_.model; }

 private:
  RemoteConfig config_;
};

}  // namespace nadkit::llm
