// Copyright 2026 The nadkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "nadkit/llm.hpp"

#include <cstdlib>
#include <fstream>

#include <httplib.h>
#include <json.hpp>

#include "util.hpp"

namespace nadkit::llm {

using nlohmann::ordered_json;

std::string_view role_name(Role r) noexcept {
  switch (r) {
    case Role::kSystem: return "system";
    case Role::kUser: return "user";
    case Role::kAssistant: return "assistant";
  }
  return "user";
}

Role role_from_name(std::string_view name) {
  if (name == "system") return Role::kSystem;
  if (name == "user") return Role::kUser;
  if (name == "assistant") return Role::kAssistant;
  throw ProviderError("unknown message role '" + std::string(name) + "'");
}

namespace {

ordered_json messages_json(const std::vector<Message>& messages) {
  ordered_json arr = ordered_json::array();
  for (const auto& m : messages) arr.push_back({{"role", role_name(m.role)}, {"content", m.text}});
  return arr;
}

std::vector<Message> messages_from_json(const ordered_json& arr) {
  std::vector<Message> out;
  for (const auto& m : arr) {
    out.push_back({role_from_name(m.at("role").get<std::string>()), m.at("content").get<std::string>()});
  }
  return out;
}

}  // namespace

std::string fingerprint(const std::vector<Message>& messages) {
  return util::sha256_hex(messages_json(messages).dump());
}

std::string TranscriptRecord::to_json_line() const {
  ordered_json j;
  j["fingerprint"] = fingerprint(messages);
  j["messages"] = messages_json(messages);
  j["reply"] = reply.text;
  j["input_tokens"] = reply.input_tokens;
  j["output_tokens"] = reply.output_tokens;
  return j.dump();
}

TranscriptRecord TranscriptRecord::from_json_line(std::string_view line) {
  try {
    auto j = ordered_json::parse(line);
    TranscriptRecord r;
    r.messages = messages_from_json(j.at("messages"));
    r.reply.text = j.at("reply").get<std::string>();
    r.reply.input_tokens = j.value("input_tokens", std::int64_t{0});
    r.reply.output_tokens = j.value("output_tokens", std::int64_t{0});
    if (j.contains("fingerprint") && j["fingerprint"].get<std::string>() != fingerprint(r.messages)) {
      throw ProviderError("transcript record fingerprint does not match its messages");
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError(std::string("bad transcript record: ") + e.what());
  }
}

std::vector<TranscriptRecord> read_transcript(const std::filesystem::path& path) {
  std::vector<TranscriptRecord> out;
  for (const auto& line : util::split_lines(util::read_file(path))) {
    if (util::trim(line).empty()) continue;
    out.push_back(TranscriptRecord::from_json_line(line));
  }
  return out;
}

// ---------------------------------------------------------------------------

ReplayClient::ReplayClient(std::vector<TranscriptRecord> records, std::string model) : model_(std::move(model)) {
  for (auto& r : records) queues_[fingerprint(r.messages)].replies.push_back(std::move(r.reply));
}

std::unique_ptr<ReplayClient> ReplayClient::from_file(const std::filesystem::path& path) {
  return std::make_unique<ReplayClient>(read_transcript(path));
}

Completion ReplayClient::chat(const std::vector<Message>& messages) {
  std::string fp = fingerprint(messages);
  std::lock_guard lock(mu_);
  auto it = queues_.find(fp);
  if (it == queues_.end() || it->second.next >= it->second.replies.size()) {
    std::string last = messages.empty() ? "" : messages.back().text.substr(0, 120);
    throw ReplayMismatch("no recorded reply for request " + fp.substr(0, 12) + " (last message: \"" + last + "\")");
  }
  return it->second.replies[it->second.next++];
}

std::string ReplayClient::export_state() const {
  std::lock_guard lock(mu_);
  ordered_json j = ordered_json::object();
  for (const auto& [fp, q] : queues_) {
    if (q.next) j[fp] = q.next;
  }
  return j.dump();
}

void ReplayClient::restore_state(std::string_view state) {
  auto j = ordered_json::parse(state);
  std::lock_guard lock(mu_);
  for (auto& [fp, q] : queues_) q.next = 0;
  for (const auto& [fp, n] : j.items()) {
    auto it = queues_.find(fp);
    auto used = n.get<std::size_t>();
    if (it == queues_.end() || used > it->second.replies.size()) {
      throw ReplayMismatch("replay state refers to records missing from the transcript");
    }
    it->second.next = used;
  }
}

std::size_t ReplayClient::remaining() const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& [fp, q] : queues_) n += q.replies.size() - q.next;
  return n;
}

// ---------------------------------------------------------------------------

RecordingClient::RecordingClient(LLMClient& inner, std::filesystem::path path)
    : inner_(inner), path_(std::move(path)) {}

Completion RecordingClient::chat(const std::vector<Message>& messages) {
  Completion c = inner_.chat(messages);
  TranscriptRecord r{messages, c};
  std::lock_guard lock(mu_);
  util::append_file(path_, r.to_json_line() + "\n");
  return c;
}

Completion MeteredClient::chat(const std::vector<Message>& messages) {
  Completion c = inner_.chat(messages);
  in_ += c.input_tokens;
  out_ += c.output_tokens;
  ++calls_;
  return c;
}

std::int64_t count_words(std::string_view text) {
  std::int64_t n = 0;
  bool in_word = false;
  for (char c : text) {
    bool sp = c == ' ' || c == '\n' || c == '\t' || c == '\r';
    if (!sp && !in_word) ++n;
    in_word = !sp;
  }
  return n;
}

Completion CallbackClient::chat(const std::vector<Message>& messages) {
  Completion c = fn_(messages);
  if (c.input_tokens == 0 && c.output_tokens == 0) {
    for (const auto& m : messages) c.input_tokens += count_words(m.text);
    c.output_tokens = count_words(c.text);
  }
  return c;
}

// ---------------------------------------------------------------------------

RemoteClient::RemoteClient(RemoteConfig config) : config_(std::move(config)) {}

Completion RemoteClient::chat(const std::vector<Message>& messages) {
  const char* key = std::getenv(config_.api_key_env.c_str());
  if (!key || !*key) throw ProviderError("environment variable " + config_.api_key_env + " is not set");

  ordered_json body;
  body["model"] = config_.model;
  body["messages"] = messages_json(messages);
  body["temperature"] = config_.temperature;

  httplib::Client cli(config_.endpoint);
  cli.set_read_timeout(config_.timeout_seconds, 0);
  cli.set_connection_timeout(30, 0);
  httplib::Headers headers{{"Authorization", std::string("Bearer ") + key}};
  auto res = cli.Post(config_.path, headers, body.dump(), "application/json");
  if (!res) throw ProviderError("request to " + config_.endpoint + " failed: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw ProviderError("chat endpoint returned HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 300));
  }
  try {
    auto j = ordered_json::parse(res->body);
    Completion c;
    c.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
    if (j.contains("usage")) {
      c.input_tokens = j["usage"].value("prompt_tokens", std::int64_t{0});
      c.output_tokens = j["usage"].value("completion_tokens", std::int64_t{0});
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError(std::string("unexpected chat response: ") + e.what());
  }
}

}  // namespace nadkit::llm
