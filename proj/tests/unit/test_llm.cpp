// Copyright 2026 The nadkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "nadkit/llm.hpp"
#include <unistd.h>

namespace nadkit {
namespace {

using llm::Message;
using llm::Role;

std::vector<Message> convo(std::string user) {
  return {{Role::kSystem, "You are terse."}, {Role::kUser, std::move(user)}};
}

std::filesystem::path temp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("nadkit_llm_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  auto p = dir / name;
  std::filesystem::remove(p);
  return p;
}

TEST(Fingerprint, StableAndSensitive) {
  auto a = llm::fingerprint(convo("hi"));
  EXPECT_EQ(a, llm::fingerprint(convo("hi")));
  EXPECT_EQ(a.size(), 64u);
  EXPECT_NE(a, llm::fingerprint(convo("hi ")));
  auto swapped = convo("hi");
  swapped[0].role = Role::kUser;
  EXPECT_NE(a, llm::fingerprint(swapped));
}

TEST(Transcript, LineRoundTrip) {
  llm::TranscriptRecord r{convo("line one\nline \"two\"\té"), {"reply\n", 12, 3}};
  auto back = llm::TranscriptRecord::from_json_line(r.to_json_line());
  EXPECT_EQ(back.messages, r.messages);
  EXPECT_EQ(back.reply.text, r.reply.text);
  EXPECT_EQ(back.reply.input_tokens, 12);
  EXPECT_EQ(back.reply.output_tokens, 3);
  EXPECT_EQ(r.to_json_line().find('\n'), std::string::npos);
}

TEST(Replay, ServesInFileOrderPerFingerprint) {
  std::vector<llm::TranscriptRecord> recs = {
      {convo("a"), {"first a", 1, 1}}, {convo("b"), {"only b", 1, 1}}, {convo("a"), {"second a", 1, 1}}};
  llm::ReplayClient c(recs);
  EXPECT_EQ(c.remaining(), 3u);
  EXPECT_EQ(c.chat(convo("a")).text, "first a");
  EXPECT_EQ(c.chat(convo("a")).text, "second a");
  EXPECT_EQ(c.chat(convo("b")).text, "only b");
  EXPECT_EQ(c.remaining(), 0u);
  EXPECT_THROW(c.chat(convo("a")), ReplayMismatch);
  EXPECT_THROW(c.chat(convo("never")), ReplayMismatch);
}

TEST(Replay, StateRestore) {
  std::vector<llm::TranscriptRecord> recs = {{convo("a"), {"1", 1, 1}}, {convo("a"), {"2", 1, 1}}};
  llm::ReplayClient c(recs);
  c.chat(convo("a"));
  auto state = c.export_state();
  llm::ReplayClient d(recs);
  d.restore_state(state);
  EXPECT_EQ(d.chat(convo("a")).text, "2");
  EXPECT_EQ(d.remaining(), 0u);
}

TEST(Recording, WritesReplayableTranscript) {
  auto path = temp_file("rec.jsonl");
  llm::CallbackClient inner([](const std::vector<Message>& m) { return llm::Completion{"echo " + m.back().text, 0, 0}; });
  llm::RecordingClient rec(inner, path);
  rec.chat(convo("x"));
  rec.chat(convo("y z"));
  auto records = llm::read_transcript(path);
  ASSERT_EQ(records.size(), 2u);
  auto replay = llm::ReplayClient::from_file(path);
  EXPECT_EQ(replay->chat(convo("y z")).text, "echo y z");
  EXPECT_EQ(replay->chat(convo("x")).text, "echo x");
}

TEST(Callback, DefaultTokenCounts) {
  llm::CallbackClient c([](const std::vector<Message>&) { return llm::Completion{"three word reply", 0, 0}; });
  auto out = c.chat(convo("two words"));
  EXPECT_EQ(out.output_tokens, 3);
  EXPECT_EQ(out.input_tokens, llm::count_words("You are terse.") + 2);
  EXPECT_EQ(llm::count_words("  a\tb\n\nc "), 3);
  EXPECT_EQ(llm::count_words(""), 0);
}

TEST(Metered, TotalsAcrossThreads) {
  llm::CallbackClient inner([](const std::vector<Message>&) { return llm::Completion{"r", 10, 2}; });
  llm::MeteredClient m(inner);
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < 50; ++i) m.chat(convo("q"));
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(m.calls(), 400);
  EXPECT_EQ(m.input_tokens(), 4000);
  EXPECT_EQ(m.output_tokens(), 800);
}

TEST(Remote, OpenAiCompatibleEndpoint) {
  httplib::Server server;
  std::string seen_auth, seen_body;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen_auth = req.get_header_value("Authorization");
    seen_body = req.body;
    res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"pong"}}],)"
                    R"("usage":{"prompt_tokens":7,"completion_tokens":1}})",
                    "application/json");
  });
  server.Post("/broken", [](const httplib::Request&, httplib::Response& res) {
    res.status = 500;
    res.set_content("oops", "text/plain");
  });
  int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  ::setenv("NADKIT_TEST_KEY", "sk-test", 1);
  llm::RemoteConfig cfg;
  cfg.endpoint = "http://127.0.0.1:" + std::to_string(port);
  cfg.api_key_env = "NADKIT_TEST_KEY";
  cfg.model = "m1";
  llm::RemoteClient client(cfg);
  auto out = client.chat(convo("ping"));
  EXPECT_EQ(out.text, "pong");
  EXPECT_EQ(out.input_tokens, 7);
  EXPECT_EQ(out.output_tokens, 1);
  EXPECT_EQ(seen_auth, "Bearer sk-test");
  auto body = nlohmann::json::parse(seen_body);
  EXPECT_EQ(body["model"], "m1");
  EXPECT_EQ(body["messages"][1]["role"], "user");
  EXPECT_EQ(body["messages"][1]["content"], "ping");

  cfg.path = "/broken";
  EXPECT_THROW(llm::RemoteClient(cfg).chat(convo("ping")), ProviderError);
  cfg.api_key_env = "NADKIT_TEST_KEY_UNSET";
  EXPECT_THROW(llm::RemoteClient(cfg).chat(convo("ping")), ProviderError);

  server.stop();
  th.join();
}

}  // namespace
}  // namespace nadkit
