// Copyright 2026 The nadkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Reply-protocol helpers shared by the reader, proposer and reflector.

#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nadkit/llm.hpp"
#include "nadkit/prompts.hpp"

namespace nadkit::protocol {

/// Trimmed contents of every <tag>...</tag> span, in order.
std::vector<std::string> tagged_spans(std::string_view text, std::string_view tag);

/// Sends `messages`; when `parse` rejects the reply, appends the reply and
/// the template's @@reprompt message and asks once more. A second rejection
/// throws MalformedResponse.
template <typename T>
T ask(llm::LLMClient& client, prompts::TemplateId id, std::vector<llm::Message> messages,
      const std::function<std::optional<T>(std::string_view)>& parse) {
  for (int round = 0; round < 2; ++round) {
    llm::Completion reply = client.chat(messages);
    if (auto v = parse(reply.text)) return std::move(*v);
    messages.push_back({llm::Role::kAssistant, reply.text});
    messages.push_back({llm::Role::kUser, prompts::render_section(id, "reprompt")});
  }
  throw MalformedResponse(std::string(prompts::template_name(id)) + " reply broke the output protocol twice");
}

}  // namespace nadkit::protocol
