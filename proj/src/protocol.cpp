// Copyright 2026 The nadkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "protocol.hpp"

#include "util.hpp"

namespace nadkit::protocol {

std::vector<std::string> tagged_spans(std::string_view text, std::string_view tag) {
  const std::string open = "<" + std::string(tag) + ">";
  const std::string close = "</" + std::string(tag) + ">";
  std::vector<std::string> out;
  std::size_t pos = 0;
  for (;;) {
    auto a = text.find(open, pos);
    if (a == std::string_view::npos) break;
    auto b = text.find(close, a + open.size());
    if (b == std::string_view::npos) break;
    out.push_back(util::trim(text.substr(a + open.size(), b - a - open.size())));
    pos = b + close.size();
  }
  return out;
}

}  // namespace nadkit::protocol
