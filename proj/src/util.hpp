// Copyright 2026 The nadkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Internal helpers shared by the modules. Not installed.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nadkit::util {

std::string sha256_hex(std::string_view data);

std::string base64_encode(std::string_view bytes);
/// Returns nullopt on malformed input.
std::optional<std::string> base64_decode(std::string_view text);

std::string read_file(const std::filesystem::path& path);
/// Writes to a sibling temp file and renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view data);
void append_file(const std::filesystem::path& path, std::string_view data);

std::string trim(std::string_view s);
std::vector<std::string> split_lines(std::string_view s);

/// Shortest round-trip decimal for a double ("0.7086", not "0.70860000000000001").
std::string format_double(double v);

}  // namespace nadkit::util
