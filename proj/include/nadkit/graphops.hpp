// Copyright 2026 The nadkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Block isomorphism and canonical hashing. Node labels are the op name plus
// the fully defaulted, symbolically normalized argument list, so positional
// and named spellings of one call get the same label. Block names and node
// indices are ignored.

#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>

#include "nadkit/archdsl.hpp"

namespace nadkit::graph {

inline constexpr std::size_t kMaxNodes = 128;

/// Prefix hashed into every digest. Bump when the certificate encoding or
/// the label normalization changes.
inline constexpr std::string_view kSchemaTag = "nadkit-canon-v1";

std::string node_label(const dsl::OpInstance& inst);

/// Complete backtracking test. Throws SizeLimitExceeded above kMaxNodes.
bool is_isomorphic(const dsl::Block& a, const dsl::Block& b);

struct CanonicalForm {
  std::string digest;         // hex SHA-256
  std::map<int, int> relabel; // original index -> canonical position
  std::string certificate;    // the hashed text
};

/// Throws SizeLimitExceeded above kMaxNodes.
CanonicalForm canonical_hash(const dsl::Block& block);

}  // namespace nadkit::graph
