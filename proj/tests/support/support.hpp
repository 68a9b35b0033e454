// Copyright 2026 The nadkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Test helpers: random blocks, text mutation, a brute-force isomorphism
// oracle and a scripted language model used to record replay fixtures.

#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "nadkit/archdsl.hpp"
#include "nadkit/llm.hpp"

namespace nadkit::testing {

using Rng = std::mt19937_64;

std::filesystem::path data_dir();

dsl::Block read_block(const std::filesystem::path& path);

/// Parseable block with catalog ops, random arguments (some as expressions,
/// some positional), an occasional unknown op and a random DAG on
/// non-contiguous indices. Not necessarily valid.
dsl::Block random_block(Rng& rng, int max_nodes = 10);

/// A cell that passes validation under the default cell bindings: a DAG of
/// shape-preserving ops with multi-input joins.
dsl::Block random_valid_cell(Rng& rng, int inner_nodes);

/// Same graph with node indices relabeled and edges listed in a new order.
dsl::Block shuffle_indices(const dsl::Block& block, Rng& rng);

/// Small structural change: one op swapped, one argument changed or one edge
/// moved. May or may not stay isomorphic.
dsl::Block perturb(const dsl::Block& block, Rng& rng);

/// Character and line level damage to a block text.
std::string mutate_text(const std::string& text, Rng& rng);

struct IsoPair {
  std::string name;
  bool same = false;
  dsl::Block a;
  dsl::Block b;
};

/// data/iso/pairs.txt
std::vector<IsoPair> read_iso_pairs();

/// Tries every bijection that keeps input and output fixed.
bool brute_force_isomorphic(const dsl::Block& a, const dsl::Block& b);

/// Deterministic stand-in for a chat model that understands the prompt
/// templates well enough to drive ingestion, ranking, modification,
/// companion design and reflection.
class ScriptedModel {
 public:
  struct Options {
    /// The n-th modification dialogue (1-based) never produces a valid block.
    int hopeless_dialogue = 0;
  };

  ScriptedModel() = default;
  explicit ScriptedModel(Options options) : options_(options) {}
  llm::Completion operator()(const std::vector<llm::Message>& messages);

 private:
  llm::Completion reply(std::string text, const std::vector<llm::Message>& messages) const;
  std::string modify(const std::vector<llm::Message>& messages);

  Options options_;
  int dialogues_ = 0;
  std::vector<std::string> dialogue_keys_;
};

}  // namespace nadkit::testing
