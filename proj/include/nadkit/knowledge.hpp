// Copyright 2026 The nadkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Embeddings, the brute-force cosine vector store, the reader pipeline that
// fills the knowledge store and the reflector that fills the experience
// store.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nadkit/archdsl.hpp"
#include "nadkit/history.hpp"
#include "nadkit/llm.hpp"
#include "nadkit/modtree.hpp"

namespace nadkit::knowledge {

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::vector<float> embed(std::string_view text) = 0;
  virtual std::size_t dimension() const = 0;
  virtual std::string model_id() const = 0;
};

/// Signed feature hashing of lowercase word unigrams and bigrams, L2
/// normalized. Deterministic across processes.
class HashingEmbedder : public EmbeddingProvider {
 public:
  explicit HashingEmbedder(std::size_t dimension = 256) : dim_(dimension) {}
  std::vector<float> embed(std::string_view text) override;
  std::size_t dimension() const override { return dim_; }
  std::string model_id() const override { return "hashing-" + std::to_string(dim_); }

 private:
  std::size_t dim_;
};

struct RemoteEmbeddingConfig {
  std::string endpoint = "https://api.openai.com";
  std::string path = "/v1/embeddings";
  std::string model = "text-embedding-ada-002";
  std::string api_key_env = "NADKIT_API_KEY";
  std::size_t dimension = 1536;
};

class RemoteEmbedder : public EmbeddingProvider {
 public:
  explicit RemoteEmbedder(RemoteEmbeddingConfig config) : config_(std::move(config)) {}
  std::vector<float> embed(std::string_view text) override;
  std::size_t dimension() const override { return config_.dimension; }
  std::string model_id() const override { return config_.model; }

 private:
  RemoteEmbeddingConfig config_;
};

/// Cosine similarity in double precision, clamped to [-1,1]; 0 when either
/// vector is zero.
double cosine(std::span<const float> a, std::span<const float> b);

using Metadata = std::map<std::string, std::string>;

struct StoreEntry {
  std::vector<float> vector;
  std::string payload;
  Metadata metadata;
};

struct Scored {
  std::size_t index;
  double similarity;
};

class VectorStore {
 public:
  explicit VectorStore(std::size_t dimension) : dim_(dimension) {}

  std::size_t add(std::vector<float> vector, std::string payload, Metadata metadata = {});
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  std::size_t dimension() const noexcept { return dim_; }
  const std::vector<StoreEntry>& entries() const noexcept { return entries_; }
  const StoreEntry& entry(std::size_t i) const { return entries_.at(i); }

  /// Every entry by descending similarity; ties keep insertion order.
  std::vector<Scored> rank(std::span<const float> query) const;
  bool contains_meta(const std::string& key, const std::string& value) const;
  void truncate(std::size_t n);

  /// Header line, then one record per line with the vector as base64
  /// float32 little-endian.
  std::string to_jsonl() const;
  static VectorStore from_jsonl(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static VectorStore load(const std::filesystem::path& path);

 private:
  std::size_t dim_;
  std::vector<StoreEntry> entries_;
};

// ---------------------------------------------------------------------------
// Reader

/// [lo, hi); a band whose hi is >= 1 also includes 1.
struct Band {
  double lo;
  double hi;
};

std::vector<Band> default_bands();

struct KnowledgeItem {
  std::string id;  // "k<store index>"
  std::string text;
  std::string source_paper;
  std::vector<float> embedding;
  double similarity = 0.0;
};

/// Parses "##response## yes|no". nullopt when the verdict is missing.
std::optional<bool> parse_relevance(std::string_view reply);

bool assess_relevance(std::string_view title, std::string_view abstract, llm::LLMClient& llm);
std::vector<std::string> extract_inspirations(std::string_view body, llm::LLMClient& llm);

/// Relevance check, then extraction; stores every inspiration. Returns the
/// stored items (empty for an irrelevant paper).
std::vector<KnowledgeItem> ingest_paper(std::string_view title, std::string_view abstract, std::string_view body,
                                        std::string_view paper_id, llm::LLMClient& llm,
                                        EmbeddingProvider& embedder, VectorStore& store);

struct CorpusStats {
  int papers = 0;
  int skipped = 0;
  int relevant = 0;
  int items = 0;
  std::vector<std::string> errors;
};

/// Reads <id>.meta.json {title, abstract} and <id>.body.txt in id order.
/// Ids in `seen` are skipped; processed ids are added to it.
CorpusStats ingest_corpus(const std::filesystem::path& dir, llm::LLMClient& llm, EmbeddingProvider& embedder,
                          VectorStore& store, std::set<std::string>& seen);

/// Band-major: for each band, up to per_band items in it, most similar
/// first. Throws EmptyStore.
std::vector<KnowledgeItem> retrieve_inspirations(const VectorStore& store, EmbeddingProvider& embedder,
                                                 std::string_view query, std::size_t per_band,
                                                 std::span<const Band> bands);

// ---------------------------------------------------------------------------
// Reflector

enum class Category { kFailure, kFailureToSuccess, kSuccess };

std::string_view category_name(Category c) noexcept;
Category category_from_name(std::string_view name);

struct ExperienceRecord {
  Category category = Category::kSuccess;
  std::string kind;  // "tip" or "suggestion"
  std::string advice;
  std::string role = "cell";
  std::string proposal;
  std::string source_entry;
  double similarity = 0.0;
};

struct Advice {
  std::string text;
  bool truncated = false;
};

/// Keeps whole sentences while the word count stays within max_words; a
/// first sentence that is already too long is cut at max_words words.
Advice limit_words(std::string_view text, std::size_t max_words = 50);

std::string reflect_error(std::string_view block_text, std::string_view finding, llm::LLMClient& llm);
std::string reflect_error(const dsl::Block& block, std::string_view finding, llm::LLMClient& llm);

/// Precondition new_acc < old_acc.
Advice reflect_performance(const dsl::Block& old_block, double old_acc, const dsl::Block& new_block, double new_acc,
                           llm::LLMClient& llm);

struct Classification {
  enum class Basis { kValidationError, kAccuracyDrop, kAccuracyKept };
  Category category;
  Basis basis;
};

/// Pure. nullopt for entries with neither a validation error nor an
/// accuracy to judge.
std::optional<Classification> classify(const history::Entry& entry);

struct ReflectStats {
  int added = 0;
  int skipped = 0;
  std::vector<std::string> errors;
};

/// Turns every history entry not yet in `store` into at most one experience
/// record keyed by the proposal embedding. Per-entry failures are reported
/// in the stats and skipped.
ReflectStats reflect_history(const history::HistoryLog& history, const tree::ModTree& tree, llm::LLMClient& llm,
                             EmbeddingProvider& embedder, VectorStore& store);

/// Top k records by similarity of the proposal to their keys, optionally
/// restricted to one block role.
std::vector<ExperienceRecord> retrieve_experience(const VectorStore& store, EmbeddingProvider& embedder,
                                                  std::string_view proposal,
                                                  const std::optional<std::string>& role = std::nullopt,
                                                  std::size_t k = 5);

ExperienceRecord record_from_entry(const StoreEntry& entry);

}  // namespace nadkit::knowledge
