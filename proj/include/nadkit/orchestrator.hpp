// Copyright 2026 The nadkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// The design loop, training dispatch, the modification benchmark and token
// cost accounting.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nadkit/agents.hpp"
#include "nadkit/codegen.hpp"
#include "nadkit/history.hpp"
#include "nadkit/knowledge.hpp"
#include "nadkit/llm.hpp"
#include "nadkit/modtree.hpp"

namespace nadkit::orch {

namespace fs = std::filesystem;

struct Prices {
  double input_per_million = 2.50;
  double output_per_million = 10.00;
};

double account_cost(std::int64_t input_tokens, std::int64_t output_tokens, const Prices& prices) noexcept;
double account_cost(const history::HistoryLog& history, const Prices& prices) noexcept;

// ---------------------------------------------------------------------------
// Configuration

struct LlmSettings {
  std::string kind = "replay";  // replay | remote
  fs::path replay;              // transcript for kind=replay
  llm::RemoteConfig remote;
};

struct EmbeddingSettings {
  std::string kind = "hashing";  // hashing | remote
  std::size_t dimension = 256;
  knowledge::RemoteEmbeddingConfig remote;
};

struct TrainerSettings {
  std::string kind = "stub";          // stub | command
  std::vector<std::string> command;   // argv prefix for kind=command
  fs::path profile;                   // passed as --profile
  double diverge_below = 0.0;         // stub: pseudo-accuracies under this report "diverged"
};

struct RunConfig {
  int N = 3;
  int max_retry = agents::kDefaultMaxRetry;
  int max_iterations = 0;  // 0: 4*N + 4
  codegen::MacroConfig macro;
  tree::SelectionPolicy selection;
  std::vector<knowledge::Band> bands = knowledge::default_bands();
  std::size_t per_band = 2;
  std::size_t candidates = 10;  // cap on inspirations shown to the proposer
  std::vector<std::int64_t> seeds = {777, 888, 999};
  LlmSettings llm;
  EmbeddingSettings embedding;
  fs::path corpus_dir;
  fs::path knowledge_store;   // loaded when present, else built from corpus_dir
  fs::path experience_store;  // optional seed experiences
  fs::path output_dir = "run";
  Prices prices;
  fs::path cell;
  fs::path stem;
  fs::path downsample;
  TrainerSettings trainer;

  /// Throws ConfigError.
  void check() const;
  int iteration_cap() const noexcept { return max_iterations > 0 ? max_iterations : 4 * N + 4; }

  std::string to_json() const;
  /// Relative paths are resolved against `base_dir`. Throws ConfigError.
  static RunConfig from_json(std::string_view text, const fs::path& base_dir = {});
  static RunConfig load(const fs::path& path);
};

// ---------------------------------------------------------------------------
// Training dispatch

struct TrainResult {
  std::optional<double> accuracy_val;
  std::optional<double> accuracy_test;
  std::string status = "ok";  // ok | diverged | failed
  int epochs_run = 0;
  std::string reason;

  std::string to_json() const;
  static TrainResult from_json(std::string_view text);
};

struct TrainJob {
  fs::path network;  // network.json
  fs::path result;   // result.json to write
  std::string digest;
};

class Trainer {
 public:
  virtual ~Trainer() = default;
  /// Writes job.result and returns its contents.
  virtual TrainResult train(const TrainJob& job) = 0;
};

/// Deterministic pseudo-accuracy from the cell digest.
class StubTrainer : public Trainer {
 public:
  explicit StubTrainer(double diverge_below = 0.0) : diverge_below_(diverge_below) {}
  TrainResult train(const TrainJob& job) override;
  static double pseudo_accuracy(std::string_view digest, int salt = 0);

 private:
  double diverge_below_;
};

/// Runs `argv... --network <json> --profile <json> --out <result>` and
/// reads the result file.
class CommandTrainer : public Trainer {
 public:
  CommandTrainer(std::vector<std::string> argv, fs::path profile)
      : argv_(std::move(argv)), profile_(std::move(profile)) {}
  TrainResult train(const TrainJob& job) override;

 private:
  std::vector<std::string> argv_;
  fs::path profile_;
};

std::unique_ptr<Trainer> make_trainer(const TrainerSettings& settings);
std::unique_ptr<llm::LLMClient> make_llm(const LlmSettings& settings);
std::unique_ptr<knowledge::EmbeddingProvider> make_embedder(const EmbeddingSettings& settings);

// ---------------------------------------------------------------------------
// Design loop

struct RunOptions {
  bool resume = false;
  /// Simulates a crash: exits the process right after this iteration's
  /// history entry is written and before its state is committed.
  std::optional<std::int64_t> crash_after_iteration;
  std::function<void(const history::Entry&)> on_iteration;
  // Injected collaborators; built from the config when null.
  llm::LLMClient* llm = nullptr;
  knowledge::EmbeddingProvider* embedder = nullptr;
  Trainer* trainer = nullptr;
};

struct DesignResult {
  std::string best_id;
  tree::ModTree tree;
  history::HistoryLog history;
  int trained = 0;  // n
  std::int64_t iterations = 0;
  bool exhausted = false;  // stopped at the iteration cap before n reached N
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
  double cost = 0.0;
};

/// Run directory: config.json, state.json, tree.json, tree.dot,
/// history.jsonl, experience.jsonl, knowledge.jsonl, transcripts.jsonl,
/// summary.json and archs/<node>/{cell,stem,downsample}.block, network.json,
/// result.json. Throws on I/O and configuration errors only.
DesignResult run_design(const RunConfig& config, const RunOptions& options = {});

/// Relative paths of files whose bytes differ between two run directories,
/// including files present in only one of them.
std::vector<std::string> compare_dirs(const fs::path& a, const fs::path& b);

// ---------------------------------------------------------------------------
// Modification benchmark

struct BenchSample {
  std::string id;
  dsl::Block base;
  std::string suggestion;
  check::Role role = check::Role::kCell;
  std::optional<dsl::Block> expected;  // reference answer, when known
};

/// Samples in JSON-lines: {"id", "block", "suggestion", "role"?, "expected"?}.
std::vector<BenchSample> read_bench_samples(const fs::path& path);

class Judge {
 public:
  virtual ~Judge() = default;
  virtual bool meets(const BenchSample& sample, const dsl::Block& produced) = 0;
};

/// Correct when the produced block is isomorphic to the sample's reference.
class IsomorphismJudge : public Judge {
 public:
  bool meets(const BenchSample& sample, const dsl::Block& produced) override;
};

/// Verdicts keyed by sample id from a JSON object {"id": true, ...}.
class VerdictFileJudge : public Judge {
 public:
  explicit VerdictFileJudge(const fs::path& path);
  bool meets(const BenchSample& sample, const dsl::Block& produced) override;

 private:
  std::map<std::string, bool> verdicts_;
};

struct SampleOutcome {
  std::string id;
  bool executable = false;
  bool correct = false;
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
  std::string block;  // produced block text
  std::string detail;
};

struct BenchMetrics {
  int total = 0;
  int executable = 0;
  int correct = 0;
  double E = 0.0;
  double Q = 0.0;
  double SR = 0.0;
  bool q_undefined = false;  // no executable samples; Q reported as 0
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
  double tokens_mean_k = 0.0;    // per-sample thousands of tokens
  double tokens_stddev_k = 0.0;  // population standard deviation
  double cost = 0.0;
  std::vector<SampleOutcome> samples;

  std::string to_json() const;
};

BenchMetrics compute_metrics(std::vector<SampleOutcome> outcomes, const Prices& prices);

struct BenchConfig {
  int max_retry = agents::kDefaultMaxRetry;
  int threads = 4;
  Prices prices;
};

/// Samples run concurrently; the client must be shareable.
BenchMetrics run_benchmark(std::span<const BenchSample> samples, Judge& judge, llm::LLMClient& llm,
                           const BenchConfig& config = {});

// ---------------------------------------------------------------------------
// Transcript checks

struct TranscriptReport {
  std::size_t records = 0;
  std::size_t fingerprints = 0;
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
};

/// Parses every record and checks stored fingerprints. Throws ProviderError.
TranscriptReport verify_transcript(const fs::path& path);

}  // namespace nadkit::orch
