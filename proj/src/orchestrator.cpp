// Copyright 2026 The nadkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "nadkit/orchestrator.hpp"

#include <spawn.h>
#include <sys/wait.h>

#include <algorithm>
#include <atomic>
#include <cstring>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <set>
#include <thread>

#include <json.hpp>

#include "nadkit/graphops.hpp"
#include "util.hpp"

extern char** environ;

namespace nadkit::orch {

using nlohmann::ordered_json;

double account_cost(std::int64_t input_tokens, std::int64_t output_tokens, const Prices& prices) noexcept {
  return static_cast<double>(input_tokens) * prices.input_per_million / 1e6 +
         static_cast<double>(output_tokens) * prices.output_per_million / 1e6;
}

double account_cost(const history::HistoryLog& history, const Prices& prices) noexcept {
  std::int64_t in = 0;
  std::int64_t out = 0;
  for (const auto& e : history) {
    in += e.input_tokens;
    out += e.output_tokens;
  }
  return account_cost(in, out, prices);
}

// ---------------------------------------------------------------------------
// RunConfig

void RunConfig::check() const {
  if (N < 1) throw ConfigError("N must be >= 1");
  if (max_retry < 1) throw ConfigError("max_retry must be >= 1");
  if (max_iterations < 0) throw ConfigError("max_iterations must be >= 0");
  if (seeds.empty()) throw ConfigError("seeds must not be empty");
  if (selection.bfs_period < 1 || selection.max_children < 1) {
    throw ConfigError("selection needs bfs_period >= 1 and max_children >= 1");
  }
  if (bands.empty() || per_band < 1 || candidates < 1) throw ConfigError("need bands, per_band >= 1, candidates >= 1");
  for (const auto& b : bands) {
    if (!(b.lo < b.hi) || b.lo < -1.0 || b.hi > 1.0) throw ConfigError("similarity band must satisfy -1 <= lo < hi <= 1");
  }
  if (llm.kind != "replay" && llm.kind != "remote") throw ConfigError("llm.kind must be replay or remote");
  if (llm.kind == "replay" && llm.replay.empty()) throw ConfigError("llm.replay transcript path is required");
  if (embedding.kind != "hashing" && embedding.kind != "remote") {
    throw ConfigError("embedding.kind must be hashing or remote");
  }
  if (trainer.kind != "stub" && trainer.kind != "command") throw ConfigError("trainer.kind must be stub or command");
  if (trainer.kind == "command" && trainer.command.empty()) throw ConfigError("trainer.command is empty");
  if (cell.empty() || stem.empty() || downsample.empty()) {
    throw ConfigError("initial.cell, initial.stem and initial.downsample are required");
  }
  if (knowledge_store.empty() && corpus_dir.empty()) throw ConfigError("need knowledge_store or corpus_dir");
  if (prices.input_per_million < 0 || prices.output_per_million < 0) throw ConfigError("prices must be >= 0");
  macro.check();
}

namespace {

std::string path_str(const fs::path& p) { return p.generic_string(); }

}  // namespace

std::string RunConfig::to_json() const {
  ordered_json j;
  j["N"] = N;
  j["max_retry"] = max_retry;
  j["max_iterations"] = max_iterations;
  j["macro"] = ordered_json::parse(macro.to_json());
  j["selection"] = {{"bfs_period", selection.bfs_period}, {"max_children", selection.max_children}};
  ordered_json bj = ordered_json::array();
  for (const auto& b : bands) bj.push_back({b.lo, b.hi});
  j["bands"] = std::move(bj);
  j["per_band"] = per_band;
  j["candidates"] = candidates;
  j["seeds"] = seeds;
  ordered_json lj;
  lj["kind"] = llm.kind;
  if (llm.kind == "replay") {
    lj["replay"] = path_str(llm.replay);
  } else {
    lj["endpoint"] = llm.remote.endpoint;
    lj["path"] = llm.remote.path;
    lj["model"] = llm.remote.model;
    lj["api_key_env"] = llm.remote.api_key_env;
    lj["temperature"] = llm.remote.temperature;
    lj["timeout_seconds"] = llm.remote.timeout_seconds;
  }
  j["llm"] = std::move(lj);
  ordered_json ej;
  ej["kind"] = embedding.kind;
  if (embedding.kind == "hashing") {
    ej["dimension"] = embedding.dimension;
  } else {
    ej["endpoint"] = embedding.remote.endpoint;
    ej["path"] = embedding.remote.path;
    ej["model"] = embedding.remote.model;
    ej["api_key_env"] = embedding.remote.api_key_env;
    ej["dimension"] = embedding.remote.dimension;
  }
  j["embedding"] = std::move(ej);
  j["corpus_dir"] = path_str(corpus_dir);
  j["knowledge_store"] = path_str(knowledge_store);
  j["experience_store"] = path_str(experience_store);
  j["output_dir"] = path_str(output_dir);
  j["prices"] = {{"input_per_million", prices.input_per_million}, {"output_per_million", prices.output_per_million}};
  j["initial"] = {{"cell", path_str(cell)}, {"stem", path_str(stem)}, {"downsample", path_str(downsample)}};
  ordered_json tj;
  tj["kind"] = trainer.kind;
  tj["command"] = trainer.command;
  tj["profile"] = path_str(trainer.profile);
  tj["diverge_below"] = trainer.diverge_below;
  j["trainer"] = std::move(tj);
  return j.dump(1) + "\n";
}

RunConfig RunConfig::from_json(std::string_view text, const fs::path& base_dir) {
  auto resolve = [&](const std::string& s) -> fs::path {
    if (s.empty()) return {};
    fs::path p(s);
    return p.is_absolute() || base_dir.empty() ? p : (base_dir / p).lexically_normal();
  };
  RunConfig c;
  try {
    auto j = ordered_json::parse(text);
    static const std::set<std::string> known = {"N",        "max_retry",       "max_iterations", "macro",
                                                "selection", "bands",          "per_band",       "candidates",
                                                "seeds",    "llm",             "embedding",      "corpus_dir",
                                                "knowledge_store", "experience_store", "output_dir", "prices",
                                                "initial",  "trainer"};
    for (const auto& [k, v] : j.items()) {
      if (!known.contains(k)) throw ConfigError("unknown config field '" + k + "'");
    }
    c.N = j.value("N", c.N);
    c.max_retry = j.value("max_retry", c.max_retry);
    c.max_iterations = j.value("max_iterations", c.max_iterations);
    if (j.contains("macro")) c.macro = codegen::MacroConfig::from_json(j["macro"].dump());
    if (j.contains("selection")) {
      c.selection.bfs_period = j["selection"].value("bfs_period", c.selection.bfs_period);
      c.selection.max_children = j["selection"].value("max_children", c.selection.max_children);
    }
    if (j.contains("bands")) {
      c.bands.clear();
      for (const auto& b : j["bands"]) c.bands.push_back({b.at(0).get<double>(), b.at(1).get<double>()});
    }
    c.per_band = j.value("per_band", c.per_band);
    c.candidates = j.value("candidates", c.candidates);
    if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::int64_t>>();
    if (j.contains("llm")) {
      const auto& l = j["llm"];
      c.llm.kind = l.value("kind", c.llm.kind);
      c.llm.replay = resolve(l.value("replay", std::string()));
      c.llm.remote.endpoint = l.value("endpoint", c.llm.remote.endpoint);
      c.llm.remote.path = l.value("path", c.llm.remote.path);
      c.llm.remote.model = l.value("model", c.llm.remote.model);
      c.llm.remote.api_key_env = l.value("api_key_env", c.llm.remote.api_key_env);
      c.llm.remote.temperature = l.value("temperature", c.llm.remote.temperature);
      c.llm.remote.timeout_seconds = l.value("timeout_seconds", c.llm.remote.timeout_seconds);
    }
    if (j.contains("embedding")) {
      const auto& e = j["embedding"];
      c.embedding.kind = e.value("kind", c.embedding.kind);
      c.embedding.dimension = e.value("dimension", c.embedding.dimension);
      c.embedding.remote.endpoint = e.value("endpoint", c.embedding.remote.endpoint);
      c.embedding.remote.path = e.value("path", c.embedding.remote.path);
      c.embedding.remote.model = e.value("model", c.embedding.remote.model);
      c.embedding.remote.api_key_env = e.value("api_key_env", c.embedding.remote.api_key_env);
      c.embedding.remote.dimension = e.value("dimension", c.embedding.remote.dimension);
    }
    c.corpus_dir = resolve(j.value("corpus_dir", std::string()));
    c.knowledge_store = resolve(j.value("knowledge_store", std::string()));
    c.experience_store = resolve(j.value("experience_store", std::string()));
    c.output_dir = resolve(j.value("output_dir", std::string("run")));
    if (j.contains("prices")) {
      c.prices.input_per_million = j["prices"].value("input_per_million", c.prices.input_per_million);
      c.prices.output_per_million = j["prices"].value("output_per_million", c.prices.output_per_million);
    }
    if (j.contains("initial")) {
      c.cell = resolve(j["initial"].value("cell", std::string()));
      c.stem = resolve(j["initial"].value("stem", std::string()));
      c.downsample = resolve(j["initial"].value("downsample", std::string()));
    }
    if (j.contains("trainer")) {
      const auto& t = j["trainer"];
      c.trainer.kind = t.value("kind", c.trainer.kind);
      if (t.contains("command")) c.trainer.command = t["command"].get<std::vector<std::string>>();
      c.trainer.profile = resolve(t.value("profile", std::string()));
      c.trainer.diverge_below = t.value("diverge_below", c.trainer.diverge_below);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.check();
  return c;
}

RunConfig RunConfig::load(const fs::path& path) {
  std::string text;
  try {
    text = util::read_file(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return from_json(text, path.parent_path());
}

// ---------------------------------------------------------------------------
// Trainers

std::string TrainResult::to_json() const {
  ordered_json j;
  j["accuracy_val"] = accuracy_val ? ordered_json(*accuracy_val) : ordered_json(nullptr);
  j["accuracy_test"] = accuracy_test ? ordered_json(*accuracy_test) : ordered_json(nullptr);
  j["status"] = status;
  j["epochs_run"] = epochs_run;
  if (!reason.empty()) j["reason"] = reason;
  return j.dump(1) + "\n";
}

TrainResult TrainResult::from_json(std::string_view text) {
  try {
    auto j = ordered_json::parse(text);
    TrainResult r;
    if (j.contains("accuracy_val") && !j["accuracy_val"].is_null()) r.accuracy_val = j["accuracy_val"].get<double>();
    if (j.contains("accuracy_test") && !j["accuracy_test"].is_null()) {
      r.accuracy_test = j["accuracy_test"].get<double>();
    }
    r.status = j.at("status").get<std::string>();
    r.epochs_run = j.value("epochs_run", 0);
    r.reason = j.value("reason", std::string());
    if (r.status != "ok" && r.status != "diverged" && r.status != "failed") {
      throw ConfigError("result status must be ok, diverged or failed");
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("result JSON: ") + e.what());
  }
}

double StubTrainer::pseudo_accuracy(std::string_view digest, int salt) {
  std::string h = util::sha256_hex(std::string(digest) + "#" + std::to_string(salt));
  double u = static_cast<double>(std::stoul(h.substr(0, 8), nullptr, 16)) / 4294967296.0;
  return std::round((0.5 + 0.45 * u) * 1e4) / 1e4;
}

TrainResult StubTrainer::train(const TrainJob& job) {
  TrainResult r;
  double acc = pseudo_accuracy(job.digest, 0);
  r.epochs_run = 1;
  if (acc < diverge_below_) {
    r.status = "diverged";
    r.reason = "stub loss rose";
  } else {
    r.accuracy_val = acc;
    r.accuracy_test = pseudo_accuracy(job.digest, 1);
  }
  util::write_file_atomic(job.result, r.to_json());
  return r;
}

TrainResult CommandTrainer::train(const TrainJob& job) {
  std::vector<std::string> args = argv_;
  args.insert(args.end(), {"--network", job.network.string()});
  if (!profile_.empty()) args.insert(args.end(), {"--profile", profile_.string()});
  args.insert(args.end(), {"--out", job.result.string()});
  std::vector<char*> cargs;
  for (auto& a : args) cargs.push_back(a.data());
  cargs.push_back(nullptr);

  std::error_code ec;
  fs::remove(job.result, ec);
  pid_t pid = 0;
  if (int rc = posix_spawnp(&pid, cargs[0], nullptr, nullptr, cargs.data(), environ); rc != 0) {
    return {std::nullopt, std::nullopt, "failed", 0, "cannot start trainer: " + std::string(std::strerror(rc))};
  }
  int status = 0;
  waitpid(pid, &status, 0);
  if (!fs::exists(job.result)) {
    int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    TrainResult r{std::nullopt, std::nullopt, "failed", 0, "trainer exited with " + std::to_string(code)};
    util::write_file_atomic(job.result, r.to_json());
    return r;
  }
  return TrainResult::from_json(util::read_file(job.result));
}

std::unique_ptr<Trainer> make_trainer(const TrainerSettings& s) {
  if (s.kind == "stub") return std::make_unique<StubTrainer>(s.diverge_below);
  if (s.kind == "command") return std::make_unique<CommandTrainer>(s.command, s.profile);
  throw ConfigError("unknown trainer kind '" + s.kind + "'");
}

std::unique_ptr<llm::LLMClient> make_llm(const LlmSettings& s) {
  if (s.kind == "replay") return llm::ReplayClient::from_file(s.replay);
  if (s.kind == "remote") return std::make_unique<llm::RemoteClient>(s.remote);
  throw ConfigError("unknown llm kind '" + s.kind + "'");
}

std::unique_ptr<knowledge::EmbeddingProvider> make_embedder(const EmbeddingSettings& s) {
  if (s.kind == "hashing") return std::make_unique<knowledge::HashingEmbedder>(s.dimension);
  if (s.kind == "remote") return std::make_unique<knowledge::RemoteEmbedder>(s.remote);
  throw ConfigError("unknown embedding kind '" + s.kind + "'");
}

// ---------------------------------------------------------------------------
// Design loop

namespace {

dsl::Block load_block(const fs::path& path) {
  try {
    return dsl::parse_block(util::read_file(path));
  } catch (const ParseError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

std::uintmax_t file_size_or_zero(const fs::path& p) {
  std::error_code ec;
  auto n = fs::file_size(p, ec);
  return ec ? 0 : n;
}

void truncate_to(const fs::path& p, std::uintmax_t n) {
  if (!fs::exists(p)) {
    if (n == 0) return;
    throw Error("cannot resume: " + p.string() + " is missing");
  }
  if (fs::file_size(p) < n) throw Error("cannot resume: " + p.string() + " is shorter than its committed size");
  fs::resize_file(p, n);
}

// Ends an iteration early once its outcome is set.
struct Stop {};

class Run {
 public:
  Run(const RunConfig& cfg, const RunOptions& opt) : cfg_(cfg), opt_(opt), dir_(cfg.output_dir) {}

  DesignResult execute();

 private:
  struct Committed {
    std::int64_t iteration = 0;
    int n = 0;
    std::string phase;  // loop | done
    std::uintmax_t history_bytes = 0;
    std::uintmax_t transcript_bytes = 0;
    std::int64_t input_tokens = 0;
    std::int64_t output_tokens = 0;
    std::int64_t calls = 0;
  };

  void open_collaborators();
  void load_knowledge();
  void train_root();
  history::Entry iterate(std::int64_t iteration);
  void write_arch(const std::string& id, const tree::ArchSet& arch);
  std::optional<TrainResult> build_and_train(const std::string& id, const tree::ArchSet& arch,
                                             const std::string& digest, std::string& detail);
  void commit(const std::string& phase);
  bool restore();
  DesignResult finish();

  std::int64_t in_tokens() const { return base_.input_tokens + metered_->input_tokens(); }
  std::int64_t out_tokens() const { return base_.output_tokens + metered_->output_tokens(); }
  std::int64_t calls() const { return base_.calls + metered_->calls(); }

  const RunConfig& cfg_;
  const RunOptions& opt_;
  fs::path dir_;

  std::unique_ptr<llm::LLMClient> own_llm_;
  std::unique_ptr<knowledge::EmbeddingProvider> own_embedder_;
  std::unique_ptr<Trainer> own_trainer_;
  llm::LLMClient* base_llm_ = nullptr;
  llm::ReplayClient* replay_ = nullptr;
  std::unique_ptr<llm::RecordingClient> recorder_;
  std::unique_ptr<llm::MeteredClient> metered_;
  knowledge::EmbeddingProvider* embedder_ = nullptr;
  Trainer* trainer_ = nullptr;

  std::optional<knowledge::VectorStore> kstore_;
  std::optional<knowledge::VectorStore> estore_;
  std::optional<tree::ModTree> tree_;
  tree::ArchSet root_arch_;
  history::HistoryLog history_;
  Committed base_;  // totals carried over from the committed state
  std::int64_t iteration_ = 0;
  int n_ = 0;
};

void Run::open_collaborators() {
  base_llm_ = opt_.llm;
  if (!base_llm_) {
    own_llm_ = make_llm(cfg_.llm);
    base_llm_ = own_llm_.get();
  }
  replay_ = dynamic_cast<llm::ReplayClient*>(base_llm_);
  recorder_ = std::make_unique<llm::RecordingClient>(*base_llm_, dir_ / "transcripts.jsonl");
  metered_ = std::make_unique<llm::MeteredClient>(*recorder_);
  embedder_ = opt_.embedder;
  if (!embedder_) {
    own_embedder_ = make_embedder(cfg_.embedding);
    embedder_ = own_embedder_.get();
  }
  trainer_ = opt_.trainer;
  if (!trainer_) {
    own_trainer_ = make_trainer(cfg_.trainer);
    trainer_ = own_trainer_.get();
  }
}

void Run::load_knowledge() {
  if (!cfg_.knowledge_store.empty() && fs::exists(cfg_.knowledge_store)) {
    kstore_ = knowledge::VectorStore::load(cfg_.knowledge_store);
  } else if (fs::exists(dir_ / "knowledge.jsonl")) {
    kstore_ = knowledge::VectorStore::load(dir_ / "knowledge.jsonl");
  } else {
    if (cfg_.corpus_dir.empty()) throw ConfigError("knowledge store " + cfg_.knowledge_store.string() + " not found");
    kstore_.emplace(embedder_->dimension());
    std::set<std::string> seen;
    knowledge::ingest_corpus(cfg_.corpus_dir, *metered_, *embedder_, *kstore_, seen);
    kstore_->save(dir_ / "knowledge.jsonl");
  }
  if (kstore_->dimension() != embedder_->dimension()) {
    throw ConfigError("knowledge store dimension does not match the embedder");
  }
  if (!cfg_.experience_store.empty() && fs::exists(cfg_.experience_store)) {
    estore_ = knowledge::VectorStore::load(cfg_.experience_store);
  } else {
    estore_.emplace(embedder_->dimension());
  }
}

void Run::write_arch(const std::string& id, const tree::ArchSet& arch) {
  fs::path d = dir_ / "archs" / id;
  fs::create_directories(d);
  util::write_file_atomic(d / "cell.block", dsl::print_block(arch.cell));
  if (arch.stem) util::write_file_atomic(d / "stem.block", dsl::print_block(*arch.stem));
  if (arch.downsample) util::write_file_atomic(d / "downsample.block", dsl::print_block(*arch.downsample));
}

std::optional<TrainResult> Run::build_and_train(const std::string& id, const tree::ArchSet& arch,
                                                const std::string& digest, std::string& detail) {
  int width = 0;
  try {
    width = codegen::search_width(arch.cell, *arch.stem, *arch.downsample, cfg_.macro);
  } catch (const Infeasible& e) {
    detail = e.what();
    return std::nullopt;
  }
  auto net = codegen::assemble(arch.cell, *arch.stem, *arch.downsample, cfg_.macro, width);
  write_arch(id, arch);
  fs::path d = dir_ / "archs" / id;
  for (const auto& [name, text] : codegen::emit(net, "json")) util::write_file_atomic(d / name, text);
  return trainer_->train({d / "network.json", d / "result.json", digest});
}

void Run::train_root() {
  root_arch_ = {load_block(cfg_.cell), load_block(cfg_.stem), load_block(cfg_.downsample)};
  const std::pair<const dsl::Block*, check::Role> parts[] = {{&root_arch_.cell, check::Role::kCell},
                                                             {&*root_arch_.stem, check::Role::kStem},
                                                             {&*root_arch_.downsample, check::Role::kDownsample}};
  for (const auto& [block, role] : parts) {
    auto report = check::validate(*block, role);
    if (!report.ok()) {
      throw ConfigError("initial " + std::string(check::role_name(role)) + " block is invalid: " + report.context());
    }
  }
  tree_.emplace(root_arch_);
  const std::string root = tree_->root_id();
  std::string digest = tree_->node(root).digest;
  std::string detail;
  auto result = build_and_train(root, root_arch_, digest, detail);
  if (!result) throw ConfigError("initial architecture does not fit the budgets: " + detail);
  if (result->status != "ok" || !result->accuracy_val) {
    throw Error("initial architecture failed training: " + result->status + " " + result->reason);
  }
  tree_->set_result(root, *result->accuracy_val, result->accuracy_test);
}

history::Entry Run::iterate(std::int64_t iteration) {
  history::Entry e;
  e.id = "h" + std::to_string(iteration);
  e.iteration = iteration;
  const std::int64_t in0 = in_tokens();
  const std::int64_t out0 = out_tokens();
  auto& llm = *metered_;

  try {
    const std::string candidate = tree_->select_candidate(cfg_.selection, iteration);
    const tree::TreeNode& cand = tree_->node(candidate);
    e.parent_id = candidate;
    e.parent_accuracy = cand.accuracy;

    // Inspirations already tried on this candidate are not offered again.
    std::set<std::string> applied;
    for (const auto& h : history_) {
      if (h.parent_id == candidate) applied.insert(h.source);
    }
    auto items = knowledge::retrieve_inspirations(*kstore_, *embedder_, dsl::print_block(cand.arch.cell),
                                                  cfg_.per_band, cfg_.bands);
    std::erase_if(items, [&](const knowledge::KnowledgeItem& k) { return applied.contains(k.id); });
    if (items.size() > cfg_.candidates) items.resize(cfg_.candidates);
    if (items.empty()) {
      e.outcome = "error";
      e.detail = "no untried inspirations for " + candidate;
      throw Stop{};
    }
    std::vector<std::pair<int, std::string>> listing;
    for (std::size_t i = 0; i < items.size(); ++i) listing.emplace_back(static_cast<int>(i + 1), items[i].text);
    auto ranked = agents::proposer_rank(cand.arch.cell, listing, llm);
    const auto& chosen = items.at(static_cast<std::size_t>(ranked.order.front() - 1));
    e.proposal = chosen.text;
    e.source = chosen.id;

    std::vector<knowledge::ExperienceRecord> exps;
    if (!estore_->empty()) exps = knowledge::retrieve_experience(*estore_, *embedder_, e.proposal, "cell");
    auto mod = agents::modifier_dialogue({candidate, chosen.text, chosen.id}, cand.arch.cell, exps,
                                         check::Role::kCell, cfg_.max_retry, llm);
    e.dialogue = mod.dialogue.messages;
    e.attempts = mod.attempts;
    if (!mod.success) {
      e.outcome = "invalid";
      e.detail = "no valid block after " + std::to_string(mod.attempts.size()) + " replies";
      throw Stop{};
    }
    const dsl::Block& cell = *mod.block;
    e.digest = graph::canonical_hash(cell).digest;
    if (auto dup = tree_->find_digest(*e.digest)) {
      e.outcome = "duplicate";
      e.node_id = *dup;
      e.detail = "isomorphic to " + *dup;
      throw Stop{};
    }

    std::vector<agents::CompanionExample> examples = {
        {root_arch_.cell, *root_arch_.stem, *root_arch_.downsample}};
    if (candidate != tree_->root_id() && cand.arch.stem && cand.arch.downsample) {
      examples.push_back({cand.arch.cell, *cand.arch.stem, *cand.arch.downsample});
    }
    auto comp = agents::modifier_companion_blocks(cell, examples, llm, cfg_.max_retry);
    if (!comp.success) {
      e.outcome = "companion-failed";
      e.detail = "no valid stem/downsample pair after " + std::to_string(comp.attempts.size()) + " replies";
      throw Stop{};
    }
    tree::ArchSet arch{cell, *comp.stem, *comp.downsample};

    int width = 0;
    try {
      width = codegen::search_width(arch.cell, *arch.stem, *arch.downsample, cfg_.macro);
    } catch (const Infeasible& ex) {
      e.outcome = "infeasible";
      e.detail = ex.what();
      throw Stop{};
    }
    (void)width;
    auto added = tree_->add_result(candidate, chosen.text, arch, std::nullopt);
    e.node_id = added.id;
    std::string detail;
    auto result = build_and_train(added.id, arch, *e.digest, detail);
    if (result && result->status == "ok" && result->accuracy_val) {
      tree_->set_result(added.id, *result->accuracy_val, result->accuracy_test);
      e.accuracy = result->accuracy_val;
      e.accuracy_test = result->accuracy_test;
      e.outcome = "trained";
      ++n_;
    } else {
      tree_->mark_failed(added.id);
      e.outcome = "failed-training";
      e.detail = result ? result->status + (result->reason.empty() ? "" : ": " + result->reason) : detail;
    }
  } catch (const ReplayMismatch&) {
    throw;
  } catch (const MalformedResponse& ex) {
    e.outcome = "error";
    e.detail = ex.what();
  } catch (const ProviderError& ex) {
    e.outcome = "error";
    e.detail = ex.what();
  } catch (const EmptyStore&) {
    e.outcome = "error";
    e.detail = "knowledge store is empty";
  } catch (const Stop&) {
    // outcome already recorded
  }
  e.input_tokens = in_tokens() - in0;
  e.output_tokens = out_tokens() - out0;
  e.clock = calls();
  return e;
}

void Run::commit(const std::string& phase) {
  util::write_file_atomic(dir_ / "tree.json", tree_->to_json());
  ordered_json s;
  s["schema"] = "nadkit-run-v1";
  s["phase"] = phase;
  s["iteration"] = iteration_;
  s["n"] = n_;
  s["history_bytes"] = file_size_or_zero(dir_ / "history.jsonl");
  s["transcript_bytes"] = file_size_or_zero(dir_ / "transcripts.jsonl");
  s["input_tokens"] = in_tokens();
  s["output_tokens"] = out_tokens();
  s["calls"] = calls();
  s["replay"] = replay_ ? ordered_json::parse(replay_->export_state()) : ordered_json(nullptr);
  s["tree"] = ordered_json::parse(tree_->to_json());
  util::write_file_atomic(dir_ / "state.json", s.dump(1) + "\n");
}

bool Run::restore() {
  if (!fs::exists(dir_ / "state.json")) return false;
  auto s = ordered_json::parse(util::read_file(dir_ / "state.json"));
  if (s.value("schema", "") != "nadkit-run-v1") throw ConfigError("state.json has an unknown schema");
  base_.phase = s.at("phase").get<std::string>();
  iteration_ = s.at("iteration").get<std::int64_t>();
  n_ = s.at("n").get<int>();
  base_.history_bytes = s.at("history_bytes").get<std::uintmax_t>();
  base_.transcript_bytes = s.at("transcript_bytes").get<std::uintmax_t>();
  base_.input_tokens = s.at("input_tokens").get<std::int64_t>();
  base_.output_tokens = s.at("output_tokens").get<std::int64_t>();
  base_.calls = s.at("calls").get<std::int64_t>();
  if (replay_ && !s.at("replay").is_null()) replay_->restore_state(s.at("replay").dump());
  tree_ = tree::ModTree::from_json(s.at("tree").dump());
  truncate_to(dir_ / "history.jsonl", base_.history_bytes);
  truncate_to(dir_ / "transcripts.jsonl", base_.transcript_bytes);
  history_ = history::read_history(dir_ / "history.jsonl");
  root_arch_ = tree_->node(tree_->root_id()).arch;
  return true;
}

DesignResult Run::finish() {
  DesignResult r{tree_->best(), *tree_, history_};
  r.trained = n_;
  r.iterations = iteration_;
  r.exhausted = n_ < cfg_.N;
  r.input_tokens = in_tokens();
  r.output_tokens = out_tokens();
  r.cost = account_cost(r.input_tokens, r.output_tokens, cfg_.prices);
  return r;
}

DesignResult Run::execute() {
  fs::create_directories(dir_);
  open_collaborators();

  bool resumed = false;
  if (opt_.resume) {
    resumed = restore();
  } else if (fs::exists(dir_ / "state.json")) {
    throw ConfigError(dir_.string() + " already holds a run; resume it or choose another output_dir");
  }
  if (!resumed) {
    std::error_code ec;
    for (const char* f : {"transcripts.jsonl", "history.jsonl", "knowledge.jsonl", "experience.jsonl"}) {
      fs::remove(dir_ / f, ec);
    }
    fs::remove_all(dir_ / "archs", ec);
    RunConfig snapshot = cfg_;
    snapshot.output_dir.clear();
    util::write_file_atomic(dir_ / "config.json", snapshot.to_json());
  }
  load_knowledge();
  if (!resumed) {
    train_root();
    commit("loop");
  } else if (base_.phase == "done") {
    return finish();
  }

  while (n_ < cfg_.N && iteration_ < cfg_.iteration_cap()) {
    ++iteration_;
    auto entry = iterate(iteration_);
    util::append_file(dir_ / "history.jsonl", entry.to_json_line() + "\n");
    history_.push_back(entry);
    if (opt_.crash_after_iteration && *opt_.crash_after_iteration == iteration_) std::_Exit(75);
    commit("loop");
    if (opt_.on_iteration) opt_.on_iteration(entry);
  }

  knowledge::reflect_history(history_, *tree_, *metered_, *embedder_, *estore_);
  estore_->save(dir_ / "experience.jsonl");
  util::write_file_atomic(dir_ / "tree.dot", tree_->to_graphviz());

  DesignResult r = finish();
  ordered_json sum;
  sum["best"] = r.best_id;
  sum["best_accuracy"] = *tree_->node(r.best_id).accuracy;
  sum["trained"] = r.trained;
  sum["iterations"] = r.iterations;
  sum["exhausted"] = r.exhausted;
  sum["nodes"] = tree_->size();
  sum["input_tokens"] = r.input_tokens;
  sum["output_tokens"] = r.output_tokens;
  sum["cost"] = util::format_double(r.cost);
  util::write_file_atomic(dir_ / "summary.json", sum.dump(1) + "\n");
  commit("done");
  return r;
}

}  // namespace

DesignResult run_design(const RunConfig& config, const RunOptions& options) {
  config.check();
  Run run(config, options);
  return run.execute();
}

std::vector<std::string> compare_dirs(const fs::path& a, const fs::path& b) {
  auto listing = [](const fs::path& root) {
    std::set<std::string> out;
    if (!fs::exists(root)) return out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
      if (e.is_regular_file()) out.insert(fs::relative(e.path(), root).generic_string());
    }
    return out;
  };
  auto la = listing(a);
  auto lb = listing(b);
  std::set<std::string> all = la;
  all.insert(lb.begin(), lb.end());
  std::vector<std::string> diff;
  for (const auto& rel : all) {
    if (!la.contains(rel) || !lb.contains(rel) || util::read_file(a / rel) != util::read_file(b / rel)) {
      diff.push_back(rel);
    }
  }
  return diff;
}

// ---------------------------------------------------------------------------
// Benchmark

std::vector<BenchSample> read_bench_samples(const fs::path& path) {
  std::vector<BenchSample> out;
  int line_no = 0;
  for (const auto& line : util::split_lines(util::read_file(path))) {
    ++line_no;
    if (util::trim(line).empty()) continue;
    try {
      auto j = ordered_json::parse(line);
      BenchSample s{j.at("id").get<std::string>(), dsl::parse_block(j.at("block").get<std::string>()),
                    j.at("suggestion").get<std::string>(), check::Role::kCell, std::nullopt};
      if (j.contains("role")) {
        auto role = check::role_from_name(j["role"].get<std::string>());
        if (!role) throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": unknown role");
        s.role = *role;
      }
      if (j.contains("expected") && !j["expected"].is_null()) {
        s.expected = dsl::parse_block(j["expected"].get<std::string>());
      }
      out.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

bool IsomorphismJudge::meets(const BenchSample& sample, const dsl::Block& produced) {
  return sample.expected && graph::is_isomorphic(*sample.expected, produced);
}

VerdictFileJudge::VerdictFileJudge(const fs::path& path) {
  try {
    auto j = ordered_json::parse(util::read_file(path));
    for (const auto& [k, v] : j.items()) verdicts_[k] = v.get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

bool VerdictFileJudge::meets(const BenchSample& sample, const dsl::Block&) {
  auto it = verdicts_.find(sample.id);
  return it != verdicts_.end() && it->second;
}

BenchMetrics compute_metrics(std::vector<SampleOutcome> outcomes, const Prices& prices) {
  BenchMetrics m;
  m.total = static_cast<int>(outcomes.size());
  std::vector<double> per;
  for (const auto& o : outcomes) {
    if (o.executable) ++m.executable;
    if (o.executable && o.correct) ++m.correct;
    m.input_tokens += o.input_tokens;
    m.output_tokens += o.output_tokens;
    per.push_back(static_cast<double>(o.input_tokens + o.output_tokens) / 1000.0);
  }
  if (m.total > 0) {
    m.E = static_cast<double>(m.executable) / m.total;
    m.SR = static_cast<double>(m.correct) / m.total;
    double mean = 0.0;
    for (double v : per) mean += v;
    mean /= m.total;
    double var = 0.0;
    for (double v : per) var += (v - mean) * (v - mean);
    m.tokens_mean_k = mean;
    m.tokens_stddev_k = std::sqrt(var / m.total);
  }
  if (m.executable > 0) {
    m.Q = static_cast<double>(m.correct) / m.executable;
  } else {
    m.q_undefined = true;
  }
  m.cost = account_cost(m.input_tokens, m.output_tokens, prices);
  m.samples = std::move(outcomes);
  return m;
}

std::string BenchMetrics::to_json() const {
  ordered_json j;
  j["total"] = total;
  j["executable"] = executable;
  j["correct"] = correct;
  j["E"] = E;
  j["Q"] = Q;
  j["SR"] = SR;
  j["q_undefined"] = q_undefined;
  j["input_tokens"] = input_tokens;
  j["output_tokens"] = output_tokens;
  j["tokens_mean_k"] = tokens_mean_k;
  j["tokens_stddev_k"] = tokens_stddev_k;
  j["cost"] = cost;
  ordered_json arr = ordered_json::array();
  for (const auto& s : samples) {
    arr.push_back({{"id", s.id},
                   {"executable", s.executable},
                   {"correct", s.correct},
                   {"input_tokens", s.input_tokens},
                   {"output_tokens", s.output_tokens},
                   {"block", s.block},
                   {"detail", s.detail}});
  }
  j["samples"] = std::move(arr);
  return j.dump(1) + "\n";
}

BenchMetrics run_benchmark(std::span<const BenchSample> samples, Judge& judge, llm::LLMClient& llm,
                           const BenchConfig& config) {
  std::vector<SampleOutcome> out(samples.size());
  std::atomic<std::size_t> next{0};
  std::mutex judge_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < samples.size(); i = next++) {
      const BenchSample& s = samples[i];
      SampleOutcome& o = out[i];
      o.id = s.id;
      try {
        auto r = agents::modifier_dialogue({s.id, s.suggestion, "benchmark"}, s.base, {}, s.role, config.max_retry, llm);
        o.input_tokens = r.dialogue.input_tokens;
        o.output_tokens = r.dialogue.output_tokens;
        o.executable = r.success;
        if (r.success) {
          o.block = dsl::print_block(*r.block);
          std::lock_guard lock(judge_mu);
          o.correct = judge.meets(s, *r.block);
        } else {
          o.detail = "no valid block after " + std::to_string(r.attempts.size()) + " replies";
        }
      } catch (const Error& e) {
        o.detail = e.what();
      }
    }
  };
  int n = std::max(1, std::min<int>(config.threads, static_cast<int>(samples.size())));
  std::vector<std::thread> pool;
  for (int t = 0; t < n; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return compute_metrics(std::move(out), config.prices);
}

TranscriptReport verify_transcript(const fs::path& path) {
  auto records = llm::read_transcript(path);
  TranscriptReport r;
  std::set<std::string> fps;
  for (const auto& rec : records) {
    fps.insert(llm::fingerprint(rec.messages));
    r.input_tokens += rec.reply.input_tokens;
    r.output_tokens += rec.reply.output_tokens;
  }
  r.records = records.size();
  r.fingerprints = fps.size();
  return r;
}

}  // namespace nadkit::orch
