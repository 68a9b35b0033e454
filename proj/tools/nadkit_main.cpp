// Copyright 2026 The nadkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// nadkit command line: ingest, design, bench, tree export, replay verify,
// plus validate / emit / cost helpers.

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <set>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "nadkit/codegen.hpp"
#include "nadkit/knowledge.hpp"
#include "nadkit/modtree.hpp"
#include "nadkit/orchestrator.hpp"
#include "nadkit/validator.hpp"
#include "util.hpp"

namespace fs = std::filesystem;
using namespace nadkit;

namespace {

int cmd_ingest(const fs::path& config_path, const fs::path& out) {
  auto cfg = orch::RunConfig::load(config_path);
  if (cfg.corpus_dir.empty()) throw ConfigError("config has no corpus_dir");
  auto llm = orch::make_llm(cfg.llm);
  auto embedder = orch::make_embedder(cfg.embedding);
  fs::path target = out.empty() ? cfg.knowledge_store : out;
  if (target.empty()) throw ConfigError("no output store: set knowledge_store or pass --out");
  knowledge::VectorStore store = fs::exists(target) ? knowledge::VectorStore::load(target)
                                                    : knowledge::VectorStore(embedder->dimension());
  std::set<std::string> seen;
  for (const auto& e : store.entries()) {
    if (auto it = e.metadata.find("paper"); it != e.metadata.end()) seen.insert(it->second);
  }
  auto stats = knowledge::ingest_corpus(cfg.corpus_dir, *llm, *embedder, store, seen);
  store.save(target);
  std::cout << "papers " << stats.papers << ", relevant " << stats.relevant << ", items " << stats.items
            << ", skipped " << stats.skipped << ", store size " << store.size() << "\n";
  for (const auto& err : stats.errors) std::cerr << "warning: " << err << "\n";
  return 0;
}

int cmd_design(const fs::path& config_path, const fs::path& output, int n, bool resume, std::int64_t crash_after) {
  auto cfg = orch::RunConfig::load(config_path);
  if (!output.empty()) cfg.output_dir = output;
  if (n > 0) cfg.N = n;
  orch::RunOptions opt;
  opt.resume = resume;
  if (crash_after > 0) opt.crash_after_iteration = crash_after;
  opt.on_iteration = [](const history::Entry& e) {
    std::cerr << e.id << " " << e.parent_id << " -> " << e.outcome;
    if (e.node_id) std::cerr << " " << *e.node_id;
    if (e.accuracy) std::cerr << " acc=" << util::format_double(*e.accuracy);
    std::cerr << "\n";
  };
  auto r = orch::run_design(cfg, opt);
  std::cout << "best " << r.best_id << " accuracy " << util::format_double(*r.tree.node(r.best_id).accuracy)
            << "\ntrained " << r.trained << " in " << r.iterations << " iterations, tree size " << r.tree.size()
            << "\ntokens in " << r.input_tokens << " out " << r.output_tokens << ", cost $"
            << util::format_double(r.cost) << "\n";
  if (r.exhausted) std::cout << "stopped at the iteration cap before reaching N\n";
  return 0;
}

int cmd_bench(const fs::path& config_path, const fs::path& samples_path, const std::string& judge_kind,
              const fs::path& verdicts, int threads, const fs::path& out) {
  auto cfg = orch::RunConfig::load(config_path);
  auto llm = orch::make_llm(cfg.llm);
  auto samples = orch::read_bench_samples(samples_path);
  if (samples.empty()) throw ConfigError("no benchmark samples");
  std::unique_ptr<orch::Judge> judge;
  if (judge_kind == "isomorphism") {
    judge = std::make_unique<orch::IsomorphismJudge>();
  } else {
    judge = std::make_unique<orch::VerdictFileJudge>(verdicts);
  }
  orch::BenchConfig bc;
  bc.max_retry = cfg.max_retry;
  bc.threads = threads;
  bc.prices = cfg.prices;
  auto m = orch::run_benchmark(samples, *judge, *llm, bc);
  char line[256];
  std::snprintf(line, sizeof line, "E=%.3f Q=%.3f%s SR=%.3f tokens(K)=%.2f+-%.2f cost=$%.4f\n", m.E, m.Q,
                m.q_undefined ? " (undefined: no executable samples)" : "", m.SR, m.tokens_mean_k,
                m.tokens_stddev_k, m.cost);
  std::cout << line;
  if (!out.empty()) util::write_file_atomic(out, m.to_json());
  return 0;
}

int cmd_tree_export(const fs::path& tree_path, const fs::path& out) {
  auto t = tree::ModTree::from_json(util::read_file(tree_path));
  std::string dot = t.to_graphviz();
  if (out.empty()) {
    std::cout << dot;
  } else {
    util::write_file_atomic(out, dot);
  }
  return 0;
}

int cmd_replay_verify(const fs::path& transcript, const fs::path& config_path, int runs) {
  auto rep = orch::verify_transcript(transcript);
  std::cout << "transcript: " << rep.records << " records, " << rep.fingerprints << " distinct requests, "
            << rep.input_tokens << " input / " << rep.output_tokens << " output tokens\n";
  if (config_path.empty()) return 0;

  auto cfg = orch::RunConfig::load(config_path);
  cfg.llm.kind = "replay";
  cfg.llm.replay = transcript;
  fs::path scratch = fs::temp_directory_path() / ("nadkit-verify-" + std::to_string(::getpid()));
  fs::remove_all(scratch);
  std::vector<fs::path> dirs;
  for (int i = 0; i < runs; ++i) {
    cfg.output_dir = scratch / ("run" + std::to_string(i));
    orch::run_design(cfg);
    dirs.push_back(cfg.output_dir);
  }
  int bad = 0;
  for (std::size_t i = 1; i < dirs.size(); ++i) {
    for (const auto& f : orch::compare_dirs(dirs[0], dirs[i])) {
      std::cout << "differs: run" << i << "/" << f << "\n";
      ++bad;
    }
  }
  fs::remove_all(scratch);
  std::cout << (bad ? "replay verify: FAIL" : "replay verify: OK") << " (" << runs << " runs)\n";
  return bad ? 1 : 0;
}

int cmd_validate(const fs::path& block_path, const std::string& role_name) {
  auto role = check::role_from_name(role_name);
  if (!role) throw ConfigError("unknown role '" + role_name + "'");
  auto block = dsl::parse_block(util::read_file(block_path));
  auto report = check::validate(block, *role);
  std::cout << report.feedback_json() << "\n";
  return report.ok() ? 0 : 1;
}

int cmd_emit(const fs::path& cell, const fs::path& stem, const fs::path& down, const std::string& backend,
             int width, const fs::path& out_dir) {
  codegen::MacroConfig macro;
  auto c = dsl::parse_block(util::read_file(cell));
  auto s = dsl::parse_block(util::read_file(stem));
  auto d = dsl::parse_block(util::read_file(down));
  if (width <= 0) width = codegen::search_width(c, s, d, macro);
  auto net = codegen::assemble(c, s, d, macro, width);
  auto r = codegen::count_resources(net);
  fs::create_directories(out_dir);
  for (const auto& [name, text] : codegen::emit(net, backend)) util::write_file_atomic(out_dir / name, text);
  std::cout << "width " << width << ", params " << r.params << ", MACs " << r.macs << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nadkit: LLM-driven neural architecture design"};
  app.require_subcommand(1);

  fs::path config;
  fs::path out;

  auto* ingest = app.add_subcommand("ingest", "Ingest a paper corpus into a knowledge store");
  ingest->add_option("-c,--config", config, "Run config")->required();
  ingest->add_option("-o,--out", out, "Store path (default: knowledge_store from config)");

  auto* design = app.add_subcommand("design", "Run the design loop");
  fs::path design_out;
  int n = 0;
  bool resume = false;
  std::int64_t crash_after = 0;
  design->add_option("-c,--config", config, "Run config")->required();
  design->add_option("-o,--output", design_out, "Run directory (overrides output_dir)");
  design->add_option("-N,--count", n, "Architectures to train (overrides N)");
  design->add_flag("--resume", resume, "Continue an interrupted run");
  design->add_option("--crash-after", crash_after, "Exit abruptly after this iteration (testing)");

  auto* bench = app.add_subcommand("bench", "Run the modification benchmark");
  fs::path samples;
  std::string judge = "isomorphism";
  fs::path verdicts;
  int threads = 4;
  bench->add_option("-c,--config", config, "Run config (llm, prices, max_retry)")->required();
  bench->add_option("-s,--samples", samples, "Samples (JSON lines)")->required();
  bench->add_option("--judge", judge, "isomorphism | verdicts")->check(CLI::IsMember({"isomorphism", "verdicts"}));
  bench->add_option("--verdicts", verdicts, "Verdict file for --judge verdicts");
  bench->add_option("-j,--threads", threads, "Parallel samples");
  bench->add_option("-o,--out", out, "Write metrics JSON");

  auto* tree_cmd = app.add_subcommand("tree", "Modification tree tools");
  tree_cmd->require_subcommand(1);
  auto* tree_export = tree_cmd->add_subcommand("export", "Write the tree as GraphViz");
  fs::path tree_path;
  tree_export->add_option("tree", tree_path, "tree.json")->required();
  tree_export->add_option("-o,--out", out, "Output .dot (default stdout)");

  auto* replay = app.add_subcommand("replay", "Replay transcript tools");
  replay->require_subcommand(1);
  auto* verify = replay->add_subcommand("verify", "Check a transcript, optionally replaying a run several times");
  fs::path transcript;
  int runs = 3;
  verify->add_option("transcript", transcript, "Transcript (JSON lines)")->required();
  verify->add_option("-c,--config", config, "Replay this run config and compare outputs");
  verify->add_option("--runs", runs, "Replays to compare")->check(CLI::Range(2, 100));

  auto* validate = app.add_subcommand("validate", "Validate a block file");
  fs::path block_path;
  std::string role = "cell";
  validate->add_option("block", block_path, "Block file")->required();
  validate->add_option("-r,--role", role, "cell | stem | downsample");

  auto* emit = app.add_subcommand("emit", "Assemble and emit a network");
  fs::path cell;
  fs::path stem;
  fs::path down;
  std::string backend = "json";
  int width = 0;
  emit->add_option("--cell", cell)->required();
  emit->add_option("--stem", stem)->required();
  emit->add_option("--downsample", down)->required();
  emit->add_option("-b,--backend", backend, "json | pytorch");
  emit->add_option("-w,--width", width, "Base width (default: searched under budgets)");
  emit->add_option("-o,--out", out, "Output directory")->required();

  auto* cost = app.add_subcommand("cost", "Token cost of a run history or raw token counts");
  fs::path history_path;
  std::int64_t in_tokens = 0;
  std::int64_t out_tokens = 0;
  orch::Prices prices;
  cost->add_option("--history", history_path, "history.jsonl");
  cost->add_option("--input-tokens", in_tokens);
  cost->add_option("--output-tokens", out_tokens);
  cost->add_option("--price-in", prices.input_per_million, "Per 1M input tokens");
  cost->add_option("--price-out", prices.output_per_million, "Per 1M output tokens");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) return cmd_ingest(config, out);
    if (*design) return cmd_design(config, design_out, n, resume, crash_after);
    if (*bench) {
      if (judge == "verdicts" && verdicts.empty()) throw ConfigError("--judge verdicts needs --verdicts");
      return cmd_bench(config, samples, judge, verdicts, threads, out);
    }
    if (*tree_export) return cmd_tree_export(tree_path, out);
    if (*verify) return cmd_replay_verify(transcript, config, runs);
    if (*validate) return cmd_validate(block_path, role);
    if (*emit) return cmd_emit(cell, stem, down, backend, width, out);
    if (*cost) {
      double c = 0;
      if (!history_path.empty()) {
        c = orch::account_cost(history::read_history(history_path), prices);
      } else {
        c = orch::account_cost(in_tokens, out_tokens, prices);
      }
      std::printf("$%.2f\n", c);
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
