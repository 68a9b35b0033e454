// Copyright 2026 The nadkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "nadkit/codegen.hpp"
#include "nadkit/graphops.hpp"
#include "nadkit/orchestrator.hpp"
#include "nadkit/validator.hpp"
#include "support.hpp"
#include "util.hpp"

namespace fs = std::filesystem;
using namespace nadkit;

namespace {

struct Outcome {
  bool ok = false;
  std::string detail;
};

int failures = 0;

void criterion(const std::string& name, double limit_s, const std::function<Outcome()>& body) {
  auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (secs > limit_s) {
    o.ok = false;
    o.detail += " [over time limit]";
  }
  if (!o.ok) ++failures;
  std::printf("%s  %-22s %s (%.2fs, limit %.0fs)\n", o.ok ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs,
              limit_s);
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

fs::path scratch_root() {
  auto p = fs::temp_directory_path() / ("nadkit_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run(const std::string& cmd) {
  int rc = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

// ---------------------------------------------------------------------------

Outcome dsl_round_trip() {
  testing::Rng rng(20261018);
  int mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    auto b = testing::random_valid_cell(rng, 1 + i % 10);
    if (!(dsl::parse_block(dsl::print_block(b)) == b)) ++mismatches;
  }
  std::string seed = dsl::print_block(testing::read_block(testing::data_dir() / "arch" / "resnet_cell.block"));
  int parsed = 0, rejected = 0, other = 0;
  for (int i = 0; i < 10000; ++i) {
    std::string text = testing::mutate_text(seed, rng);
    try {
      dsl::parse_block(text);
      ++parsed;
    } catch (const Error&) {
      ++rejected;
    } catch (...) {
      ++other;
    }
  }
  return {mismatches == 0 && other == 0,
          fmt("round-trip mismatches %d/1000; fuzz 10000: %d parsed, %d rejected, %d foreign exceptions", mismatches,
              parsed, rejected, other)};
}

Outcome validator_corpus() {
  std::ifstream in(testing::data_dir() / "validator" / "manifest.tsv");
  int cases = 0, wrong = 0;
  std::string first_wrong;
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    std::string file, role, kind, nodes;
    row >> file >> role >> kind >> nodes;
    ++cases;
    auto block = testing::read_block(testing::data_dir() / "validator" / (file + ".block"));
    auto report = check::validate(block, *check::role_from_name(role));
    std::string got_nodes;
    bool ok = !report.ok();
    for (const auto& f : report.findings) {
      ok &= check::finding_kind_name(f.kind) == kind;
      got_nodes += (got_nodes.empty() ? "" : ",") + std::to_string(f.node);
    }
    ok &= got_nodes == nodes;
    if (!ok) {
      ++wrong;
      if (first_wrong.empty()) first_wrong = file;
    }
  }
  auto roi = check::validate(testing::read_block(testing::data_dir() / "validator" / "undefined_roialign.block"),
                             check::Role::kCell);
  bool verbatim = roi.context() == "node 8 error: Undefined computation ROIAlign is used";
  return {cases >= 30 && wrong == 0 && verbatim,
          fmt("%d cases, %d wrong%s%s; ROIAlign context %s", cases, wrong, first_wrong.empty() ? "" : " first ",
              first_wrong.c_str(), verbatim ? "verbatim" : "differs")};
}

Outcome isomorphism() {
  int pairs = 0, disagree = 0, same = 0;
  auto check_pair = [&](const dsl::Block& a, const dsl::Block& b) {
    bool oracle = testing::brute_force_isomorphic(a, b);
    bool iso = graph::is_isomorphic(a, b);
    bool hash = graph::canonical_hash(a).digest == graph::canonical_hash(b).digest;
    ++pairs;
    same += oracle;
    if (iso != oracle || hash != oracle) ++disagree;
  };
  int stored = 0;
  for (const auto& p : testing::read_iso_pairs()) {
    check_pair(p.a, p.b);
    ++stored;
    if (testing::brute_force_isomorphic(p.a, p.b) != p.same) ++disagree;
  }
  testing::Rng rng(8128);
  for (int i = 0; i < 500; ++i) {
    dsl::Block a = (i % 5 == 4) ? testing::random_block(rng, 8) : testing::random_valid_cell(rng, 1 + i % 6);
    dsl::Block b = testing::shuffle_indices(a, rng);
    if (i % 2) b = testing::shuffle_indices(testing::perturb(a, rng), rng);
    check_pair(a, b);
  }
  return {disagree == 0 && stored > 0,
          fmt("%d stored + 500 random pairs (%d isomorphic), %d disagreements", stored, same, disagree)};
}

Outcome resources() {
  auto conv = dsl::parse_block("##c##\n0:input\n1:Conv2d(16,3)\n2:output\n0->1\n1->2");
  auto conv_count = codegen::count_block(conv, {1, 16, 16, 32, 32});
  auto cell = testing::read_block(testing::data_dir() / "arch" / "resnet_cell.block");
  auto stem = testing::read_block(testing::data_dir() / "arch" / "stem.block");
  auto down = testing::read_block(testing::data_dir() / "arch" / "downsample.block");
  auto cell_count = codegen::count_block(cell, {1, 16, 16, 32, 32});
  codegen::MacroConfig macro;  // 1.5M params, 0.2G FLOPs at one FLOP per MAC
  int w = codegen::search_width(cell, stem, down, macro);
  auto at = codegen::count_resources(codegen::assemble(cell, stem, down, macro, w));
  auto above = codegen::count_resources(codegen::assemble(cell, stem, down, macro, w + 1));
  bool boundary = codegen::within_budget(at, macro) && !codegen::within_budget(above, macro);
  bool ok = cell_count.params == 4672 && conv_count.macs == 2'359'296 && boundary;
  return {ok, fmt("cell params %lld, conv MACs %lld, w*=%d (%lld params, %lld MACs), w*+1 %s", (long long)cell_count.params,
                  (long long)conv_count.macs, w, (long long)at.params, (long long)at.macs,
                  boundary ? "over budget" : "still feasible")};
}

Outcome design(const fs::path& root, const std::string& cli) {
  auto cfg_path = testing::data_dir() / "design" / "config.json";
  std::vector<fs::path> dirs;
  std::size_t nodes = 0;
  int trained = 0;
  for (int i = 0; i < 3; ++i) {
    auto cfg = orch::RunConfig::load(cfg_path);
    cfg.output_dir = root / ("design_" + std::to_string(i));
    auto res = orch::run_design(cfg);
    if (i == 0) {
      nodes = res.tree.size();
      trained = res.trained;
    }
    dirs.push_back(cfg.output_dir);
  }
  std::size_t diffs = orch::compare_dirs(dirs[0], dirs[1]).size() + orch::compare_dirs(dirs[0], dirs[2]).size();

  // Kill mid-run through the CLI, then resume.
  auto killed = root / "design_killed";
  int crash_rc = run(cli + " design -c " + cfg_path.string() + " -o " + killed.string() + " --crash-after 2");
  int resume_rc = run(cli + " design -c " + cfg_path.string() + " -o " + killed.string() + " --resume");
  auto resume_diffs = orch::compare_dirs(dirs[0], killed);
  bool ok = nodes == 4 && trained == 3 && diffs == 0 && crash_rc == 75 && resume_rc == 0 && resume_diffs.empty();
  return {ok, fmt("tree %zu nodes, %d trained; %zu differing files over 3 runs; kill exit %d, resume exit %d, "
                  "%zu differing files after resume",
                  nodes, trained, diffs, crash_rc, resume_rc, resume_diffs.size())};
}

Outcome cost() {
  double c = orch::account_cost(5'371'000, 987'000, orch::Prices{2.50, 10.00});
  return {std::fabs(c - 23.30) <= 0.005, fmt("5,371K in + 987K out -> $%.4f (target $23.30 +/- 0.005)", c)};
}

Outcome bench() {
  auto samples = orch::read_bench_samples(testing::data_dir() / "bench" / "samples.jsonl");
  auto client = llm::ReplayClient::from_file(testing::data_dir() / "bench" / "transcript.jsonl");
  orch::IsomorphismJudge judge;
  auto m = orch::run_benchmark(samples, judge, *client);
  bool ok = m.total == 10 && m.executable == 8 && m.correct == 6 && m.E == 0.8 && m.Q == 0.75 && m.SR == 0.6;
  return {ok, fmt("%d samples, %d executable, %d correct: E=%.3f Q=%.3f SR=%.3f", m.total, m.executable, m.correct, m.E,
                  m.Q, m.SR)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nadkit acceptance checks"};
  std::string cli;
  app.add_option("--cli", cli, "Path to the nadkit executable")->required();
  CLI11_PARSE(app, argc, argv);

  auto root = scratch_root();
  criterion("dsl-round-trip", 60, dsl_round_trip);
  criterion("validator-corpus", 10, validator_corpus);
  criterion("isomorphism-oracle", 120, isomorphism);
  criterion("resource-counting", 30, resources);
  criterion("replayed-design", 30, [&] { return design(root, cli); });
  criterion("cost-accounting", 1, cost);
  criterion("benchmark-metrics", 10, bench);
  fs::remove_all(root);
  std::printf("%d of 7 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
