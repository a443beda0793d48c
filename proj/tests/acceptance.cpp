// Copyright 2026 The EANet Authors
// SPDX-License-Identifier: Apache-2.0

// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "eanet/checks.hpp"
#include "eanet/config.hpp"
#include "eanet/metrics.hpp"
#include "eanet/pipeline.hpp"

using namespace eanet;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Collapses a list of checks into one outcome, reporting the failures.
Outcome all_pass(const std::vector<CheckResult>& checks, const std::string& summary) {
  Outcome o{true, summary};
  for (const auto& c : checks) {
    if (!c.passed) {
      o.pass = false;
      o.detail += "; failed: " + format_check(c);
    }
  }
  return o;
}

Outcome gradient_fidelity(std::uint64_t seed) {
  auto start = Clock::now();
  auto checks = kernel_gradient_checks(seed, 1e-5, 1e-4);
  auto model = model_gradient_checks(seed, 1e-5, 1e-4);
  checks.insert(checks.end(), model.begin(), model.end());
  double worst = 0.0;
  for (const auto& c : checks) worst = std::max(worst, c.measured);
  double secs = seconds_since(start);
  Outcome o = all_pass(checks, std::to_string(checks.size()) + " checks, max rel err " + fmt(worst) + ", " +
                                   fmt(secs) + " s");
  if (secs >= 60.0) {
    o.pass = false;
    o.detail += "; exceeded 60 s";
  }
  return o;
}

Outcome degenerate_equivalences(std::uint64_t seed) {
  std::vector<CheckResult> checks{check_alpha_beta_zero_equivalence(seed), check_p_one_equivalence(seed),
                                  check_p_zero_equivalence(seed)};
  std::string summary;
  for (const auto& c : checks) summary += (summary.empty() ? "" : ", ") + c.name + " " + fmt(c.measured);
  return all_pass(checks, summary);
}

Outcome causality(std::uint64_t seed) {
  CausalityOptions opt;
  opt.n = 9;
  opt.perturbations = 200;
  std::vector<CheckResult> checks{check_decoder_causality(seed, opt), check_encoder_decoder_causality(seed, opt),
                                  check_decoder_attention_zero(seed)};
  return all_pass(checks, "N=9, 200 perturbations per map kind");
}

Outcome tap_count() {
  CheckResult c = check_decoder_tap_count();
  return {c.passed, "decoder taps = " + fmt(c.measured)};
}

Outcome reference_table(const fs::path& table_path) {
  MetricsTable table = read_metrics_csv(table_path.string());
  auto rel = avg_relative_difference(table);
  auto ranks = avg_rank(table);
  auto published = reference_relative_difference();
  Outcome o{true, ""};
  if (rel.size() != published.size()) return {false, "table has " + std::to_string(rel.size()) + " models"};
  double worst = 0.0;
  for (std::size_t j = 0; j < rel.size(); ++j) worst = std::max(worst, std::abs(rel[j] - published[j]));
  std::size_t lstm = 0, eadc = 0;
  for (std::size_t j = 0; j < table.models.size(); ++j) {
    if (table.models[j] == "LSTM") lstm = j;
    if (table.models[j] == "EA-DC-T") eadc = j;
  }
  o.pass = worst <= 0.002 && ranks[eadc] == 1.0 && std::abs(ranks[lstm] - 5.2) <= 0.05;
  o.detail = "max |reldiff - published| " + fmt(worst) + ", rank EA-DC-T " + fmt(ranks[eadc]) + ", rank LSTM " +
             fmt(ranks[lstm]);
  return o;
}

Outcome pretrain_smoke(const fs::path& config_path, const fs::path& out, fs::path& checkpoint) {
  RunConfig c = load_run_config(config_path.string());
  c.out = out.string();
  auto start = Clock::now();
  std::ostringstream log;
  RunSummary s = cmd_pretrain(c, log);
  double secs = seconds_since(start);
  checkpoint = out / "model.ckpt";
  const auto& h = s.result.history;
  if (h.size() != 20) return {false, "ran " + std::to_string(h.size()) + " epochs"};
  double ratio = h.back().train_loss / h.front().train_loss;
  return {ratio < 0.5 && secs < 300.0,
          "epoch-1 loss " + fmt(h.front().train_loss) + ", epoch-20 loss " + fmt(h.back().train_loss) + ", ratio " +
              fmt(ratio) + ", " + fmt(secs) + " s"};
}

double finetune_accuracy(RunConfig c, const fs::path& out, std::size_t& epochs) {
  c.out = out.string();
  std::ostringstream log;
  RunSummary s = cmd_finetune(c, log);
  epochs = s.result.history.size();
  return s.metrics.at("test_accuracy");
}

Outcome finetune_capability(const fs::path& config_path, const fs::path& pretrained, const fs::path& work) {
  RunConfig base = load_run_config(config_path.string());
  RunConfig from_pretrained = base;
  from_pretrained.init_checkpoint = pretrained.string();
  std::size_t epochs = 0;
  double acc = finetune_accuracy(from_pretrained, work / "finetune_pretrained", epochs);
  std::string detail = "pre-trained init: test acc " + fmt(acc) + " after " + std::to_string(epochs) + " epochs";
  bool pass = acc >= 0.95 && epochs <= 50;

  double sum_ea = 0.0, sum_vanilla = 0.0;
  const int seeds = 5;
  for (int s = 1; s <= seeds; ++s) {
    RunConfig ea = base;
    ea.seed = static_cast<std::uint64_t>(s);
    RunConfig vanilla = ea;
    set_run_config_value(vanilla, "model.arch", "transformer");
    std::size_t e1 = 0, e2 = 0;
    double a = finetune_accuracy(ea, work / ("ea_seed" + std::to_string(s)), e1);
    double b = finetune_accuracy(vanilla, work / ("vanilla_seed" + std::to_string(s)), e2);
    sum_ea += a;
    sum_vanilla += b;
    std::cerr << "  seed " << s << ": EA-DC " << fmt(a) << " (" << e1 << " ep), Transformer " << fmt(b) << " ("
              << e2 << " ep)\n";
  }
  double mean_ea = sum_ea / seeds, mean_vanilla = sum_vanilla / seeds;
  detail += "; mean acc over 5 seeds EA-DC " + fmt(mean_ea) + " vs Transformer " + fmt(mean_vanilla);
  return {pass && mean_ea >= mean_vanilla, detail};
}

Outcome avg_wcd_cases() {
  auto checks = avg_wcd_checks();
  std::string summary;
  for (const auto& c : checks) summary += (summary.empty() ? "" : ", ") + c.name + " " + fmt(c.measured);
  return all_pass(checks, summary);
}

Outcome determinism(const fs::path& work) {
  RunConfig c = parse_run_config(
      "task = classification\n"
      "model.d = 32\nmodel.heads = 4\nmodel.blocks = 2\nmodel.p = 0.25\n"
      "data.synth.length = 32\ndata.synth.train_per_class = 30\ndata.synth.test_per_class = 10\n"
      "train.epochs = 3\ntrain.batch_size = 16\nseed = 11\n",
      "determinism");
  std::ostringstream log;
  c.out = (work / "det_a").string();
  cmd_finetune(c, log);
  c.out = (work / "det_b").string();
  cmd_finetune(c, log);
  bool same_ckpt = read_file(work / "det_a" / "model.ckpt") == read_file(work / "det_b" / "model.ckpt");
  bool same_hist = read_file(work / "det_a" / "history.csv") == read_file(work / "det_b" / "history.csv");
  return {same_ckpt && same_hist, std::string("checkpoints ") + (same_ckpt ? "identical" : "differ") +
                                      ", histories " + (same_hist ? "identical" : "differ")};
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"eanet acceptance run"};
  std::string source_dir = ".";
  std::string work_dir = "acceptance_runs";
  std::uint64_t seed = 7;
  std::vector<int> only;
  app.add_option("--source-dir", source_dir, "Project root holding configs/ and data/")->check(CLI::ExistingDirectory);
  app.add_option("--work-dir", work_dir, "Scratch directory for training runs");
  app.add_option("--seed", seed, "Seed for the invariant checks");
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);

  fs::path root(source_dir), work(work_dir);
  fs::remove_all(work);
  fs::create_directories(work);
  fs::path pretrained;

  std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient fidelity", [&] { return gradient_fidelity(seed); }},
      {"degenerate equivalences", [&] { return degenerate_equivalences(seed); }},
      {"causality", [&] { return causality(seed); }},
      {"decoder tap count", [] { return tap_count(); }},
      {"reference table aggregates", [&] { return reference_table(root / "data" / "reference_rmse.csv"); }},
      {"pre-training smoke run",
       [&] { return pretrain_smoke(root / "configs" / "pretrain_freqclass.txt", work / "pretrain", pretrained); }},
      {"fine-tuning capability",
       [&] {
         if (pretrained.empty()) {
           std::ostringstream log;
           RunConfig c = load_run_config((root / "configs" / "pretrain_freqclass.txt").string());
           c.out = (work / "pretrain").string();
           cmd_pretrain(c, log);
           pretrained = work / "pretrain" / "model.ckpt";
         }
         return finetune_capability(root / "configs" / "finetune_freqclass.txt", pretrained, work);
       }},
      {"avg within-cluster distance", [] { return avg_wcd_cases(); }},
      {"finetune determinism", [&] { return determinism(work); }},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << criteria[i].first << ": " << o.detail
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
