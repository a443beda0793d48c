// Copyright 2026 The EANet Authors
// SPDX-License-Identifier: Apache-2.0

// eanet: train, evaluate and inspect evolving-attention time-series models.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "eanet/config.hpp"
#include "eanet/error.hpp"
#include "eanet/pipeline.hpp"

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string checkpoint;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c, bool needs_checkpoint) {
  cmd->add_option("--config", c.config_path, "Run configuration (key = value file)")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Override the run seed");
  cmd->add_option("--out", c.out, "Override the output directory");
  auto* ck = cmd->add_option("--checkpoint", c.checkpoint,
                             needs_checkpoint ? "Model checkpoint" : "Initial checkpoint (body only)");
  if (needs_checkpoint) ck->required();
  cmd->add_option("--set", c.overrides, "Extra key=value setting, applied after the config file");
}

eanet::RunConfig resolve(const Common& c) {
  eanet::RunConfig config = c.config_path.empty() ? eanet::RunConfig{} : eanet::load_run_config(c.config_path);
  for (const auto& kv : c.overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw eanet::ConfigError("--set expects key=value, got '" + kv + "'");
    eanet::set_run_config_value(config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.seed) {
    config.seed = *c.seed;
    config.explicit_keys.insert("seed");
  }
  if (!c.out.empty()) config.out = c.out;
  config.validate();
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  eanet::tune_allocator();
  CLI::App app{"Evolving-attention time-series models: training, evaluation and checks"};
  app.require_subcommand(1);

  Common pre, fine, eval, attn;
  auto* c_pre = app.add_subcommand("pretrain", "Masked-reconstruction pre-training");
  add_common(c_pre, pre, false);
  auto* c_fine = app.add_subcommand("finetune", "Supervised fine-tuning (regression or classification)");
  add_common(c_fine, fine, false);
  auto* c_eval = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  add_common(c_eval, eval, true);

  auto* c_attn = app.add_subcommand("export-attn", "Dump attention logits and probabilities as CSV");
  add_common(c_attn, attn, true);
  std::string attn_path = "attention.csv";
  std::size_t attn_index = 0;
  c_attn->add_option("--output", attn_path, "Destination CSV");
  c_attn->add_option("--index", attn_index, "Series index within the evaluation split");

  std::uint64_t check_seed = 7;
  auto* c_grad = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  c_grad->add_option("--seed", check_seed, "Seed for the random inputs");
  auto* c_self = app.add_subcommand("selftest", "Run the invariant suite");
  c_self->add_option("--seed", check_seed, "Seed for the random inputs");
  bool full_taps = false;
  c_self->add_flag("--inject-full-decoder-taps", full_taps,
                   "Fault injection: use all 9 taps for the decoder-self kernel");

  auto* c_metrics = app.add_subcommand("metrics", "Aggregate a dataset x model score table");
  std::string table_path, op = "rank";
  bool higher_better = false;
  c_metrics->add_option("--table", table_path, "CSV: header row of models, one row per dataset")
      ->required()
      ->check(CLI::ExistingFile);
  c_metrics->add_option("--op", op, "rank or reldiff")->check(CLI::IsMember({"rank", "reldiff"}));
  c_metrics->add_flag("--higher-better", higher_better, "Larger scores are better (e.g. accuracy)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_pre->parsed()) {
      auto config = resolve(pre);
      if (!pre.checkpoint.empty()) throw eanet::ConfigError("pretrain does not take --checkpoint");
      eanet::cmd_pretrain(config, std::cout);
    } else if (c_fine->parsed()) {
      auto config = resolve(fine);
      if (!fine.checkpoint.empty()) config.init_checkpoint = fine.checkpoint;
      eanet::cmd_finetune(config, std::cout);
    } else if (c_eval->parsed()) {
      eanet::cmd_eval(resolve(eval), eval.checkpoint, std::cout);
    } else if (c_attn->parsed()) {
      eanet::cmd_export_attn(resolve(attn), attn.checkpoint, attn_path, attn_index, std::cout);
    } else if (c_grad->parsed()) {
      return eanet::cmd_gradcheck(check_seed, std::cout) ? 0 : 1;
    } else if (c_self->parsed()) {
      eanet::SelftestOptions options;
      options.seed = check_seed;
      options.full_decoder_taps = full_taps;
      return eanet::cmd_selftest(options, std::cout) ? 0 : 1;
    } else if (c_metrics->parsed()) {
      eanet::cmd_metrics(table_path, eanet::aggregate_op_from_string(op), !higher_better, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
