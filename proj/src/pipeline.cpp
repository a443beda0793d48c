// Copyright 2026 The EANet Authors
// SPDX-License-Identifier: Apache-2.0

#include "eanet/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "eanet/error.hpp"
#include "eanet/metrics.hpp"
#include "src/text_util.hpp"

namespace eanet {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

void prepare_out(const RunConfig& config) {
  std::error_code ec;
  std::filesystem::create_directories(config.out, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + config.out + "': " + ec.message());
}

std::string out_file(const RunConfig& config, const char* name) {
  return (std::filesystem::path(config.out) / name).string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  os << text;
  if (!os) throw std::runtime_error("failed writing '" + path + "'");
}

TrainConfig train_config(const RunConfig& c, std::ostream& log) {
  TrainConfig t;
  t.epochs = c.epochs;
  t.batch_size = c.batch_size;
  t.optimizer = c.optimizer;
  t.mask_rate = c.mask_rate;
  t.seed = c.seed;
  t.patience = c.patience;
  t.target_metric = c.target_metric;
  t.divergence_dump = out_file(c, "diverged.ckpt");
  std::string name = metric_name(c.model.task);
  t.on_epoch = [&log, name](const EpochRecord& r) {
    log << "epoch " << r.epoch << "  train_loss " << fmt(r.train_loss);
    if (!std::isnan(r.valid_metric)) log << "  valid_" << name << ' ' << fmt(r.valid_metric);
    log << '\n' << std::flush;
  };
  return t;
}

std::vector<std::size_t> evaluation_indices(const TimeSeriesDataset& data, std::string& split_name) {
  for (auto [split, name] : {std::pair{Split::Test, "test"}, {Split::Valid, "valid"}, {Split::Train, "train"}}) {
    auto idx = data.indices(split);
    if (!idx.empty()) {
      split_name = name;
      return idx;
    }
  }
  throw ContractError("dataset is empty");
}

void log_warnings(const RunConfig& config, std::ostream& log) {
  for (const auto& w : config.warnings()) log << "warning: " << w << '\n';
}

RunSummary run_training(RunConfig& config, Model& model, const TimeSeriesDataset& data,
                        std::ostream& log) {
  prepare_out(config);
  write_text(out_file(config, "config.txt"), format_run_config(config));
  log << to_string(config.model.arch) << ", " << model.parameter_count() << " parameters, "
      << data.indices(Split::Train).size() << " train / " << data.indices(Split::Valid).size()
      << " valid / " << data.indices(Split::Test).size() << " test series\n";

  RunSummary summary;
  summary.result = train(model, data, train_config(config, log));
  save_checkpoint(out_file(config, "model.ckpt"), model);
  write_history_csv(out_file(config, "history.csv"), summary.result.history);

  std::string name = metric_name(config.model.task);
  auto& m = summary.metrics;
  m["epochs_run"] = static_cast<double>(summary.result.history.size());
  m["best_epoch"] = static_cast<double>(summary.result.best_epoch);
  m["final_train_loss"] = summary.result.history.back().train_loss;
  if (!std::isnan(summary.result.best_valid)) m["valid_" + name] = summary.result.best_valid;
  auto test = data.indices(Split::Test);
  if (!test.empty()) {
    double v = evaluate_metric(model, data, test, config.mask_rate, config.seed);
    m["test_" + name] = v;
    log << "test " << name << " = " << fmt(v) << '\n';
  }
  write_metric_map(out_file(config, "metrics.txt"), m);
  return summary;
}

}  // namespace

TimeSeriesDataset load_run_data(RunConfig& config) {
  TimeSeriesDataset data;
  if (config.source == DataSource::Synth) {
    data = synth_dataset(config.synth);
  } else {
    if (config.train_path.empty()) throw ConfigError("data.train is required when data.source = csv");
    TargetKind kind = config.model.task == TaskKind::Classification ? TargetKind::Classification
                                                                     : TargetKind::Regression;
    data = load_csv_long(config.train_path, kind, Split::Train);
    if (!config.test_path.empty()) append_dataset(data, load_csv_long(config.test_path, kind, Split::Test));
  }
  if (config.valid_fraction > 0.0) split_validation(data, config.valid_fraction, config.seed);
  if (config.standardize) data = standardize(data);

  auto has = [&config](const char* key) { return config.explicit_keys.count(key) > 0; };
  ModelConfig& m = config.model;
  if (!has("model.in_channels")) {
    m.in_channels = data.channels;
  } else if (m.in_channels != data.channels) {
    throw ConfigError("model.in_channels = " + std::to_string(m.in_channels) + " but the data has " +
                      std::to_string(data.channels) + " channels");
  }
  if (!has("model.max_len")) {
    m.max_len = data.length;
  } else if (m.max_len < data.length) {
    throw ConfigError("model.max_len = " + std::to_string(m.max_len) + " is shorter than the data (" +
                      std::to_string(data.length) + " steps)");
  }
  if (m.task == TaskKind::Classification) {
    if (data.target_kind != TargetKind::Classification)
      throw ConfigError("task classification needs class labels");
    if (!has("task.n_classes")) {
      m.n_classes = data.n_classes;
    } else if (m.n_classes < data.n_classes) {
      throw ConfigError("task.n_classes = " + std::to_string(m.n_classes) + " but the data has " +
                        std::to_string(data.n_classes) + " classes");
    }
  }
  m.validate();
  return data;
}

RunSummary cmd_pretrain(RunConfig config, std::ostream& log) {
  config.model.task = TaskKind::Pretrain;
  config.validate();
  log_warnings(config, log);
  TimeSeriesDataset data = load_run_data(config);
  Model model = Model::create(config.model, config.seed);
  return run_training(config, model, data, log);
}

RunSummary cmd_finetune(RunConfig config, std::ostream& log) {
  if (config.model.task == TaskKind::Pretrain)
    throw ConfigError("finetune needs task = regression or classification");
  config.validate();
  log_warnings(config, log);
  TimeSeriesDataset data = load_run_data(config);
  Model model = Model::create(config.model, config.seed);
  if (!config.init_checkpoint.empty()) {
    Model init = load_checkpoint(config.init_checkpoint);
    if (init.config.arch != config.model.arch)
      throw ConfigError("checkpoint '" + config.init_checkpoint + "' holds a " + to_string(init.config.arch) +
                        " model, config asks for " + to_string(config.model.arch));
    std::size_t copied = copy_matching_parameters(init, model, "head.");
    log << "initialized " << copied << " tensors from " << config.init_checkpoint << '\n';
  }
  return run_training(config, model, data, log);
}

MetricMap cmd_eval(RunConfig config, const std::string& checkpoint, std::ostream& log) {
  Model model = load_checkpoint(checkpoint);
  config.model = model.config;
  for (const char* k : {"model.in_channels", "model.max_len", "task.n_classes"}) config.explicit_keys.insert(k);
  TimeSeriesDataset data = load_run_data(config);
  std::string split;
  auto idx = evaluation_indices(data, split);
  std::string name = metric_name(model.config.task);
  double v = evaluate_metric(model, data, idx, config.mask_rate, config.seed);
  log << split << ' ' << name << " = " << fmt(v) << '\n';
  return {{split + "_" + name, v}};
}

void cmd_export_attn(RunConfig config, const std::string& checkpoint, const std::string& path,
                     std::size_t series_index, std::ostream& log) {
  Model model = load_checkpoint(checkpoint);
  config.model = model.config;
  for (const char* k : {"model.in_channels", "model.max_len", "task.n_classes"}) config.explicit_keys.insert(k);
  TimeSeriesDataset data = load_run_data(config);
  std::string split;
  auto idx = evaluation_indices(data, split);
  if (series_index >= idx.size())
    throw ConfigError("series index " + std::to_string(series_index) + " out of range (" + split + " split has " +
                      std::to_string(idx.size()) + " series)");
  std::size_t one[1] = {idx[series_index]};
  Batch batch = make_batch(data, one);
  EncodeResult enc = model.encode(batch.x, batch.lengths);
  if (enc.logits.empty()) throw ConfigError("model has no attention layers (p = 0)");
  export_attention(path, enc.logits, enc.valid ? &*enc.valid : nullptr, 0);
  log << "wrote " << enc.logits.size() << " layers of " << split << " series '" << data.series[one[0]].id
      << "' to " << path << '\n';
}

bool cmd_gradcheck(std::uint64_t seed, std::ostream& log) {
  bool ok = true;
  auto report = [&](const std::vector<CheckResult>& results) {
    for (const auto& r : results) {
      log << format_check(r) << '\n';
      ok = ok && r.passed;
    }
  };
  report(kernel_gradient_checks(seed));
  report(model_gradient_checks(seed));
  return ok;
}

bool cmd_selftest(const SelftestOptions& options, std::ostream& log) {
  std::size_t failed = 0;
  auto results = run_selftest(options);
  for (const auto& r : results) {
    log << format_check(r) << '\n';
    failed += !r.passed;
  }
  log << (results.size() - failed) << '/' << results.size() << " checks passed\n";
  return failed == 0;
}

AggregateOp aggregate_op_from_string(const std::string& name) {
  if (name == "rank") return AggregateOp::Rank;
  if (name == "reldiff") return AggregateOp::RelDiff;
  throw ConfigError("unknown aggregate '" + name + "' (expected rank or reldiff)");
}

std::vector<double> cmd_metrics(const std::string& table_path, AggregateOp op, bool lower_is_better,
                                std::ostream& out) {
  MetricsTable table = read_metrics_csv(table_path);
  table.lower_is_better = lower_is_better;
  auto values = op == AggregateOp::Rank ? avg_rank(table) : avg_relative_difference(table);
  out << "model," << (op == AggregateOp::Rank ? "avg_rank" : "avg_rel_diff") << '\n';
  for (std::size_t j = 0; j < values.size(); ++j) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", values[j]);
    out << table.models[j] << ',' << buf << '\n';
  }
  return values;
}

void write_metric_map(const std::string& path, const MetricMap& metrics) {
  std::string text;
  for (const auto& [k, v] : metrics) text += k + " = " + format_double(v) + "\n";
  write_text(path, text);
}

void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, std::numeric_limits<int>::max());
  mallopt(M_TOP_PAD, 256 << 20);
#endif
}

}  // namespace eanet
