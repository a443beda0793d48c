// Copyright 2026 The EANet Authors
// SPDX-License-Identifier: Apache-2.0

// Command implementations behind the `eanet` tool. Each training command
// writes into `config.out`:
//   model.ckpt    checkpoint (best-validation parameters)
//   history.csv   epoch,train_loss,valid_metric
//   config.txt    effective configuration, re-runnable as-is
//   metrics.txt   key = value summary

#pragma once

#include <iosfwd>
#include <map>
#include <string>

#include "eanet/checks.hpp"
#include "eanet/config.hpp"
#include "eanet/data.hpp"
#include "eanet/training.hpp"

namespace eanet {

using MetricMap = std::map<std::string, double>;

struct RunSummary {
  TrainResult result;
  MetricMap metrics;
};

/// Builds the dataset described by `config` (synthetic or CSV), carves out the
/// validation split and standardizes. Unset model.in_channels, model.max_len
/// and task.n_classes are resolved from the data; explicit values that do not
/// fit the data throw ConfigError.
TimeSeriesDataset load_run_data(RunConfig& config);

/// Masked-reconstruction pre-training (task forced to pretrain).
RunSummary cmd_pretrain(RunConfig config, std::ostream& log);

/// Full-parameter fine-tuning, from `config.init_checkpoint` when set. The
/// checkpoint body must match the configured architecture; the task head is
/// always freshly initialized.
RunSummary cmd_finetune(RunConfig config, std::ostream& log);

/// Task metric of a checkpoint on the test split (or valid, then train, when
/// the data has no test split).
MetricMap cmd_eval(RunConfig config, const std::string& checkpoint, std::ostream& log);

/// Writes the per-layer attention maps of one series of the evaluation split.
void cmd_export_attn(RunConfig config, const std::string& checkpoint, const std::string& path,
                     std::size_t series_index, std::ostream& log);

/// Returns true when every check passes.
bool cmd_gradcheck(std::uint64_t seed, std::ostream& log);
bool cmd_selftest(const SelftestOptions& options, std::ostream& log);

enum class AggregateOp { Rank, RelDiff };
AggregateOp aggregate_op_from_string(const std::string& name);

/// Prints `model,value` per column of the table.
std::vector<double> cmd_metrics(const std::string& table_path, AggregateOp op, bool lower_is_better,
                                std::ostream& out);

/// `key = value` lines, sorted by key.
void write_metric_map(const std::string& path, const MetricMap& metrics);

/// Raises glibc's mmap and trim thresholds so the many short-lived
/// activation buffers of a training step are recycled instead of being
/// returned to the kernel. No-op on other C libraries.
void tune_allocator();

}  // namespace eanet
