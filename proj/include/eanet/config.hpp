// Copyright 2026 The EANet Authors
// SPDX-License-Identifier: Apache-2.0

// Run configuration: a flat `key = value` text file with `#` comments.
// Nested settings use dotted keys (model.d, optim.lr, data.synth.length, ...).

#pragma once

#include <cstdint>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "eanet/data.hpp"
#include "eanet/model.hpp"
#include "eanet/training.hpp"

namespace eanet {

enum class DataSource { Synth, Csv };

struct RunConfig {
  ModelConfig model;
  OptimizerConfig optimizer;

  DataSource source = DataSource::Synth;
  SynthSpec synth;
  std::string train_path;
  std::string test_path;
  bool standardize = true;
  double valid_fraction = 0.3;

  std::uint64_t seed = 0;
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  std::size_t patience = 0;
  double target_metric = std::numeric_limits<double>::quiet_NaN();
  double mask_rate = 0.15;
  std::string init_checkpoint;
  std::string out = "runs/eanet";

  /// Keys given explicitly in the source file. Unset model.in_channels,
  /// model.max_len and task.n_classes are filled in from the data.
  std::set<std::string> explicit_keys;

  /// Structural errors throw ConfigError.
  void validate() const;
  /// Departures from the published hyper-parameter grids and other
  /// non-fatal oddities.
  std::vector<std::string> warnings() const;
};

/// Parses config text. Errors are ParseError / ConfigError prefixed with
/// `origin:line:`. Unknown and duplicate keys are errors.
RunConfig parse_run_config(const std::string& text, const std::string& origin = "<config>");
RunConfig load_run_config(const std::string& path);

/// Every key with defaults resolved, sorted.
KeyValues to_key_values(const RunConfig& config);
/// `key = value` lines for to_key_values(config); parse_run_config reads it back.
std::string format_run_config(const RunConfig& config);

/// Applies one `key = value` setting (as from the command line).
void set_run_config_value(RunConfig& config, const std::string& key, const std::string& value);

}  // namespace eanet
