// Copyright 2026 The EANet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "eanet/tensor.hpp"

namespace eanet {

enum class Split { Train, Valid, Test };
enum class TargetKind { Regression, Classification };

struct Series {
  std::string id;
  std::vector<double> values;  // (T, C) row-major, zero beyond `length`
  std::size_t length = 0;      // valid steps
  double target = 0.0;         // regression value or class label
  Split split = Split::Train;
};

struct TimeSeriesDataset {
  std::size_t length = 0;    // T after padding
  std::size_t channels = 0;  // C
  TargetKind target_kind = TargetKind::Regression;
  std::size_t n_classes = 0;
  std::vector<Series> series;

  std::vector<std::size_t> indices(Split split) const;
  std::size_t label(std::size_t i) const;
  double value(std::size_t i, std::size_t t, std::size_t c) const {
    return series[i].values[t * channels + c];
  }
  /// Checks the shared-shape, label-range and finiteness invariants.
  void validate() const;
};

/// Long CSV: header `series_id,t,dim_0,...,dim_{C-1},target`, one row per
/// (series, step). Rows are grouped by series_id and ordered by t; shorter
/// series are zero-padded to the longest. Every series lands in `split`.
TimeSeriesDataset load_csv_long(const std::string& path,
                                TargetKind kind = TargetKind::Regression,
                                Split split = Split::Train);

/// Writes valid steps only, 17 significant digits, target repeated per row.
void write_csv_long(const std::string& path, const TimeSeriesDataset& data);

/// Appends the series of `other` (same C) to `data`, re-padding to the longer T.
void append_dataset(TimeSeriesDataset& data, const TimeSeriesDataset& other);

enum class SynthTask { FreqClass, NoisySineRegress };

std::string to_string(SynthTask task);
SynthTask synth_task_from_string(const std::string& name);

struct SynthSpec {
  SynthTask task = SynthTask::FreqClass;
  std::size_t length = 64;
  std::size_t channels = 2;
  std::size_t n_classes = 4;
  std::vector<double> frequencies;  // FreqClass cycles per series; default 1, 3, 5, ...
  double noise = 0.1;
  std::size_t train_per_class = 200;  // FreqClass
  std::size_t test_per_class = 50;
  std::size_t train_count = 800;  // NoisySineRegress
  std::size_t test_count = 200;
  double min_frequency = 1.0;  // NoisySineRegress target range
  double max_frequency = 5.0;
  std::uint64_t seed = 0;
};

/// FreqClass: class k is sin(2 pi f_k t / T + phi_c) + noise per channel with
/// random phases; classes interleave in file order. NoisySineRegress: the
/// target is the frequency f drawn uniformly from [min, max].
TimeSeriesDataset synth_dataset(const SynthSpec& spec);

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stddev;
};

/// Per-channel mean/std over valid train steps, std floored at 1e-8.
Standardizer fit_standardizer(const TimeSeriesDataset& data);
/// Applies `fit_standardizer(data)` to every split; padding stays zero.
TimeSeriesDataset standardize(const TimeSeriesDataset& data);
TimeSeriesDataset apply_standardizer(const TimeSeriesDataset& data, const Standardizer& s);

/// Moves round(fraction * #train) train series (seeded choice) to Valid.
void split_validation(TimeSeriesDataset& data, double fraction, std::uint64_t seed);

/// Partitions `indices` into batches of `batch_size`; the last may be short.
std::vector<std::vector<std::size_t>> batchify(std::vector<std::size_t> indices,
                                               std::size_t batch_size, bool shuffle,
                                               std::uint64_t seed);

struct Batch {
  Tensor x;  // (B, T, C)
  std::vector<std::size_t> lengths;
  std::vector<double> targets;
  std::vector<std::size_t> labels;  // classification only
};

Batch make_batch(const TimeSeriesDataset& data, std::span<const std::size_t> indices);

}  // namespace eanet
