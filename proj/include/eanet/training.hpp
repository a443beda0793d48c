// Copyright 2026 The EANet Authors
// SPDX-License-Identifier: Apache-2.0

// Losses, masked-reconstruction masks, Adam / Rectified Adam and the
// deterministic epoch loop used by pre-training and fine-tuning.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "eanet/data.hpp"
#include "eanet/model.hpp"
#include "eanet/random.hpp"
#include "eanet/tensor.hpp"

namespace eanet {

// ---------------------------------------------------------------------------
// Pre-training mask and losses

/// keep[i] = 1 for observed cells, 0 for cells hidden from the encoder.
struct PretrainMask {
  Shape shape;  // (B, T, C)
  std::vector<std::uint8_t> keep;
  double rate = 0.15;

  std::size_t masked_count() const;
  /// 1.0 / 0.0 tensor of `keep`, same shape.
  Tensor keep_tensor() const;
};

/// Bernoulli(keep = 1 - r) per cell. Cells past a series' valid length are
/// always kept so they never enter the loss. Resamples (up to 100 times)
/// while no cell is masked; throws ContractError if that never succeeds.
PretrainMask gen_pretrain_mask(const Shape& shape, double r, Rng& rng,
                               std::span<const std::size_t> lengths = {});

/// Mean of (x_hat - x)^2 over masked cells only.
Tensor masked_mse(const Tensor& x_hat, const Tensor& x, const PretrainMask& mask);
/// Batch mean of (y_hat - y)^2.
Tensor mse_loss(const Tensor& y_hat, const Tensor& y);
/// -mean_b log(max(p[b, label_b], 1e-12)) for probabilities (B, n_classes).
Tensor cross_entropy(const Tensor& probabilities, std::span<const std::size_t> labels);

// ---------------------------------------------------------------------------
// Optimizers

enum class OptimizerKind { Adam, RAdam };

std::string to_string(OptimizerKind kind);
OptimizerKind optimizer_kind_from_string(const std::string& name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::RAdam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
  double clip_norm = 5.0;  // global gradient norm; 0 disables clipping
};

struct OptimizerState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::size_t step = 0;
};

struct StepInfo {
  double grad_norm = 0.0;  // before clipping
  bool clipped = false;
  double rectifier = 1.0;  // RAdam r_t, 0 while the rectified term is inactive
};

/// RAdam variance rectifier r_t for 1-based step t, or 0 when rho_t <= 4.
double radam_rectifier(std::size_t t, double beta2);

/// One update of every parameter from its current gradient (missing
/// gradients count as zero). A non-finite gradient throws DivergenceError
/// naming the tensor and leaves parameters and state untouched.
StepInfo optimizer_step(std::span<const NamedTensor> params, OptimizerState& state,
                        const OptimizerConfig& config);
StepInfo optimizer_step(std::span<const Tensor> params, OptimizerState& state,
                        const OptimizerConfig& config);

// ---------------------------------------------------------------------------
// Evaluation helpers

/// Regression predictions for the given series, in order.
std::vector<double> predict_regression(const Model& model, const TimeSeriesDataset& data,
                                       std::span<const std::size_t> indices,
                                       std::size_t batch_size = 64);
/// Argmax class per series.
std::vector<std::size_t> predict_labels(const Model& model, const TimeSeriesDataset& data,
                                        std::span<const std::size_t> indices,
                                        std::size_t batch_size = 64);
/// Masked-reconstruction loss averaged over masked cells, masks drawn from `seed`.
double pretrain_loss(const Model& model, const TimeSeriesDataset& data,
                     std::span<const std::size_t> indices, double mask_rate, std::uint64_t seed,
                     std::size_t batch_size = 64);

/// Task metric: masked MSE (pretrain), RMSE (regression) or accuracy.
double evaluate_metric(const Model& model, const TimeSeriesDataset& data,
                       std::span<const std::size_t> indices, double mask_rate, std::uint64_t seed);
/// Accuracy is the only metric where larger is better.
bool metric_higher_is_better(TaskKind task);
std::string metric_name(TaskKind task);

// ---------------------------------------------------------------------------
// Training loop

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double valid_metric = 0.0;  // NaN without a validation split
};

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  OptimizerConfig optimizer;
  double mask_rate = 0.15;
  std::uint64_t seed = 0;
  /// Stop after this many epochs without a validation improvement; 0 = never.
  std::size_t patience = 0;
  /// Stop once the validation metric reaches this value (accuracy only); NaN = never.
  double target_metric = std::numeric_limits<double>::quiet_NaN();
  /// Checkpoint written before a DivergenceError is rethrown; empty = none.
  std::string divergence_dump;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_valid = std::numeric_limits<double>::quiet_NaN();
};

/// Trains on the Train split and selects on the Valid split; the model ends
/// holding the best-validation parameters (the last epoch when there is no
/// validation data). Identical inputs and seed give bitwise-identical results.
TrainResult train(Model& model, const TimeSeriesDataset& data, const TrainConfig& config);

/// epoch,train_loss,valid_metric with shortest round-trip numbers.
void write_history_csv(const std::string& path, std::span<const EpochRecord> history);

}  // namespace eanet
