// Copyright 2026 The EANet Authors
// SPDX-License-Identifier: Apache-2.0

#include "eanet/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>

#include "eanet/error.hpp"
#include "eanet/kernels.hpp"
#include "eanet/ops.hpp"
#include "src/node_access.hpp"
#include "src/text_util.hpp"

namespace eanet {

namespace {

constexpr std::uint64_t kDropoutStream = 0x64726f706f7574ULL;
constexpr std::uint64_t kMaskStream = 0x6d61736bULL;
constexpr std::uint64_t kValidMaskStream = 0x766d61736bULL;

std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch) {
  return seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(epoch) + 1;
}

}  // namespace

// ---------------------------------------------------------------------------
// Masks and losses

std::size_t PretrainMask::masked_count() const {
  return static_cast<std::size_t>(std::count(keep.begin(), keep.end(), std::uint8_t{0}));
}

Tensor PretrainMask::keep_tensor() const {
  std::vector<double> v(keep.begin(), keep.end());
  return Tensor(shape, std::move(v));
}

PretrainMask gen_pretrain_mask(const Shape& shape, double r, Rng& rng,
                               std::span<const std::size_t> lengths) {
  if (!(r > 0.0 && r < 1.0)) throw ContractError("mask rate must lie in (0, 1)");
  if (shape.size() != 3) throw ShapeError("pretrain mask shape must be (B, T, C)");
  std::size_t nb = shape[0], len = shape[1], ch = shape[2];
  if (!lengths.empty() && lengths.size() != nb)
    throw ShapeError("pretrain mask: one length per batch element required");
  PretrainMask mask;
  mask.shape = shape;
  mask.rate = r;
  mask.keep.assign(nb * len * ch, 1);
  for (int attempt = 0; attempt < 100; ++attempt) {
    for (std::size_t b = 0; b < nb; ++b) {
      std::size_t valid = lengths.empty() ? len : lengths[b];
      for (std::size_t t = 0; t < len; ++t)
        for (std::size_t c = 0; c < ch; ++c) {
          std::size_t i = (b * len + t) * ch + c;
          mask.keep[i] = (t < valid && uniform01(rng) < r) ? 0 : 1;
        }
    }
    if (mask.masked_count() > 0) return mask;
  }
  throw ContractError("pretrain mask: no cell masked after 100 draws (rate too small)");
}

Tensor masked_mse(const Tensor& x_hat, const Tensor& x, const PretrainMask& mask) {
  if (x_hat.shape() != x.shape() || x.shape() != mask.shape)
    throw ShapeError("masked_mse: shapes " + shape_str(x_hat.shape()) + ", " + shape_str(x.shape()) +
                     " and mask " + shape_str(mask.shape) + " differ");
  std::size_t count = mask.masked_count();
  if (count == 0) throw ContractError("masked_mse: no masked cell");
  double inv = 1.0 / static_cast<double>(count);
  auto a = x_hat.data();
  auto b = x.data();
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (mask.keep[i] == 0) {
      double diff = a[i] - b[i];
      total += diff * diff;
    }
  return make_result({1}, {total * inv}, {x_hat, x}, [inv, keep = mask.keep](detail::Node& self) {
    double g = self.grad[0] * 2.0 * inv;
    const auto& a = self.parents[0]->value;
    const auto& b = self.parents[1]->value;
    double* ga = grad_ptr(self, 0);
    double* gb = grad_ptr(self, 1);
    for (std::size_t i = 0; i < keep.size(); ++i) {
      if (keep[i] != 0) continue;
      double diff = a[i] - b[i];
      if (ga) ga[i] += g * diff;
      if (gb) gb[i] -= g * diff;
    }
  });
}

Tensor mse_loss(const Tensor& y_hat, const Tensor& y) { return mean(square(sub(y_hat, y))); }

Tensor cross_entropy(const Tensor& probabilities, std::span<const std::size_t> labels) {
  if (probabilities.rank() != 2 || probabilities.dim(0) != labels.size())
    throw ShapeError("cross_entropy: probabilities " + shape_str(probabilities.shape()) +
                     " do not match " + std::to_string(labels.size()) + " labels");
  std::size_t nb = probabilities.dim(0);
  std::size_t nc = probabilities.dim(1);
  for (std::size_t lab : labels)
    if (lab >= nc)
      throw ContractError("cross_entropy: label " + std::to_string(lab) + " outside [0, " +
                          std::to_string(nc) + ")");
  constexpr double kFloor = 1e-12;
  auto p = probabilities.data();
  double total = 0.0;
  for (std::size_t b = 0; b < nb; ++b) total -= std::log(std::max(p[b * nc + labels[b]], kFloor));
  double inv = 1.0 / static_cast<double>(nb);
  std::vector<std::size_t> lab(labels.begin(), labels.end());
  return make_result({1}, {total * inv}, {probabilities},
                     [inv, nc, lab = std::move(lab)](detail::Node& self) {
                       double g = self.grad[0] * inv;
                       const auto& p = self.parents[0]->value;
                       double* gp = grad_ptr(self, 0);
                       for (std::size_t b = 0; b < lab.size(); ++b) {
                         double pv = p[b * nc + lab[b]];
                         if (pv > kFloor) gp[b * nc + lab[b]] -= g / pv;
                       }
                     });
}

// ---------------------------------------------------------------------------
// Optimizers

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::Adam ? "adam" : "radam"; }

OptimizerKind optimizer_kind_from_string(const std::string& name) {
  if (name == "adam") return OptimizerKind::Adam;
  if (name == "radam") return OptimizerKind::RAdam;
  throw ConfigError("unknown optimizer '" + name + "' (expected adam or radam)");
}

double radam_rectifier(std::size_t t, double beta2) {
  double rho_inf = 2.0 / (1.0 - beta2) - 1.0;
  double b2t = std::pow(beta2, static_cast<double>(t));
  double rho_t = rho_inf - 2.0 * static_cast<double>(t) * b2t / (1.0 - b2t);
  if (rho_t <= 4.0) return 0.0;
  return std::sqrt((rho_t - 4.0) * (rho_t - 2.0) * rho_inf /
                   ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t));
}

StepInfo optimizer_step(std::span<const Tensor> params, OptimizerState& state,
                        const OptimizerConfig& config) {
  std::vector<NamedTensor> named;
  named.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i)
    named.push_back({"param" + std::to_string(i), params[i]});
  return optimizer_step(std::span<const NamedTensor>(named), state, config);
}

StepInfo optimizer_step(std::span<const NamedTensor> params, OptimizerState& state,
                        const OptimizerConfig& config) {
  if (!(config.lr >= 0.0)) throw ConfigError("learning rate must be non-negative");
  if (!(config.beta1 >= 0.0 && config.beta1 < 1.0 && config.beta2 >= 0.0 && config.beta2 < 1.0))
    throw ConfigError("optimizer betas must lie in [0, 1)");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.tensor.numel(), 0.0);
      state.v.emplace_back(p.tensor.numel(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw ContractError("optimizer state does not match parameters");

  StepInfo info;
  double sq = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& t = params[i].tensor;
    if (state.m[i].size() != t.numel())
      throw ContractError("optimizer state shape mismatch for " + params[i].name);
    for (double g : t.grad()) {
      if (!std::isfinite(g))
        throw DivergenceError("non-finite gradient in " + params[i].name + "; step refused");
      sq += g * g;
    }
  }
  info.grad_norm = std::sqrt(sq);
  double factor = 1.0;
  if (config.clip_norm > 0.0 && info.grad_norm > config.clip_norm) {
    factor = config.clip_norm / info.grad_norm;
    info.clipped = true;
  }

  std::size_t t = ++state.step;
  double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
  double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
  double rect = 1.0;
  if (config.kind == OptimizerKind::RAdam) rect = radam_rectifier(t, config.beta2);
  info.rectifier = rect;

  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor w = params[i].tensor;
    auto grad = w.grad();
    auto values = w.mutable_data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t k = 0; k < values.size(); ++k) {
      double g = grad.empty() ? 0.0 : grad[k] * factor;
      m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * g;
      v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * g * g;
      double m_hat = m[k] / bc1;
      if (rect > 0.0) {
        double v_hat = v[k] / bc2;
        values[k] -= config.lr * rect * m_hat / (std::sqrt(v_hat) + config.eps);
      } else {
        values[k] -= config.lr * m_hat;
      }
    }
  }
  return info;
}

// ---------------------------------------------------------------------------
// Evaluation helpers

std::vector<double> predict_regression(const Model& model, const TimeSeriesDataset& data,
                                       std::span<const std::size_t> indices,
                                       std::size_t batch_size) {
  std::vector<double> out;
  for (const auto& idx : batchify({indices.begin(), indices.end()}, batch_size, false, 0)) {
    Batch batch = make_batch(data, idx);
    auto enc = model.encode(batch.x, batch.lengths);
    Tensor y = model.regression_head(enc.z, batch.lengths);
    out.insert(out.end(), y.data().begin(), y.data().end());
  }
  return out;
}

std::vector<std::size_t> predict_labels(const Model& model, const TimeSeriesDataset& data,
                                        std::span<const std::size_t> indices,
                                        std::size_t batch_size) {
  std::vector<std::size_t> out;
  for (const auto& idx : batchify({indices.begin(), indices.end()}, batch_size, false, 0)) {
    Batch batch = make_batch(data, idx);
    auto enc = model.encode(batch.x, batch.lengths);
    Tensor probs = model.classification_head(enc.z, batch.lengths);
    std::size_t nc = probs.dim(1);
    auto p = probs.data();
    for (std::size_t b = 0; b < probs.dim(0); ++b) {
      auto row = p.subspan(b * nc, nc);
      out.push_back(static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin()));
    }
  }
  return out;
}

double pretrain_loss(const Model& model, const TimeSeriesDataset& data,
                     std::span<const std::size_t> indices, double mask_rate, std::uint64_t seed,
                     std::size_t batch_size) {
  Rng rng = derive_rng(seed, kValidMaskStream);
  double total = 0.0;
  std::size_t cells = 0;
  for (const auto& idx : batchify({indices.begin(), indices.end()}, batch_size, false, 0)) {
    Batch batch = make_batch(data, idx);
    PretrainMask mask = gen_pretrain_mask(batch.x.shape(), mask_rate, rng, batch.lengths);
    auto enc = model.encode(mul(batch.x, mask.keep_tensor()), batch.lengths);
    Tensor loss = masked_mse(model.reconstruct_head(enc.z), batch.x, mask);
    std::size_t n = mask.masked_count();
    total += loss.item() * static_cast<double>(n);
    cells += n;
  }
  return cells == 0 ? 0.0 : total / static_cast<double>(cells);
}

bool metric_higher_is_better(TaskKind task) { return task == TaskKind::Classification; }

std::string metric_name(TaskKind task) {
  switch (task) {
    case TaskKind::Pretrain: return "masked_mse";
    case TaskKind::Regression: return "rmse";
    case TaskKind::Classification: return "accuracy";
  }
  return "metric";
}

double evaluate_metric(const Model& model, const TimeSeriesDataset& data,
                       std::span<const std::size_t> indices, double mask_rate, std::uint64_t seed) {
  if (indices.empty()) throw ContractError("evaluate_metric: no series to evaluate");
  switch (model.config.task) {
    case TaskKind::Pretrain: return pretrain_loss(model, data, indices, mask_rate, seed);
    case TaskKind::Regression: {
      auto pred = predict_regression(model, data, indices);
      double sq = 0.0;
      for (std::size_t i = 0; i < pred.size(); ++i) {
        double diff = pred[i] - data.series[indices[i]].target;
        sq += diff * diff;
      }
      return std::sqrt(sq / static_cast<double>(pred.size()));
    }
    case TaskKind::Classification: {
      auto pred = predict_labels(model, data, indices);
      std::size_t hits = 0;
      for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == data.label(indices[i]);
      return static_cast<double>(hits) / static_cast<double>(pred.size());
    }
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

Tensor batch_loss(const Model& model, const Batch& batch, double mask_rate, Rng& mask_rng,
                  const ForwardContext& ctx) {
  switch (model.config.task) {
    case TaskKind::Pretrain: {
      PretrainMask mask = gen_pretrain_mask(batch.x.shape(), mask_rate, mask_rng, batch.lengths);
      auto enc = model.encode(mul(batch.x, mask.keep_tensor()), batch.lengths, ctx);
      return masked_mse(model.reconstruct_head(enc.z), batch.x, mask);
    }
    case TaskKind::Regression: {
      auto enc = model.encode(batch.x, batch.lengths, ctx);
      Tensor y({batch.targets.size()}, batch.targets);
      return mse_loss(model.regression_head(enc.z, batch.lengths), y);
    }
    case TaskKind::Classification: {
      auto enc = model.encode(batch.x, batch.lengths, ctx);
      return cross_entropy(model.classification_head(enc.z, batch.lengths), batch.labels);
    }
  }
  throw ContractError("unknown task");
}

std::vector<std::vector<double>> snapshot(const Model& model) {
  std::vector<std::vector<double>> out;
  for (const auto& p : model.parameters()) out.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

void restore(Model& model, const std::vector<std::vector<double>>& values) {
  auto params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto dst = params[i].tensor.mutable_data();
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

}  // namespace

TrainResult train(Model& model, const TimeSeriesDataset& data, const TrainConfig& config) {
  if (config.epochs == 0) throw ConfigError("train.epochs must be at least 1");
  if (config.batch_size == 0) throw ConfigError("train.batch_size must be at least 1");
  TaskKind task = model.config.task;
  if (task == TaskKind::Classification) {
    if (data.target_kind != TargetKind::Classification)
      throw ConfigError("classification model needs class labels");
    if (data.n_classes > model.config.n_classes)
      throw ConfigError("data has " + std::to_string(data.n_classes) + " classes, model head has " +
                        std::to_string(model.config.n_classes));
  }
  if (task == TaskKind::Regression && data.target_kind != TargetKind::Regression)
    throw ConfigError("regression model needs real-valued targets");
  if (data.channels != model.config.in_channels)
    throw ConfigError("data has " + std::to_string(data.channels) + " channels, model expects " +
                      std::to_string(model.config.in_channels));

  auto train_idx = data.indices(Split::Train);
  auto valid_idx = data.indices(Split::Valid);
  if (train_idx.empty()) throw ContractError("train split is empty");

  auto params = model.parameters();
  OptimizerState state;
  Rng dropout_rng = derive_rng(config.seed, kDropoutStream);
  Rng mask_rng = derive_rng(config.seed, kMaskStream);
  ForwardContext ctx{true, &dropout_rng};
  bool higher = metric_higher_is_better(task);

  TrainResult result;
  std::optional<std::vector<std::vector<double>>> best;
  std::size_t since_best = 0;

  auto diverged = [&](const std::string& what) {
    if (!config.divergence_dump.empty()) save_checkpoint(config.divergence_dump, model);
    std::string msg = what;
    if (!config.divergence_dump.empty()) msg += "; state written to " + config.divergence_dump;
    throw DivergenceError(msg);
  };

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t seen = 0;
    std::size_t batch_no = 0;
    for (const auto& idx : batchify(train_idx, config.batch_size, true, epoch_seed(config.seed, epoch))) {
      ++batch_no;
      Batch batch = make_batch(data, idx);
      Tensor loss = batch_loss(model, batch, config.mask_rate, mask_rng, ctx);
      double lv = loss.item();
      if (!std::isfinite(lv))
        diverged("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                 std::to_string(batch_no));
      for (auto& p : params) p.tensor.zero_grad();
      backward(loss);
      try {
        optimizer_step(std::span<const NamedTensor>(params), state, config.optimizer);
      } catch (const DivergenceError& e) {
        diverged(std::string(e.what()) + " at epoch " + std::to_string(epoch) + ", batch " +
                 std::to_string(batch_no));
      }
      loss_sum += lv * static_cast<double>(idx.size());
      seen += idx.size();
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(seen);
    rec.valid_metric = std::numeric_limits<double>::quiet_NaN();
    if (!valid_idx.empty())
      rec.valid_metric = evaluate_metric(model, data, valid_idx, config.mask_rate, config.seed);
    result.history.push_back(rec);
    if (config.on_epoch) config.on_epoch(rec);

    bool improved = false;
    if (std::isnan(rec.valid_metric)) {
      improved = true;
    } else if (!std::isfinite(rec.valid_metric)) {
      diverged("non-finite validation metric at epoch " + std::to_string(epoch));
    } else if (std::isnan(result.best_valid) ||
               (higher ? rec.valid_metric > result.best_valid : rec.valid_metric < result.best_valid)) {
      improved = true;
    }
    if (improved) {
      result.best_valid = rec.valid_metric;
      result.best_epoch = epoch;
      best = snapshot(model);
      since_best = 0;
    } else {
      ++since_best;
    }
    if (config.patience > 0 && since_best >= config.patience) break;
    if (!std::isnan(config.target_metric) && !std::isnan(rec.valid_metric) &&
        (higher ? rec.valid_metric >= config.target_metric : rec.valid_metric <= config.target_metric))
      break;
  }
  if (best) restore(model, *best);
  return result;
}

void write_history_csv(const std::string& path, std::span<const EpochRecord> history) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  std::fputs("epoch,train_loss,valid_metric\n", f);
  for (const auto& r : history)
    std::fprintf(f, "%zu,%s,%s\n", r.epoch, format_double(r.train_loss).c_str(),
                 format_double(r.valid_metric).c_str());
  bool ok = std::ferror(f) == 0;
  ok = std::fclose(f) == 0 && ok;
  if (!ok) throw std::runtime_error("failed writing '" + path + "'");
}

}  // namespace eanet
