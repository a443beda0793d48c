// Copyright 2026 The EANet Authors
// SPDX-License-Identifier: Apache-2.0

// Evaluation metrics, cross-dataset aggregation (average rank and average
// relative difference), average within-cluster distance and attention export.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "eanet/evolving_attention.hpp"
#include "eanet/kernels.hpp"
#include "eanet/tensor.hpp"

namespace eanet {

/// sqrt(mean((pred - target)^2)). ContractError on empty or unequal input.
double rmse(std::span<const double> preds, std::span<const double> targets);
/// Fraction of equal entries.
double accuracy(std::span<const std::size_t> preds, std::span<const std::size_t> labels);

/// Dataset x model score matrix.
struct MetricsTable {
  std::vector<std::string> datasets;  // rows
  std::vector<std::string> models;    // columns
  std::vector<double> values;         // row-major
  bool lower_is_better = true;

  double at(std::size_t row, std::size_t col) const { return values[row * models.size() + col]; }
  /// Rectangular, non-empty, finite.
  void validate() const;
};

/// Header `<corner>,<model>,...`; each further line `<dataset>,<value>,...`.
/// Ragged rows, non-numeric cells and empty files throw ParseError.
MetricsTable parse_metrics_csv(const std::string& text, const std::string& origin = "<table>");
MetricsTable read_metrics_csv(const std::string& path);
void write_metrics_csv(const std::string& path, const MetricsTable& table);

/// Per model: mean over datasets of (r_ij - mean_i) / mean_i, where mean_i is
/// the row mean. A zero row mean throws ContractError.
std::vector<double> avg_relative_difference(const MetricsTable& table);

/// Per model: mean over datasets of its rank in that row (best = 1, ties
/// share the mean of the positions they occupy).
std::vector<double> avg_rank(const MetricsTable& table);

/// Ranks of one row with the same conventions as avg_rank.
std::vector<double> rank_row(std::span<const double> row, bool lower_is_better);

/// Average within-cluster distance: (1/N) sum over instances of the Euclidean
/// distance to the centroid of the instance's class. With n_classes > 0,
/// labels must lie below it and every class must be populated.
double avg_wcd(const std::vector<std::vector<double>>& z, std::span<const std::size_t> labels,
               std::size_t n_classes = 0);
/// Rows of a (N, d) tensor as instances.
double avg_wcd(const Tensor& z, std::span<const std::size_t> labels, std::size_t n_classes = 0);

struct AttentionRecord {
  std::size_t layer = 0;  // 1-based
  std::size_t head = 0;
  std::size_t row = 0;
  std::size_t col = 0;
  double logit = 0.0;
  double probability = 0.0;
};

/// Rows for one batch element: layer,head,row,col,logit,probability with the
/// probabilities recomputed through the masked softmax.
std::vector<AttentionRecord> attention_records(const std::vector<AttentionLogits>& logits,
                                               const AttentionMask* valid,
                                               std::size_t batch_index = 0);
void export_attention(const std::string& path, const std::vector<AttentionLogits>& logits,
                      const AttentionMask* valid, std::size_t batch_index = 0);
std::vector<AttentionRecord> import_attention(const std::string& path);

}  // namespace eanet
