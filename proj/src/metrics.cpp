// Copyright 2026 The EANet Authors
// SPDX-License-Identifier: Apache-2.0

#include "eanet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "eanet/error.hpp"
#include "src/text_util.hpp"

namespace eanet {

double rmse(std::span<const double> preds, std::span<const double> targets) {
  if (preds.empty() || preds.size() != targets.size())
    throw ContractError("rmse needs two non-empty sequences of equal length");
  double sq = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    double d = preds[i] - targets[i];
    sq += d * d;
  }
  return std::sqrt(sq / static_cast<double>(preds.size()));
}

double accuracy(std::span<const std::size_t> preds, std::span<const std::size_t> labels) {
  if (preds.empty() || preds.size() != labels.size())
    throw ContractError("accuracy needs two non-empty sequences of equal length");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

// ---------------------------------------------------------------------------
// Tables

void MetricsTable::validate() const {
  if (datasets.empty() || models.empty()) throw ContractError("metrics table is empty");
  if (values.size() != datasets.size() * models.size())
    throw ContractError("metrics table is not rectangular");
  for (double v : values)
    if (!std::isfinite(v)) throw ContractError("metrics table holds a non-finite value");
}

MetricsTable parse_metrics_csv(const std::string& text, const std::string& origin) {
  std::istringstream is(text);
  std::string line;
  std::size_t line_no = 0;
  MetricsTable table;
  bool header = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split(trim(line), ',');
    std::string where = origin + ":" + std::to_string(line_no) + ": ";
    if (!header) {
      if (cells.size() < 2) throw ParseError(where + "header needs at least one model column");
      for (std::size_t j = 1; j < cells.size(); ++j) table.models.emplace_back(trim(cells[j]));
      header = true;
      continue;
    }
    if (cells.size() != table.models.size() + 1)
      throw ParseError(where + "expected " + std::to_string(table.models.size() + 1) +
                       " cells, found " + std::to_string(cells.size()));
    table.datasets.emplace_back(trim(cells[0]));
    for (std::size_t j = 1; j < cells.size(); ++j) {
      double v = 0.0;
      if (!try_parse_double(cells[j], v) || !std::isfinite(v))
        throw ParseError(where + "cell '" + cells[j] + "' is not a finite number");
      table.values.push_back(v);
    }
  }
  if (!header) throw ParseError(origin + ": empty metrics table");
  if (table.datasets.empty()) throw ParseError(origin + ": metrics table has no data rows");
  return table;
}

MetricsTable read_metrics_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_metrics_csv(ss.str(), path);
}

void write_metrics_csv(const std::string& path, const MetricsTable& table) {
  table.validate();
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  os << "dataset";
  for (const auto& m : table.models) os << ',' << m;
  os << '\n';
  for (std::size_t i = 0; i < table.datasets.size(); ++i) {
    os << table.datasets[i];
    for (std::size_t j = 0; j < table.models.size(); ++j) os << ',' << format_double(table.at(i, j));
    os << '\n';
  }
  if (!os) throw std::runtime_error("failed writing '" + path + "'");
}

std::vector<double> avg_relative_difference(const MetricsTable& table) {
  table.validate();
  std::size_t rows = table.datasets.size();
  std::size_t cols = table.models.size();
  std::vector<double> out(cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < cols; ++j) mean += table.at(i, j);
    mean /= static_cast<double>(cols);
    if (mean == 0.0) throw ContractError("row '" + table.datasets[i] + "' has a zero mean");
    for (std::size_t j = 0; j < cols; ++j) out[j] += (table.at(i, j) - mean) / mean;
  }
  for (double& v : out) v /= static_cast<double>(rows);
  return out;
}

std::vector<double> rank_row(std::span<const double> row, bool lower_is_better) {
  std::vector<std::size_t> order(row.size());
  std::iota(order.begin(), order.end(), 0);
  auto better = [&](std::size_t a, std::size_t b) {
    return lower_is_better ? row[a] < row[b] : row[a] > row[b];
  };
  std::stable_sort(order.begin(), order.end(), better);
  std::vector<double> ranks(row.size());
  for (std::size_t start = 0; start < order.size();) {
    std::size_t end = start + 1;
    while (end < order.size() && row[order[end]] == row[order[start]]) ++end;
    // Positions start+1 .. end share their mean.
    double shared = 0.5 * static_cast<double>(start + 1 + end);
    for (std::size_t k = start; k < end; ++k) ranks[order[k]] = shared;
    start = end;
  }
  return ranks;
}

std::vector<double> avg_rank(const MetricsTable& table) {
  table.validate();
  std::size_t rows = table.datasets.size();
  std::size_t cols = table.models.size();
  std::vector<double> out(cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    auto ranks = rank_row(std::span<const double>(table.values).subspan(i * cols, cols),
                          table.lower_is_better);
    for (std::size_t j = 0; j < cols; ++j) out[j] += ranks[j];
  }
  for (double& v : out) v /= static_cast<double>(rows);
  return out;
}

// ---------------------------------------------------------------------------
// Average within-cluster distance

double avg_wcd(const std::vector<std::vector<double>>& z, std::span<const std::size_t> labels,
               std::size_t n_classes) {
  if (z.empty() || z.size() != labels.size())
    throw ContractError("avg_wcd needs one label per representation");
  std::size_t dim = z.front().size();
  for (const auto& v : z)
    if (v.size() != dim) throw ShapeError("avg_wcd: representations differ in width");
  std::size_t classes = n_classes;
  if (classes == 0) classes = *std::max_element(labels.begin(), labels.end()) + 1;
  for (std::size_t l : labels)
    if (l >= classes) throw ContractError("avg_wcd: unknown label " + std::to_string(l));

  std::vector<std::vector<double>> centroid(classes, std::vector<double>(dim, 0.0));
  std::vector<std::size_t> count(classes, 0);
  for (std::size_t i = 0; i < z.size(); ++i) {
    ++count[labels[i]];
    for (std::size_t c = 0; c < dim; ++c) centroid[labels[i]][c] += z[i][c];
  }
  for (std::size_t k = 0; k < classes; ++k) {
    if (count[k] == 0) {
      if (n_classes > 0) throw ContractError("avg_wcd: class " + std::to_string(k) + " is empty");
      continue;
    }
    for (double& v : centroid[k]) v /= static_cast<double>(count[k]);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    double sq = 0.0;
    for (std::size_t c = 0; c < dim; ++c) {
      double d = z[i][c] - centroid[labels[i]][c];
      sq += d * d;
    }
    total += std::sqrt(sq);
  }
  return total / static_cast<double>(z.size());
}

double avg_wcd(const Tensor& z, std::span<const std::size_t> labels, std::size_t n_classes) {
  if (z.rank() != 2) throw ShapeError("avg_wcd expects (N, d) representations");
  std::vector<std::vector<double>> rows(z.dim(0));
  auto v = z.data();
  for (std::size_t i = 0; i < rows.size(); ++i)
    rows[i].assign(v.begin() + static_cast<long>(i * z.dim(1)),
                   v.begin() + static_cast<long>((i + 1) * z.dim(1)));
  return avg_wcd(rows, labels, n_classes);
}

// ---------------------------------------------------------------------------
// Attention export

std::vector<AttentionRecord> attention_records(const std::vector<AttentionLogits>& logits,
                                               const AttentionMask* valid,
                                               std::size_t batch_index) {
  std::vector<AttentionRecord> out;
  for (const auto& layer : logits) {
    const Tensor& values = layer.values;
    if (values.rank() != 4) throw ShapeError("attention logits must be (B, K, N, N)");
    std::size_t nb = values.dim(0), heads = values.dim(1), n = values.dim(2);
    if (batch_index >= nb) throw ContractError("attention export: batch index out of range");
    for (double v : values.data())
      if (!std::isfinite(v)) throw ContractError("attention export: non-finite logit");
    Tensor probs = attention_probabilities(layer, valid);
    auto lv = values.data();
    auto pv = probs.data();
    for (std::size_t k = 0; k < heads; ++k)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          std::size_t idx = ((batch_index * heads + k) * n + i) * n + j;
          out.push_back({layer.layer_index, k, i, j, lv[idx], pv[idx]});
        }
  }
  return out;
}

void export_attention(const std::string& path, const std::vector<AttentionLogits>& logits,
                      const AttentionMask* valid, std::size_t batch_index) {
  auto records = attention_records(logits, valid, batch_index);
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  std::fputs("layer,head,row,col,logit,probability\n", f);
  for (const auto& r : records)
    std::fprintf(f, "%zu,%zu,%zu,%zu,%s,%s\n", r.layer, r.head, r.row, r.col,
                 format_double(r.logit).c_str(), format_double(r.probability).c_str());
  bool ok = std::ferror(f) == 0;
  ok = std::fclose(f) == 0 && ok;
  if (!ok) throw std::runtime_error("failed writing '" + path + "'");
}

std::vector<AttentionRecord> import_attention(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(is, line) || trim(line) != "layer,head,row,col,logit,probability")
    throw ParseError(path + ": missing attention export header");
  std::vector<AttentionRecord> out;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split(trim(line), ',');
    std::string where = path + ":" + std::to_string(line_no);
    if (cells.size() != 6) throw ParseError(where + ": expected 6 cells");
    AttentionRecord r;
    r.layer = parse_size(cells[0], where);
    r.head = parse_size(cells[1], where);
    r.row = parse_size(cells[2], where);
    r.col = parse_size(cells[3], where);
    r.logit = parse_double(cells[4], where);
    r.probability = parse_double(cells[5], where);
    out.push_back(r);
  }
  return out;
}

}  // namespace eanet
