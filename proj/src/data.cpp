// Copyright 2026 The EANet Authors
// SPDX-License-Identifier: Apache-2.0

#include "eanet/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <unordered_map>

#include "eanet/error.hpp"
#include "eanet/random.hpp"
#include "src/text_util.hpp"

namespace eanet {

std::vector<std::size_t> TimeSeriesDataset::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < series.size(); ++i)
    if (series[i].split == split) out.push_back(i);
  return out;
}

std::size_t TimeSeriesDataset::label(std::size_t i) const {
  return static_cast<std::size_t>(series[i].target);
}

void TimeSeriesDataset::validate() const {
  for (const auto& s : series) {
    if (s.values.size() != length * channels)
      throw ContractError("series '" + s.id + "' does not have shape (T, C)");
    if (s.length == 0 || s.length > length)
      throw ContractError("series '" + s.id + "' has an invalid length");
    for (double v : s.values)
      if (!std::isfinite(v)) throw ContractError("series '" + s.id + "' contains a non-finite value");
    if (!std::isfinite(s.target)) throw ContractError("series '" + s.id + "' has a non-finite target");
    if (target_kind == TargetKind::Classification &&
        (s.target < 0 || s.target != std::floor(s.target) ||
         static_cast<std::size_t>(s.target) >= n_classes))
      throw ContractError("series '" + s.id + "' has label outside [0, n_classes)");
  }
}

// ---------------------------------------------------------------------------
// CSV

TimeSeriesDataset load_csv_long(const std::string& path, TargetKind kind, Split dest) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(is, line)) throw ParseError(path + ": empty file");
  auto header = split(trim(line), ',');
  for (auto& h : header) h = std::string(trim(h));
  if (header.size() < 4 || header[0] != "series_id" || header[1] != "t" || header.back() != "target")
    throw ParseError(path + ": header must be series_id,t,dim_0,...,target");
  std::size_t channels = header.size() - 3;
  for (std::size_t c = 0; c < channels; ++c)
    if (header[2 + c] != "dim_" + std::to_string(c))
      throw ParseError(path + ": header column " + std::to_string(3 + c) + " must be dim_" +
                       std::to_string(c));

  struct Raw {
    std::string id;
    std::map<std::size_t, std::vector<double>> steps;
    double target = 0.0;
  };
  std::vector<Raw> raws;
  std::unordered_map<std::string, std::size_t> by_id;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto where = [&] { return path + ":" + std::to_string(line_no) + ": "; };
    auto fields = split(trim(line), ',');
    if (fields.size() != header.size())
      throw ParseError(where() + "expected " + std::to_string(header.size()) + " columns, found " +
                       std::to_string(fields.size()));
    std::string id(trim(fields[0]));
    if (id.empty()) throw ParseError(where() + "empty series_id");
    std::size_t t = 0;
    try {
      t = parse_size(fields[1], "t");
    } catch (const ParseError& e) {
      throw ParseError(where() + e.what());
    }
    std::vector<double> row(channels);
    for (std::size_t c = 0; c < channels; ++c)
      if (!try_parse_double(fields[2 + c], row[c]) || !std::isfinite(row[c]))
        throw ParseError(where() + "dim_" + std::to_string(c) + " value '" + fields[2 + c] +
                         "' is not a finite number");
    double target = 0.0;
    if (!try_parse_double(fields.back(), target) || !std::isfinite(target))
      throw ParseError(where() + "target '" + fields.back() + "' is not a finite number");

    auto [it, inserted] = by_id.emplace(id, raws.size());
    if (inserted) raws.push_back(Raw{id, {}, target});
    Raw& r = raws[it->second];
    if (!r.steps.emplace(t, std::move(row)).second)
      throw ParseError(where() + "duplicate step t=" + std::to_string(t) + " for series '" + id + "'");
  }
  if (raws.empty()) throw ParseError(path + ": no data rows");

  TimeSeriesDataset data;
  data.channels = channels;
  data.target_kind = kind;
  for (const auto& r : raws) data.length = std::max(data.length, r.steps.size());
  for (auto& r : raws) {
    Series s;
    s.id = r.id;
    s.length = r.steps.size();
    s.target = r.target;
    s.split = dest;
    s.values.assign(data.length * channels, 0.0);
    std::size_t t = 0;
    for (const auto& [step, row] : r.steps) {
      std::copy(row.begin(), row.end(), s.values.begin() + t * channels);
      ++t;
    }
    data.series.push_back(std::move(s));
  }
  if (kind == TargetKind::Classification) {
    for (const auto& s : data.series) {
      if (s.target < 0 || s.target != std::floor(s.target))
        throw ParseError(path + ": series '" + s.id + "' has non-integer class label " +
                         format_double(s.target));
      data.n_classes = std::max(data.n_classes, static_cast<std::size_t>(s.target) + 1);
    }
  }
  data.validate();
  return data;
}

void write_csv_long(const std::string& path, const TimeSeriesDataset& data) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  std::fputs("series_id,t", f);
  for (std::size_t c = 0; c < data.channels; ++c) std::fprintf(f, ",dim_%zu", c);
  std::fputs(",target\n", f);
  for (const auto& s : data.series)
    for (std::size_t t = 0; t < s.length; ++t) {
      std::fprintf(f, "%s,%zu", s.id.c_str(), t);
      for (std::size_t c = 0; c < data.channels; ++c)
        std::fprintf(f, ",%.17g", s.values[t * data.channels + c]);
      std::fprintf(f, ",%.17g\n", s.target);
    }
  bool ok = std::ferror(f) == 0;
  ok = std::fclose(f) == 0 && ok;
  if (!ok) throw std::runtime_error("failed writing '" + path + "'");
}

void append_dataset(TimeSeriesDataset& data, const TimeSeriesDataset& other) {
  if (data.series.empty()) {
    data = other;
    return;
  }
  if (other.channels != data.channels)
    throw ShapeError("cannot merge datasets with " + std::to_string(data.channels) + " and " +
                     std::to_string(other.channels) + " channels");
  if (other.target_kind != data.target_kind) throw ContractError("cannot merge datasets of different task kinds");
  std::size_t len = std::max(data.length, other.length);
  for (auto& s : data.series) s.values.resize(len * data.channels, 0.0);
  for (auto s : other.series) {
    s.values.resize(len * data.channels, 0.0);
    data.series.push_back(std::move(s));
  }
  data.length = len;
  data.n_classes = std::max(data.n_classes, other.n_classes);
}

// ---------------------------------------------------------------------------
// Synthetic tasks

std::string to_string(SynthTask task) {
  return task == SynthTask::FreqClass ? "freq-class" : "noisy-sine";
}

SynthTask synth_task_from_string(const std::string& name) {
  if (name == "freq-class") return SynthTask::FreqClass;
  if (name == "noisy-sine") return SynthTask::NoisySineRegress;
  throw ConfigError("unknown synthetic task '" + name + "' (expected freq-class or noisy-sine)");
}

TimeSeriesDataset synth_dataset(const SynthSpec& spec) {
  if (spec.length == 0 || spec.channels == 0) throw ConfigError("synthetic series need T, C >= 1");
  if (spec.noise < 0.0) throw ConfigError("synthetic noise must be non-negative");
  Rng rng = derive_rng(spec.seed, 0x73796e7468ULL);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> noise(0.0, 1.0);

  TimeSeriesDataset data;
  data.length = spec.length;
  data.channels = spec.channels;
  const double len = static_cast<double>(spec.length);

  auto make_series = [&](std::string id, double freq, double target, Split split) {
    Series s;
    s.id = std::move(id);
    s.length = spec.length;
    s.target = target;
    s.split = split;
    s.values.resize(spec.length * spec.channels);
    for (std::size_t c = 0; c < spec.channels; ++c) {
      double phi = phase(rng);
      for (std::size_t t = 0; t < spec.length; ++t) {
        double v = std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(t) / len + phi);
        if (spec.noise > 0.0) v += spec.noise * noise(rng);
        s.values[t * spec.channels + c] = v;
      }
    }
    return s;
  };

  if (spec.task == SynthTask::FreqClass) {
    if (spec.n_classes < 2) throw ConfigError("FreqClass needs at least 2 classes");
    std::vector<double> freqs = spec.frequencies;
    if (freqs.empty())
      for (std::size_t k = 0; k < spec.n_classes; ++k) freqs.push_back(1.0 + 2.0 * static_cast<double>(k));
    if (freqs.size() != spec.n_classes) throw ConfigError("need one frequency per class");
    for (std::size_t i = 0; i < freqs.size(); ++i)
      for (std::size_t j = i + 1; j < freqs.size(); ++j)
        if (freqs[i] == freqs[j]) throw ConfigError("class frequencies must be distinct");
    data.target_kind = TargetKind::Classification;
    data.n_classes = spec.n_classes;
    std::size_t serial = 0;
    for (auto [split, per_class] : {std::pair{Split::Train, spec.train_per_class},
                                    std::pair{Split::Test, spec.test_per_class}})
      for (std::size_t i = 0; i < per_class; ++i)
        for (std::size_t k = 0; k < spec.n_classes; ++k)
          data.series.push_back(make_series("s" + std::to_string(serial++), freqs[k],
                                            static_cast<double>(k), split));
  } else {
    if (!(spec.min_frequency > 0.0 && spec.max_frequency >= spec.min_frequency))
      throw ConfigError("NoisySineRegress needs 0 < min_frequency <= max_frequency");
    data.target_kind = TargetKind::Regression;
    std::uniform_real_distribution<double> freq(spec.min_frequency, spec.max_frequency);
    std::size_t serial = 0;
    for (auto [split, count] : {std::pair{Split::Train, spec.train_count},
                                std::pair{Split::Test, spec.test_count}})
      for (std::size_t i = 0; i < count; ++i) {
        double f = freq(rng);
        data.series.push_back(make_series("s" + std::to_string(serial++), f, f, split));
      }
  }
  return data;
}

// ---------------------------------------------------------------------------
// Normalization, splits, batching

Standardizer fit_standardizer(const TimeSeriesDataset& data) {
  std::size_t channels = data.channels;
  std::vector<double> sum(channels, 0.0);
  std::vector<std::size_t> count(channels, 0);
  auto train = data.indices(Split::Train);
  if (train.empty()) throw ContractError("standardize needs a non-empty train split");
  for (std::size_t i : train) {
    const Series& s = data.series[i];
    for (std::size_t t = 0; t < s.length; ++t)
      for (std::size_t c = 0; c < channels; ++c) {
        sum[c] += s.values[t * channels + c];
        ++count[c];
      }
  }
  Standardizer st;
  st.mean.resize(channels);
  st.stddev.resize(channels);
  for (std::size_t c = 0; c < channels; ++c) st.mean[c] = sum[c] / static_cast<double>(count[c]);
  std::vector<double> sq(channels, 0.0);
  for (std::size_t i : train) {
    const Series& s = data.series[i];
    for (std::size_t t = 0; t < s.length; ++t)
      for (std::size_t c = 0; c < channels; ++c) {
        double dv = s.values[t * channels + c] - st.mean[c];
        sq[c] += dv * dv;
      }
  }
  for (std::size_t c = 0; c < channels; ++c)
    st.stddev[c] = std::max(1e-8, std::sqrt(sq[c] / static_cast<double>(count[c])));
  return st;
}

TimeSeriesDataset apply_standardizer(const TimeSeriesDataset& data, const Standardizer& st) {
  if (st.mean.size() != data.channels) throw ShapeError("standardizer channel count mismatch");
  TimeSeriesDataset out = data;
  for (auto& s : out.series) {
    for (std::size_t t = 0; t < s.length; ++t)
      for (std::size_t c = 0; c < data.channels; ++c) {
        double& v = s.values[t * data.channels + c];
        v = (v - st.mean[c]) / st.stddev[c];
      }
    std::fill(s.values.begin() + static_cast<std::ptrdiff_t>(s.length * data.channels), s.values.end(), 0.0);
  }
  return out;
}

TimeSeriesDataset standardize(const TimeSeriesDataset& data) {
  return apply_standardizer(data, fit_standardizer(data));
}

void split_validation(TimeSeriesDataset& data, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw ContractError("validation fraction must lie in [0, 1)");
  auto train = data.indices(Split::Train);
  auto n_valid = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(train.size())));
  Rng rng = derive_rng(seed, 0x76616c6964ULL);
  std::shuffle(train.begin(), train.end(), rng);
  for (std::size_t i = 0; i < n_valid; ++i) data.series[train[i]].split = Split::Valid;
}

std::vector<std::vector<std::size_t>> batchify(std::vector<std::size_t> indices,
                                               std::size_t batch_size, bool shuffle,
                                               std::uint64_t seed) {
  if (batch_size == 0) throw ContractError("batch size must be at least 1");
  if (shuffle) {
    Rng rng = derive_rng(seed, 0x6261746368ULL);
    std::shuffle(indices.begin(), indices.end(), rng);
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < indices.size(); start += batch_size) {
    std::size_t end = std::min(indices.size(), start + batch_size);
    batches.emplace_back(indices.begin() + static_cast<long>(start),
                         indices.begin() + static_cast<long>(end));
  }
  return batches;
}

Batch make_batch(const TimeSeriesDataset& data, std::span<const std::size_t> indices) {
  if (indices.empty()) throw ContractError("make_batch needs at least one series");
  Batch b;
  std::size_t stride = data.length * data.channels;
  std::vector<double> x(indices.size() * stride);
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const Series& s = data.series.at(indices[k]);
    std::copy(s.values.begin(), s.values.end(), x.begin() + static_cast<long>(k * stride));
    b.lengths.push_back(s.length);
    b.targets.push_back(s.target);
    if (data.target_kind == TargetKind::Classification) b.labels.push_back(data.label(indices[k]));
  }
  b.x = Tensor({indices.size(), data.length, data.channels}, std::move(x));
  return b;
}

}  // namespace eanet
