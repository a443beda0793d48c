// Copyright 2026 The EANet Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <numeric>
#include <set>

#include "eanet/data.hpp"
#include "eanet/error.hpp"
#include "test_util.hpp"

using namespace eanet;

namespace {

std::string write_file(const std::filesystem::path& dir, const std::string& name, const std::string& text) {
  auto path = (dir / name).string();
  std::ofstream(path) << text;
  return path;
}

// Frequency bin with the largest DFT magnitude (bins 1 .. T/2).
std::size_t dominant_bin(const TimeSeriesDataset& d, std::size_t i, std::size_t c) {
  std::size_t T = d.length, best = 0;
  double best_mag = -1;
  for (std::size_t k = 1; k <= T / 2; ++k) {
    std::complex<double> acc = 0;
    for (std::size_t t = 0; t < T; ++t)
      acc += d.value(i, t, c) * std::polar(1.0, -2.0 * std::numbers::pi * double(k) * double(t) / double(T));
    if (std::abs(acc) > best_mag) {
      best_mag = std::abs(acc);
      best = k;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("minimal csv") {
  auto dir = eanet::testing::scratch_dir("csv_min");
  auto path = write_file(dir, "a.csv", "series_id,t,dim_0,target\nx,0,1.5,2\nx,1,2.5,2\nx,2,-3,2\n");
  TimeSeriesDataset d = load_csv_long(path);
  REQUIRE(d.series.size() == 1);
  CHECK(d.length == 3);
  CHECK(d.channels == 1);
  CHECK(d.series[0].values == std::vector<double>{1.5, 2.5, -3});
  CHECK(d.series[0].target == 2.0);
}

TEST_CASE("csv padding, ordering and target from the first row") {
  auto dir = eanet::testing::scratch_dir("csv_pad");
  std::string text = "series_id,t,dim_0,dim_1,target\n";
  for (int t = 3; t >= 0; --t) text += "a," + std::to_string(t) + "," + std::to_string(t) + ",1,7\n";
  for (int t = 0; t < 6; ++t) text += "b," + std::to_string(t) + ",9,9," + (t == 0 ? "4" : "99") + "\n";
  TimeSeriesDataset d = load_csv_long(write_file(dir, "p.csv", text));
  REQUIRE(d.series.size() == 2);
  CHECK(d.length == 6);
  CHECK(d.series[0].length == 4);
  CHECK(d.series[1].length == 6);
  CHECK(d.value(0, 0, 0) == 0.0);
  CHECK(d.value(0, 3, 0) == 3.0);
  CHECK(d.value(0, 4, 0) == 0.0);
  CHECK(d.value(0, 5, 1) == 0.0);
  CHECK(d.series[0].target == 7.0);
  CHECK(d.series[1].target == 4.0);
}

TEST_CASE("csv errors name the offending line") {
  auto dir = eanet::testing::scratch_dir("csv_err");
  auto expect_error = [&](const std::string& text, const std::string& needle) {
    auto path = write_file(dir, "e.csv", text);
    try {
      load_csv_long(path);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      INFO(e.what());
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };
  expect_error("series_id,t,dim_0,dim_1,target\na,0,1,2,0\na,1,1,0\n", ":3");
  expect_error("series_id,t,dim_0,target\na,0,x,0\n", ":2");
  expect_error("series_id,t,dim_0,target\na,0,1,0\na,0,2,0\n", "duplicate");
  expect_error("id,time,v,y\n", "header");
  expect_error("series_id,t,dim_0,target\na,0,nan,0\n", ":2");
  CHECK_THROWS(load_csv_long((dir / "missing.csv").string()));
}

TEST_CASE("classification csv needs integer labels") {
  auto dir = eanet::testing::scratch_dir("csv_cls");
  auto good = write_file(dir, "g.csv", "series_id,t,dim_0,target\na,0,1,0\nb,0,1,2\n");
  TimeSeriesDataset d = load_csv_long(good, TargetKind::Classification);
  CHECK(d.n_classes == 3);
  CHECK(d.label(1) == 2);
  auto bad = write_file(dir, "b.csv", "series_id,t,dim_0,target\na,0,1,0.5\n");
  CHECK_THROWS_AS(load_csv_long(bad, TargetKind::Classification), ParseError);
}

TEST_CASE("csv round trip is exact") {
  auto dir = eanet::testing::scratch_dir("csv_rt");
  SynthSpec spec;
  spec.task = SynthTask::NoisySineRegress;
  spec.train_count = 5;
  spec.test_count = 0;
  spec.length = 11;
  spec.channels = 3;
  TimeSeriesDataset d = synth_dataset(spec);
  d.series[2].length = 7;
  for (std::size_t t = 7; t < 11; ++t)
    for (std::size_t c = 0; c < 3; ++c) d.series[2].values[t * 3 + c] = 0.0;
  auto path = (dir / "rt.csv").string();
  write_csv_long(path, d);
  TimeSeriesDataset back = load_csv_long(path);
  REQUIRE(back.series.size() == d.series.size());
  for (std::size_t i = 0; i < d.series.size(); ++i) {
    CHECK(back.series[i].id == d.series[i].id);
    CHECK(back.series[i].values == d.series[i].values);
    CHECK(back.series[i].length == d.series[i].length);
    CHECK(back.series[i].target == d.series[i].target);
  }
}

TEST_CASE("append_dataset re-pads to the longer length") {
  SynthSpec a;
  a.length = 5;
  a.train_per_class = 1;
  a.test_per_class = 0;
  SynthSpec b = a;
  b.length = 8;
  TimeSeriesDataset d = synth_dataset(a);
  std::size_t before = d.series.size();
  append_dataset(d, synth_dataset(b));
  CHECK(d.length == 8);
  CHECK(d.series.size() == 2 * before);
  CHECK(d.series[0].values.size() == 8 * 2);
  CHECK(d.series[0].length == 5);
  CHECK(d.value(0, 6, 1) == 0.0);
  d.validate();
}

TEST_CASE("synthetic frequency classes") {
  SynthSpec spec;
  CHECK(synth_dataset(spec).indices(Split::Train).size() == 800);
  CHECK(synth_dataset(spec).indices(Split::Test).size() == 200);

  spec.n_classes = 2;
  spec.frequencies = {1, 4};
  spec.noise = 0.0;
  spec.train_per_class = 10;
  spec.test_per_class = 0;
  TimeSeriesDataset d = synth_dataset(spec);
  for (std::size_t i = 0; i < d.series.size(); ++i)
    for (std::size_t c = 0; c < d.channels; ++c)
      CHECK(dominant_bin(d, i, c) == (d.label(i) == 0 ? 1u : 4u));

  std::vector<std::size_t> per_class(2, 0);
  for (std::size_t i = 0; i < d.series.size(); ++i) ++per_class[d.label(i)];
  CHECK(per_class[0] == per_class[1]);

  TimeSeriesDataset again = synth_dataset(spec);
  for (std::size_t i = 0; i < d.series.size(); ++i) CHECK(again.series[i].values == d.series[i].values);
  spec.seed = 1;
  CHECK(synth_dataset(spec).series[0].values != d.series[0].values);
}

TEST_CASE("synthetic regression targets are the frequencies") {
  SynthSpec spec;
  spec.task = SynthTask::NoisySineRegress;
  spec.noise = 0.0;
  spec.length = 128;
  spec.train_count = 20;
  spec.test_count = 5;
  TimeSeriesDataset d = synth_dataset(spec);
  CHECK(d.target_kind == TargetKind::Regression);
  CHECK(d.series.size() == 25);
  for (const auto& s : d.series) CHECK((s.target >= 1.0 && s.target <= 5.0));
  CHECK(synth_task_from_string("noisy-sine") == SynthTask::NoisySineRegress);
  CHECK_THROWS(synth_task_from_string("walk"));
}

TEST_CASE("standardize") {
  TimeSeriesDataset d;
  d.length = 4;
  d.channels = 2;
  Series a{"a", {1, 5, 2, 5, 3, 5, 100, 100}, 3, 0.0, Split::Train};
  Series b{"b", {5, 5, 7, 5, 0, 0, 0, 0}, 2, 0.0, Split::Train};
  Series c{"c", {4, 5, 4, 5, 4, 5, 4, 5}, 4, 0.0, Split::Test};
  d.series = {a, b, c};
  Standardizer st = fit_standardizer(d);
  // Valid train steps of channel 0: 1, 2, 3, 5, 7.
  CHECK(std::abs(st.mean[0] - 3.6) < 1e-12);
  double var = ((1 - 3.6) * (1 - 3.6) + (2 - 3.6) * (2 - 3.6) + (3 - 3.6) * (3 - 3.6) + (5 - 3.6) * (5 - 3.6) +
                (7 - 3.6) * (7 - 3.6)) / 5.0;
  CHECK(std::abs(st.stddev[0] - std::sqrt(var)) < 1e-12);

  TimeSeriesDataset s = standardize(d);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t t = 0; t < 4; ++t) {
      if (t >= s.series[i].length) {
        CHECK(s.value(i, t, 0) == 0.0);
        CHECK(s.value(i, t, 1) == 0.0);
      } else {
        CHECK(s.value(i, t, 1) == 0.0);  // constant channel
      }
    }
  CHECK(std::abs(s.value(2, 0, 0) - (4 - 3.6) / std::sqrt(var)) < 1e-12);
}

TEST_CASE("standardized train channels have zero mean and unit spread") {
  SynthSpec spec;
  spec.train_per_class = 20;
  spec.test_per_class = 5;
  TimeSeriesDataset raw = synth_dataset(spec);
  for (auto& s : raw.series)
    for (double& v : s.values) v = 3.0 * v + 10.0;
  TimeSeriesDataset s = standardize(raw);
  for (std::size_t c = 0; c < s.channels; ++c) {
    double sum = 0, sq = 0, n = 0;
    for (std::size_t i : s.indices(Split::Train))
      for (std::size_t t = 0; t < s.series[i].length; ++t) {
        sum += s.value(i, t, c);
        n += 1;
      }
    double mean = sum / n;
    for (std::size_t i : s.indices(Split::Train))
      for (std::size_t t = 0; t < s.series[i].length; ++t) sq += (s.value(i, t, c) - mean) * (s.value(i, t, c) - mean);
    CHECK(std::abs(mean) <= 1e-9);
    CHECK(std::abs(std::sqrt(sq / n) - 1.0) <= 1e-6);
  }
  TimeSeriesDataset twice = standardize(s);
  double worst = 0;
  for (std::size_t i = 0; i < s.series.size(); ++i)
    worst = std::max(worst, eanet::testing::max_abs_diff(s.series[i].values, twice.series[i].values));
  CHECK(worst <= 1e-9);
}

TEST_CASE("validation split") {
  SynthSpec spec;
  spec.train_per_class = 10;
  TimeSeriesDataset d = synth_dataset(spec);
  TimeSeriesDataset e = d;
  split_validation(d, 0.3, 5);
  split_validation(e, 0.3, 5);
  CHECK(d.indices(Split::Valid).size() == 12);
  CHECK(d.indices(Split::Train).size() == 28);
  CHECK(d.indices(Split::Valid) == e.indices(Split::Valid));
}

TEST_CASE("batchify") {
  std::vector<std::size_t> idx(10);
  std::iota(idx.begin(), idx.end(), 0);
  auto batches = batchify(idx, 4, true, 3);
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].size() == 4);
  CHECK(batches[1].size() == 4);
  CHECK(batches[2].size() == 2);
  std::set<std::size_t> seen;
  for (const auto& b : batches) seen.insert(b.begin(), b.end());
  CHECK(seen.size() == 10);
  CHECK(batchify(idx, 4, true, 3) == batches);
  CHECK(batchify(idx, 4, true, 4) != batches);
  auto plain = batchify(idx, 4, false, 3);
  CHECK(plain[0] == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK(plain[2] == std::vector<std::size_t>{8, 9});
  CHECK_THROWS(batchify(idx, 0, false, 0));
}

TEST_CASE("make_batch") {
  SynthSpec spec;
  spec.train_per_class = 1;
  spec.test_per_class = 0;
  TimeSeriesDataset d = synth_dataset(spec);
  d.series[1].length = 10;
  std::vector<std::size_t> pick{1, 3};
  Batch b = make_batch(d, pick);
  CHECK(b.x.shape() == Shape{2, 64, 2});
  CHECK(b.lengths == std::vector<std::size_t>{10, 64});
  CHECK(b.labels == std::vector<std::size_t>{1, 3});
  CHECK(b.x.at(5 * 2 + 1) == d.value(1, 5, 1));
}
