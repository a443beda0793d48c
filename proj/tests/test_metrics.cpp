// Copyright 2026 The EANet Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <fstream>

#include "eanet/checks.hpp"
#include "eanet/error.hpp"
#include "eanet/metrics.hpp"
#include "test_util.hpp"

using namespace eanet;

TEST_CASE("rmse and accuracy") {
  std::vector<double> p{1, 2, 3}, t{1, 2, 7};
  CHECK(std::abs(rmse(p, t) - std::sqrt(16.0 / 3.0)) < 1e-15);
  CHECK(rmse(p, p) == 0.0);
  CHECK_THROWS_AS(rmse({}, {}), ContractError);
  CHECK_THROWS_AS(rmse(p, std::vector<double>{1}), ContractError);
  std::vector<std::size_t> a{0, 1, 2, 2}, b{0, 1, 1, 2};
  CHECK(accuracy(a, b) == 0.75);
}

TEST_CASE("ranks with ties") {
  std::vector<double> row{0.3, 0.1, 0.3, 0.5};
  CHECK(rank_row(row, true) == std::vector<double>{2.5, 1, 2.5, 4});
  CHECK(rank_row(row, false) == std::vector<double>{2.5, 4, 2.5, 1});
  std::vector<double> same{1, 1, 1};
  CHECK(rank_row(same, true) == std::vector<double>{2, 2, 2});
}

TEST_CASE("aggregates over a small table") {
  MetricsTable t = parse_metrics_csv("dataset,A,B,C\nd1,1,2,3\nd2,4,2,6\n");
  CHECK(t.models == std::vector<std::string>{"A", "B", "C"});
  CHECK(t.datasets == std::vector<std::string>{"d1", "d2"});
  auto ranks = avg_rank(t);
  CHECK(ranks == std::vector<double>{1.5, 1.5, 3.0});
  // Row means 2 and 4.
  auto rel = avg_relative_difference(t);
  CHECK(std::abs(rel[0] - 0.5 * (-0.5 + 0.0)) < 1e-15);
  CHECK(std::abs(rel[1] - 0.5 * (0.0 - 0.5)) < 1e-15);
  CHECK(std::abs(rel[2] - 0.5 * (0.5 + 0.5)) < 1e-15);
  double total = rel[0] + rel[1] + rel[2];
  CHECK(std::abs(total) < 1e-15);

  t.lower_is_better = false;
  CHECK(avg_rank(t) == std::vector<double>{2.5, 2.5, 1.0});

  MetricsTable zero = parse_metrics_csv("x,A,B\nd,0,0\n");
  CHECK_THROWS_AS(avg_relative_difference(zero), ContractError);
}

TEST_CASE("metrics csv parse errors") {
  CHECK_THROWS_AS(parse_metrics_csv(""), ParseError);
  CHECK_THROWS_AS(parse_metrics_csv("dataset,A,B\nd1,1\n"), ParseError);
  CHECK_THROWS_AS(parse_metrics_csv("dataset,A\nd1,abc\n"), ParseError);
  try {
    parse_metrics_csv("dataset,A,B\nd1,1,2\nd2,1\n", "tbl.csv");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("tbl.csv:3") != std::string::npos);
  }
}

TEST_CASE("metrics csv round trip") {
  auto dir = eanet::testing::scratch_dir("metrics_rt");
  MetricsTable t = parse_metrics_csv("dataset,A,B\nd1,0.1,0.30000000000000004\nd2,1e-7,5\n");
  auto path = (dir / "t.csv").string();
  write_metrics_csv(path, t);
  MetricsTable back = read_metrics_csv(path);
  CHECK(back.values == t.values);
  CHECK(back.models == t.models);
  CHECK(back.datasets == t.datasets);
}

TEST_CASE("reference table aggregates") {
  MetricsTable t = reference_rmse_table();
  REQUIRE(t.models.size() == 7);
  REQUIRE(t.datasets.size() == 6);
  auto rel = avg_relative_difference(t);
  auto published = reference_relative_difference();
  for (std::size_t j = 0; j < 7; ++j) CHECK(std::abs(rel[j] - published[j]) <= 0.002);
  auto ranks = avg_rank(t);
  CHECK(ranks[6] == 1.0);
  CHECK(std::abs(ranks[0] - 5.2) <= 0.05);
  for (const auto& r : reference_table_checks()) {
    INFO(format_check(r));
    CHECK(r.passed);
  }
}

TEST_CASE("average within-cluster distance") {
  std::vector<std::vector<double>> collapsed{{1, 1}, {1, 1}, {3, 0}};
  std::vector<std::size_t> labels{0, 0, 1};
  CHECK(std::abs(avg_wcd(collapsed, labels)) <= 1e-9);

  // Class 0 centroid (1, 0): two points at distance 1; class 1 is a singleton.
  std::vector<std::vector<double>> two{{0, 0}, {2, 0}, {0, 3}};
  CHECK(std::abs(avg_wcd(two, labels) - 2.0 / 3.0) <= 1e-9);

  Tensor z({3, 2}, {0, 0, 2, 0, 0, 3});
  CHECK(std::abs(avg_wcd(z, labels) - 2.0 / 3.0) <= 1e-9);

  // Direct oracle on a 3-4-5 layout.
  std::vector<std::vector<double>> tri{{0, 0}, {6, 8}};
  std::vector<std::size_t> same{0, 0};
  CHECK(std::abs(avg_wcd(tri, same) - 5.0) <= 1e-12);

  CHECK_THROWS(avg_wcd(two, std::vector<std::size_t>{0, 0, 2}, 2));
  CHECK_THROWS(avg_wcd(two, std::vector<std::size_t>{0, 0, 0}, 2));
  for (const auto& r : avg_wcd_checks()) {
    INFO(format_check(r));
    CHECK(r.passed);
  }
}

TEST_CASE("attention export round trip") {
  auto dir = eanet::testing::scratch_dir("attn");
  Tensor values({1, 1, 2, 2}, {0.5, 7.0, -1.0, 2.0});
  std::vector<AttentionLogits> logits{{values, 1}};
  AttentionMask causal = AttentionMask::causal(2);
  auto path = (dir / "a.csv").string();
  export_attention(path, logits, &causal);
  auto records = import_attention(path);
  REQUIRE(records.size() == 4);
  CHECK(records[0].layer == 1);
  CHECK(records[1].col == 1);
  CHECK(records[1].logit == 7.0);
  CHECK(records[0].probability == 1.0);
  CHECK(records[1].probability == 0.0);
  double e = std::exp(-3.0);
  CHECK(std::abs(records[2].probability - e / (1 + e)) < 1e-15);
  CHECK(std::abs(records[3].probability - 1 / (1 + e)) < 1e-15);

  std::ofstream(dir / "bad.csv") << "layer,head\n";
  CHECK_THROWS_AS(import_attention((dir / "bad.csv").string()), ParseError);
}
