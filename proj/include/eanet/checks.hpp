// Copyright 2026 The EANet Authors
// SPDX-License-Identifier: Apache-2.0

// Invariant suite shared by `eanet selftest` and the test binaries: gradient
// fidelity, degenerate-configuration equivalences, causality of the masked
// map convolutions, softmax normalization and metric reproduction.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eanet/metrics.hpp"

namespace eanet {

struct CheckResult {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

/// "PASS name  measured=... tol=...  detail"
std::string format_check(const CheckResult& result);

/// Relative-error gradient checks of every differentiable kernel.
std::vector<CheckResult> kernel_gradient_checks(std::uint64_t seed, double eps = 1e-5,
                                                double tolerance = 1e-4);

/// Gradient check over all parameters of a small EA-DC model
/// (B=2, T=6, C=2, d=8, K=2, n=2, p=0.5), once per task head.
std::vector<CheckResult> model_gradient_checks(std::uint64_t seed, double eps = 1e-5,
                                               double tolerance = 1e-4);

/// alpha = beta = 0 evolving stack against the vanilla stack with shared weights.
CheckResult check_alpha_beta_zero_equivalence(std::uint64_t seed);
/// p = 1 EA-DC block against the EA-Transformer block with shared weights.
CheckResult check_p_one_equivalence(std::uint64_t seed);
/// p = 0 block: no attention parameters, output equals dilated conv + FFN.
CheckResult check_p_zero_equivalence(std::uint64_t seed);

struct CausalityOptions {
  std::size_t n = 9;
  std::size_t heads = 2;
  std::size_t perturbations = 200;
  /// Replaces the decoder tap set by the full 3x3 kernel (mutation check).
  bool full_decoder_taps = false;
};

/// DecoderSelf: O(i, j) ignores A(r, c) for r > i or c > j, and for j <= i
/// also ignores the masked region c > r.
CheckResult check_decoder_causality(std::uint64_t seed, const CausalityOptions& options = {});
/// EncoderDecoder: O(i, j) ignores A(r, c) for c > j.
CheckResult check_encoder_decoder_causality(std::uint64_t seed,
                                            const CausalityOptions& options = {});
/// A DecoderSelf model assigns probability exactly 0 to keys j > i in every layer.
CheckResult check_decoder_attention_zero(std::uint64_t seed);
/// The DecoderSelf kernel keeps exactly six taps.
CheckResult check_decoder_tap_count(bool full_decoder_taps = false);

/// Rows sum to 1 and are invariant to a per-row constant shift (1e-9).
CheckResult check_softmax_normalization(std::uint64_t seed);

/// RMSE of seven models (LSTM, GRU, ResNet, Dilated Conv, Transformer, DC-T,
/// EA-DC-T) on six regression datasets, as published.
MetricsTable reference_rmse_table();
/// Published aggregate rows for reference_rmse_table().
std::vector<double> reference_relative_difference();
std::vector<double> reference_average_rank();

/// Average relative difference and average rank recomputed from the table
/// against the published aggregates.
std::vector<CheckResult> reference_table_checks();

/// Hand cases and translation invariance of avg_wcd.
std::vector<CheckResult> avg_wcd_checks();

struct SelftestOptions {
  std::uint64_t seed = 7;
  bool full_decoder_taps = false;
};

std::vector<CheckResult> run_selftest(const SelftestOptions& options = {});

}  // namespace eanet
