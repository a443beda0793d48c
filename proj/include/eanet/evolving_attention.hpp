// Copyright 2026 The EANet Authors
// SPDX-License-Identifier: Apache-2.0

// Evolving attention: scaled dot-product logits per head, the residual
// convolutional evolution of those logits from one block to the next, and
// the value projection that consumes them.
//
//   input_i = alpha * logits_{i-1} + (1 - alpha) * raw_i     (input_1 = raw_1)
//   logits_i = beta * ReLU(conv3x3(input_i)) + (1 - beta) * input_i
//   probs_i  = softmax(logits_i)

#pragma once

#include <cstddef>
#include <optional>

#include "eanet/kernels.hpp"
#include "eanet/random.hpp"
#include "eanet/tensor.hpp"

namespace eanet {

/// Pre-softmax attention of one block, shape (B, K, N, N). Always finite.
struct AttentionLogits {
  Tensor values;
  std::size_t layer_index = 1;
};

struct EvolveParams {
  double alpha = 0.5;
  double beta = 0.3;
  Conv2dMapParams conv;
};

struct AttentionHeadParams {
  std::size_t heads = 1;
  std::size_t head_dim = 1;
  Tensor wq;  // (d_in, heads * head_dim), head k owns columns [k*head_dim, (k+1)*head_dim)
  Tensor wk;
  Tensor wv;
  Tensor wo;  // (heads * head_dim, d_out)
  std::optional<PositionalEncoding> relative;

  /// Splits `width` evenly over `heads`; ConfigError when indivisible.
  static AttentionHeadParams init(std::size_t d_in, std::size_t width, std::size_t d_out,
                                  std::size_t heads, Rng& rng);
};

/// Dropout applied to attention probabilities.
struct DropoutSpec {
  double rate = 0.0;
  Rng* rng = nullptr;
  bool training = false;
};

/// QK^T / sqrt(head_dim) (+ relative logits), x: (B, N, d_in).
AttentionLogits raw_logits(const Tensor& x, const AttentionHeadParams& params);

/// One evolution step. Without `prev` (first block) the raw logits are the
/// convolution input. When `valid` is given, masked positions of the
/// convolution input are zeroed. beta == 0 skips the convolution entirely.
AttentionLogits evolve(const std::optional<AttentionLogits>& prev, const AttentionLogits& raw,
                       const EvolveParams& params, const AttentionMask* valid = nullptr);

/// softmax -> dropout -> per-head A_k (x W^V_k) -> concat -> W^O.
Tensor attention_apply(const AttentionLogits& logits, const Tensor& x,
                       const AttentionHeadParams& params, const AttentionMask* valid,
                       const DropoutSpec& dropout = {});

/// Attention probabilities only (no dropout), for export and inspection.
Tensor attention_probabilities(const AttentionLogits& logits, const AttentionMask* valid);

}  // namespace eanet
