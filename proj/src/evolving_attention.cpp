// Copyright 2026 The EANet Authors
// SPDX-License-Identifier: Apache-2.0

#include "eanet/evolving_attention.hpp"

#include <cmath>

#include "eanet/error.hpp"
#include "eanet/ops.hpp"

namespace eanet {

namespace {

// (B, N, K*dh) -> (B, K, N, dh)
Tensor split_heads(const Tensor& t, std::size_t heads, std::size_t head_dim) {
  std::size_t nb = t.dim(0);
  std::size_t n = t.dim(1);
  return permute(reshape(t, {nb, n, heads, head_dim}), {0, 2, 1, 3});
}

// (B, K, N, dh) -> (B, N, K*dh)
Tensor merge_heads(const Tensor& t) {
  std::size_t nb = t.dim(0);
  std::size_t heads = t.dim(1);
  std::size_t n = t.dim(2);
  std::size_t dh = t.dim(3);
  return reshape(permute(t, {0, 2, 1, 3}), {nb, n, heads * dh});
}

}  // namespace

AttentionHeadParams AttentionHeadParams::init(std::size_t d_in, std::size_t width,
                                              std::size_t d_out, std::size_t heads, Rng& rng) {
  if (heads == 0 || width == 0 || width % heads != 0)
    throw ConfigError("attention width " + std::to_string(width) + " is not divisible into " +
                      std::to_string(heads) + " heads");
  AttentionHeadParams p;
  p.heads = heads;
  p.head_dim = width / heads;
  p.wq = xavier_tensor({d_in, width}, d_in, width, rng);
  p.wk = xavier_tensor({d_in, width}, d_in, width, rng);
  p.wv = xavier_tensor({d_in, width}, d_in, width, rng);
  p.wo = xavier_tensor({width, d_out}, width, d_out, rng);
  return p;
}

AttentionLogits raw_logits(const Tensor& x, const AttentionHeadParams& params) {
  if (x.rank() != 3) throw ShapeError("raw_logits expects x of shape (B, N, d)");
  std::size_t width = params.heads * params.head_dim;
  if (params.wq.rank() != 2 || params.wq.dim(1) != width || params.wk.shape() != params.wq.shape())
    throw ConfigError("query/key projections do not match " + std::to_string(params.heads) +
                      " heads of width " + std::to_string(params.head_dim));
  Tensor q = split_heads(matmul(x, params.wq), params.heads, params.head_dim);
  Tensor k = split_heads(matmul(x, params.wk), params.heads, params.head_dim);
  Tensor logits = scale(matmul(q, transpose_last2(k)),
                        1.0 / std::sqrt(static_cast<double>(params.head_dim)));
  if (params.relative) logits = add(logits, relative_logits_1d(q, *params.relative));
  return {logits, 1};
}

AttentionLogits evolve(const std::optional<AttentionLogits>& prev, const AttentionLogits& raw,
                       const EvolveParams& params, const AttentionMask* valid) {
  if (!(params.alpha >= 0.0 && params.alpha <= 1.0 && params.beta >= 0.0 && params.beta <= 1.0))
    throw ConfigError("evolve: alpha and beta must lie in [0, 1]");
  Tensor input = raw.values;
  std::size_t index = 1;
  if (prev) {
    if (prev->values.shape() != raw.values.shape())
      throw ShapeError("evolve: previous logits " + shape_str(prev->values.shape()) +
                       " do not match current " + shape_str(raw.values.shape()));
    input = axpby(params.alpha, prev->values, 1.0 - params.alpha, raw.values);
    index = prev->layer_index + 1;
  }
  if (valid) input = zero_invalid(input, *valid);
  if (params.beta == 0.0) return {input, index};
  Tensor conv = conv2d_maps(input, params.conv);
  return {axpby(params.beta, conv, 1.0 - params.beta, input), index};
}

Tensor attention_probabilities(const AttentionLogits& logits, const AttentionMask* valid) {
  return valid ? softmax_masked(logits.values, *valid) : softmax_masked(logits.values);
}

Tensor attention_apply(const AttentionLogits& logits, const Tensor& x,
                       const AttentionHeadParams& params, const AttentionMask* valid,
                       const DropoutSpec& dropout_spec) {
  const Shape& ls = logits.values.shape();
  if (x.rank() != 3 || ls.size() != 4 || ls[0] != x.dim(0) || ls[1] != params.heads ||
      ls[2] != x.dim(1) || ls[3] != x.dim(1))
    throw ShapeError("attention_apply: logits " + shape_str(ls) + " do not match input " +
                     shape_str(x.shape()) + " with " + std::to_string(params.heads) + " heads");
  Tensor probs = attention_probabilities(logits, valid);
  if (dropout_spec.training && dropout_spec.rate > 0.0) {
    if (!dropout_spec.rng) throw ContractError("training-mode dropout needs a generator");
    probs = dropout(probs, dropout_spec.rate, *dropout_spec.rng, true);
  }
  Tensor v = split_heads(matmul(x, params.wv), params.heads, params.head_dim);
  Tensor heads = matmul(probs, v);
  return matmul(merge_heads(heads), params.wo);
}

}  // namespace eanet
