// Copyright 2026 The EANet Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "eanet/error.hpp"
#include "eanet/evolving_attention.hpp"
#include "eanet/ops.hpp"
#include "eanet/random.hpp"
#include "test_util.hpp"

using namespace eanet;
using eanet::testing::max_abs_diff;
using eanet::testing::values;

namespace {

AttentionHeadParams zero_heads(std::size_t d, std::size_t width, std::size_t heads) {
  Rng rng(1);
  AttentionHeadParams p = AttentionHeadParams::init(d, width, d, heads, rng);
  p.wq = Tensor::zeros(p.wq.shape(), true);
  p.wk = Tensor::zeros(p.wk.shape(), true);
  return p;
}

Tensor identity(std::size_t n) {
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  return Tensor({n, n}, v, true);
}

}  // namespace

TEST_CASE("head split") {
  Rng rng(2);
  AttentionHeadParams p = AttentionHeadParams::init(8, 8, 8, 4, rng);
  CHECK(p.heads == 4);
  CHECK(p.head_dim == 2);
  CHECK(p.wq.shape() == Shape{8, 8});
  CHECK_THROWS_AS(AttentionHeadParams::init(8, 6, 8, 4, rng), ConfigError);
}

TEST_CASE("raw logits") {
  AttentionHeadParams z = zero_heads(4, 4, 2);
  Rng rng(3);
  Tensor x = uniform_tensor({2, 5, 4}, -1, 1, rng);
  AttentionLogits l = raw_logits(x, z);
  CHECK(l.values.shape() == Shape{2, 2, 5, 5});
  for (double v : l.values.data()) CHECK(v == 0.0);
  Tensor p = attention_probabilities(l, nullptr);
  for (double v : p.data()) CHECK(v == 0.2);

  Tensor one = uniform_tensor({1, 1, 4}, -1, 1, rng);
  Tensor p1 = attention_probabilities(raw_logits(one, z), nullptr);
  CHECK(p1.shape() == Shape{1, 2, 1, 1});
  CHECK(p1.at(0) == 1.0);
}

TEST_CASE("raw logits hand case with unit head width") {
  Rng rng(4);
  AttentionHeadParams p = AttentionHeadParams::init(1, 1, 1, 1, rng);
  p.wq = Tensor({1, 1}, {1.0});
  p.wk = Tensor({1, 1}, {1.0});
  // q = x, k = x: rows of x are the queries [2, ...] and keys [1, 3].
  Tensor x({1, 3, 1}, {2, 1, 3});
  AttentionLogits l = raw_logits(x, p);
  CHECK(l.values.at(0 * 3 + 1) == 2.0);  // q=2, k=1
  CHECK(l.values.at(0 * 3 + 2) == 6.0);  // q=2, k=3
}

TEST_CASE("raw logits are scaled by the per-head width") {
  Rng rng(5);
  AttentionHeadParams p = AttentionHeadParams::init(4, 4, 4, 1, rng);
  p.wq = identity(4);
  p.wk = identity(4);
  Tensor x({1, 2, 4}, {1, 1, 1, 1, 2, 0, 0, 0});
  AttentionLogits l = raw_logits(x, p);
  CHECK(std::abs(l.values.at(0) - 4.0 / 2.0) < 1e-15);
  CHECK(std::abs(l.values.at(1) - 2.0 / 2.0) < 1e-15);
  CHECK(std::abs(l.values.at(3) - 4.0 / 2.0) < 1e-15);
}

TEST_CASE("evolve degenerate settings") {
  Rng rng(6);
  EvolveParams none{0.0, 0.0, Conv2dMapParams::init(2, ConvMaskKind::Encoder, rng)};
  AttentionLogits raw{uniform_tensor({1, 2, 3, 3}, -1, 1, rng), 1};
  AttentionLogits prev{uniform_tensor({1, 2, 3, 3}, -1, 1, rng), 1};
  CHECK(values(evolve(prev, raw, none).values) == values(raw.values));
  CHECK(values(evolve(std::nullopt, raw, none).values) == values(raw.values));

  EvolveParams half{0.5, 0.0, none.conv};
  AttentionLogits two{Tensor::full({1, 1, 1, 1}, 2.0), 1};
  AttentionLogits four{Tensor::full({1, 1, 1, 1}, 4.0), 2};
  EvolveParams half1{0.5, 0.0, Conv2dMapParams::init(1, ConvMaskKind::Encoder, rng)};
  AttentionLogits mixed = evolve(two, four, half1);
  CHECK(mixed.values.item() == 3.0);
  CHECK(mixed.layer_index == 2);

  EvolveParams ident{0.0, 1.0, Conv2dMapParams::init(2, ConvMaskKind::Encoder, rng)};
  std::vector<double> k(2 * 2 * 9, 0.0);
  k[((0 * 2 + 0) * 3 + 1) * 3 + 1] = 1.0;
  k[((1 * 2 + 1) * 3 + 1) * 3 + 1] = 1.0;
  ident.conv.kernel = Tensor({2, 2, 3, 3}, k);
  ident.conv.bias = Tensor::zeros({2});
  AttentionLogits nonneg{uniform_tensor({1, 2, 4, 4}, 0, 2, rng), 1};
  CHECK(values(evolve(std::nullopt, nonneg, ident).values) == values(nonneg.values));
}

TEST_CASE("evolve rejects mismatched shapes") {
  Rng rng(7);
  EvolveParams p{0.5, 0.3, Conv2dMapParams::init(2, ConvMaskKind::Encoder, rng)};
  AttentionLogits a{Tensor::zeros({1, 2, 3, 3}), 1};
  AttentionLogits b{Tensor::zeros({1, 2, 4, 4}), 1};
  CHECK_THROWS_AS(evolve(a, b, p), ShapeError);
}

TEST_CASE("evolve is linear in its inputs when beta is zero") {
  Rng rng(8);
  EvolveParams p{0.3, 0.0, Conv2dMapParams::init(2, ConvMaskKind::Encoder, rng)};
  Tensor pv = uniform_tensor({1, 2, 3, 3}, -1, 1, rng);
  Tensor rv = uniform_tensor({1, 2, 3, 3}, -1, 1, rng);
  double lambda = 4.0;  // power of two keeps the scaling exact
  AttentionLogits base = evolve(AttentionLogits{pv, 1}, AttentionLogits{rv, 1}, p);
  AttentionLogits scaled = evolve(AttentionLogits{scale(pv, lambda), 1}, AttentionLogits{scale(rv, lambda), 1}, p);
  CHECK(values(scaled.values) == values(scale(base.values, lambda)));
}

TEST_CASE("evolve equals the residual combination") {
  Rng rng(9);
  EvolveParams p{0.4, 0.7, Conv2dMapParams::init(2, ConvMaskKind::Encoder, rng)};
  Tensor pv = uniform_tensor({2, 2, 4, 4}, -1, 1, rng);
  Tensor rv = uniform_tensor({2, 2, 4, 4}, -1, 1, rng);
  Tensor got = evolve(AttentionLogits{pv, 1}, AttentionLogits{rv, 1}, p).values;
  std::vector<double> in(pv.numel());
  for (std::size_t i = 0; i < in.size(); ++i) in[i] = 0.4 * pv.at(i) + 0.6 * rv.at(i);
  Tensor conv = conv2d_maps(Tensor(pv.shape(), in), p.conv);
  double worst = 0.0;
  for (std::size_t i = 0; i < in.size(); ++i)
    worst = std::max(worst, std::abs(got.at(i) - (0.7 * conv.at(i) + 0.3 * in[i])));
  CHECK(worst <= 1e-12);
}

TEST_CASE("evolve zeroes masked positions before the convolution") {
  Rng rng(10);
  EvolveParams p{0.0, 1.0, Conv2dMapParams::init(1, ConvMaskKind::Encoder, rng)};
  p.conv.kernel = Tensor::full({1, 1, 3, 3}, 1.0);
  p.conv.bias = Tensor::zeros({1});
  AttentionMask causal = AttentionMask::causal(3);
  Tensor raw = Tensor::full({1, 1, 3, 3}, 1.0);
  Tensor poisoned({1, 1, 3, 3}, {1, 1e6, -1e6, 1, 1, 7e5, 1, 1, 1});
  CHECK(values(evolve(std::nullopt, AttentionLogits{raw, 1}, p, &causal).values) ==
        values(evolve(std::nullopt, AttentionLogits{poisoned, 1}, p, &causal).values));
}

TEST_CASE("attention_apply hand cases") {
  // Uniform attention over identical value rows returns the projected value.
  AttentionHeadParams p = zero_heads(2, 2, 1);
  p.wv = identity(2);
  p.wo = identity(2);
  Tensor x({1, 3, 2}, {0.5, -1, 0.5, -1, 0.5, -1});
  Tensor out = attention_apply(raw_logits(x, p), x, p, nullptr);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(std::abs(out.at(i * 2) - 0.5) < 1e-15);
    CHECK(std::abs(out.at(i * 2 + 1) + 1.0) < 1e-15);
  }

  // B=1, K=1, N=2, d=1: A = softmax([[0, ln 3], [0, 0]]), V = 2x, W^O = 3.
  Rng rng(11);
  AttentionHeadParams q = AttentionHeadParams::init(1, 1, 1, 1, rng);
  q.wv = Tensor({1, 1}, {2.0});
  q.wo = Tensor({1, 1}, {3.0});
  Tensor x2({1, 2, 1}, {1.0, 5.0});
  AttentionLogits l{Tensor({1, 1, 2, 2}, {0.0, std::log(3.0), 0.0, 0.0}), 1};
  Tensor o = attention_apply(l, x2, q, nullptr);
  // row 0: 0.25 * 2 + 0.75 * 10 = 8 -> 24; row 1: 0.5 * 2 + 0.5 * 10 = 6 -> 18.
  CHECK(std::abs(o.at(0) - 24.0) < 1e-12);
  CHECK(std::abs(o.at(1) - 18.0) < 1e-12);

  // One-hot attention selects the value row.
  AttentionLogits hot{Tensor({1, 1, 2, 2}, {-1e3, 0.0, 0.0, -1e3}), 1};
  Tensor h = attention_apply(hot, x2, q, nullptr);
  CHECK(std::abs(h.at(0) - 30.0) < 1e-9);
  CHECK(std::abs(h.at(1) - 6.0) < 1e-9);
}

TEST_CASE("causal attention after evolution puts zero mass on the future") {
  Rng rng(12);
  AttentionHeadParams p = AttentionHeadParams::init(6, 6, 6, 2, rng);
  EvolveParams e{0.5, 0.5, Conv2dMapParams::init(2, ConvMaskKind::DecoderSelf, rng)};
  AttentionMask causal = AttentionMask::causal(5);
  Tensor x = uniform_tensor({2, 5, 6}, -2, 2, rng);
  AttentionLogits first = evolve(std::nullopt, raw_logits(x, p), e, &causal);
  AttentionLogits second = evolve(first, raw_logits(x, p), e, &causal);
  Tensor probs = attention_probabilities(second, &causal);
  for (std::size_t plane = 0; plane < 4; ++plane)
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = i + 1; j < 5; ++j) CHECK(probs.at((plane * 5 + i) * 5 + j) == 0.0);
}

TEST_CASE("row argmax is invariant to a constant shift of the logits") {
  Rng rng(13);
  Tensor l = uniform_tensor({1, 1, 4, 6}, -3, 3, rng);
  std::vector<double> s = values(l);
  for (double& v : s) v += 11.0;
  Tensor a = attention_probabilities(AttentionLogits{l, 1}, nullptr);
  Tensor b = attention_probabilities(AttentionLogits{Tensor(l.shape(), s), 1}, nullptr);
  for (std::size_t i = 0; i < 4; ++i) {
    auto row_a = a.data().subspan(i * 6, 6), row_b = b.data().subspan(i * 6, 6);
    CHECK(std::max_element(row_a.begin(), row_a.end()) - row_a.begin() ==
          std::max_element(row_b.begin(), row_b.end()) - row_b.begin());
  }
}

TEST_CASE("attention dropout is identity outside training") {
  Rng rng(14);
  AttentionHeadParams p = AttentionHeadParams::init(4, 4, 4, 2, rng);
  Tensor x = uniform_tensor({1, 3, 4}, -1, 1, rng);
  AttentionLogits l = raw_logits(x, p);
  Rng drng(1);
  DropoutSpec eval{0.5, &drng, false};
  CHECK(values(attention_apply(l, x, p, nullptr, eval)) == values(attention_apply(l, x, p, nullptr)));
}
