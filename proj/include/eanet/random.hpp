// Copyright 2026 The EANet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>

#include "eanet/tensor.hpp"

namespace eanet {

using Rng = std::mt19937_64;

/// Independent stream derived from a base seed and a stream tag.
inline Rng derive_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

/// Uniform draw from [0, 1) built from the top 53 bits of one engine output,
/// identical on every standard library.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

Tensor uniform_tensor(Shape shape, double lo, double hi, Rng& rng, bool requires_grad = false);
Tensor normal_tensor(Shape shape, double stddev, Rng& rng, bool requires_grad = false);

/// Glorot-uniform init with explicit fan-in/fan-out.
Tensor xavier_tensor(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace eanet
