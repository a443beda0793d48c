// Copyright 2026 The EANet Authors
// SPDX-License-Identifier: Apache-2.0

// Differentiable tensor operations. Every function records its backward rule
// on the tape when any input requires a gradient.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "eanet/tensor.hpp"

namespace eanet {

// Elementwise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
/// alpha * a + beta * b in one pass.
Tensor axpby(double alpha, const Tensor& a, double beta, const Tensor& b);
Tensor square(const Tensor& a);
Tensor relu(const Tensor& a);
/// log(max(a, floor)); the gradient is zero where the floor is active.
Tensor log_clamped(const Tensor& a, double floor);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

/// (..., m, k) x (k, n) or (..., m, k) x (..., k, n) with equal leading dims.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose_last2(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);
Tensor permute(const Tensor& a, const std::vector<std::size_t>& axes);

Tensor concat_last(const Tensor& a, const Tensor& b);
Tensor slice_last(const Tensor& a, std::size_t start, std::size_t length);

}  // namespace eanet
