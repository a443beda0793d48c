// Copyright 2026 The EANet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <vector>

#include "eanet/tensor.hpp"

namespace eanet {

using ScalarFn = std::function<Tensor(const Tensor&)>;

/// Central finite differences against reverse-mode gradients.
///
/// Returns max over coordinates of |g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|).
/// `x` must be a leaf that requires a gradient; its values are perturbed in
/// place and restored. A non-finite f(x) yields +infinity rather than throwing.
double grad_check(const ScalarFn& f, Tensor& x, double eps = 1e-5);

/// Same metric over several parameters of one scalar function of no input
/// (e.g. a model loss). Parameters are perturbed one coordinate at a time.
double grad_check_params(const std::function<Tensor()>& loss_fn, std::vector<Tensor>& params,
                         double eps = 1e-5);

}  // namespace eanet
