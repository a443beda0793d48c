// Copyright 2026 The EANet Authors
// SPDX-License-Identifier: Apache-2.0

#include "eanet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "eanet/error.hpp"

namespace eanet {

namespace {

double relative_error(double ad, double fd) {
  return std::abs(ad - fd) / std::max(1e-8, std::abs(ad) + std::abs(fd));
}

}  // namespace

double grad_check_params(const std::function<Tensor()>& loss_fn, std::vector<Tensor>& params,
                         double eps) {
  if (!(eps > 0.0 && eps <= 1e-3)) throw ContractError("grad_check eps must lie in (0, 1e-3]");
  for (auto& p : params)
    if (!p.is_leaf() || !p.requires_grad())
      throw ContractError("grad_check inputs must be leaves that require a gradient");

  Tensor loss = loss_fn();
  if (!std::isfinite(loss.item())) return std::numeric_limits<double>::infinity();
  backward(loss);
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) {
    if (p.has_grad())
      analytic.emplace_back(p.grad().begin(), p.grad().end());
    else
      analytic.emplace_back(p.numel(), 0.0);  // unreachable from the loss
  }

  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto values = params[k].mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      double saved = values[i];
      values[i] = saved + eps;
      double up = loss_fn().item();
      values[i] = saved - eps;
      double down = loss_fn().item();
      values[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) return std::numeric_limits<double>::infinity();
      double fd = (up - down) / (2.0 * eps);
      worst = std::max(worst, relative_error(analytic[k][i], fd));
    }
  }
  return worst;
}

double grad_check(const ScalarFn& f, Tensor& x, double eps) {
  std::vector<Tensor> params{x};
  return grad_check_params([&] { return f(x); }, params, eps);
}

}  // namespace eanet
