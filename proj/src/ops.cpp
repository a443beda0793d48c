// Copyright 2026 The EANet Authors
// SPDX-License-Identifier: Apache-2.0

#include "eanet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "eanet/error.hpp"
#include "src/gemm.hpp"
#include "src/node_access.hpp"

namespace eanet {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()) + " differ");
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return axpby(1.0, a, 1.0, b); }

Tensor sub(const Tensor& a, const Tensor& b) { return axpby(1.0, a, -1.0, b); }

Tensor axpby(double alpha, const Tensor& a, double beta, const Tensor& b) {
  require_same_shape(a, b, "axpby");
  auto x = a.data();
  auto y = b.data();
  std::vector<double> out(x.size());
  if (alpha == 1.0 && beta == 1.0) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  } else if (alpha == 1.0 && beta == -1.0) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = alpha * x[i] + beta * y[i];
  }
  return make_result(a.shape(), std::move(out), {a, b}, [alpha, beta](detail::Node& self) {
    const auto& g = self.grad;
    if (double* ga = grad_ptr(self, 0))
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += alpha * g[i];
    if (double* gb = grad_ptr(self, 1))
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += beta * g[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  auto x = a.data();
  auto y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    const auto& g = self.grad;
    const auto& x = self.parents[0]->value;
    const auto& y = self.parents[1]->value;
    if (double* ga = grad_ptr(self, 0))
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
    if (double* gb = grad_ptr(self, 1))
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * x[i];
  });
}

Tensor scale(const Tensor& a, double s) {
  auto x = a.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = s * x[i];
  return make_result(a.shape(), std::move(out), {a}, [s](detail::Node& self) {
    const auto& g = self.grad;
    double* ga = grad_ptr(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
  });
}

Tensor square(const Tensor& a) { return mul(a, a); }

Tensor relu(const Tensor& a) {
  auto x = a.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  return make_result(a.shape(), std::move(out), {a}, [](detail::Node& self) {
    const auto& g = self.grad;
    const auto& x = self.parents[0]->value;
    double* ga = grad_ptr(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (x[i] > 0.0) ga[i] += g[i];
  });
}

Tensor log_clamped(const Tensor& a, double floor) {
  auto x = a.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(std::max(x[i], floor));
  return make_result(a.shape(), std::move(out), {a}, [floor](detail::Node& self) {
    const auto& g = self.grad;
    const auto& x = self.parents[0]->value;
    double* ga = grad_ptr(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (x[i] > floor) ga[i] += g[i] / x[i];
  });
}

Tensor sum(const Tensor& a) {
  auto x = a.data();
  double s = 0.0;
  for (double v : x) s += v;
  return make_result({1}, {s}, {a}, [](detail::Node& self) {
    double g = self.grad[0];
    double* ga = grad_ptr(self, 0);
    std::size_t n = self.parents[0]->value.size();
    for (std::size_t i = 0; i < n; ++i) ga[i] += g;
  });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 2 || b.rank() < 2)
    throw ShapeError("matmul needs rank >= 2 operands, got " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  std::size_t m = as[as.size() - 2];
  std::size_t k = as.back();
  std::size_t kb = bs[bs.size() - 2];
  std::size_t n = bs.back();
  if (k != kb)
    throw ShapeError("matmul inner dimensions differ: " + shape_str(as) + " x " + shape_str(bs));
  bool broadcast_b = bs.size() == 2;
  if (!broadcast_b) {
    if (!std::equal(as.begin(), as.end() - 2, bs.begin(), bs.end() - 2))
      throw ShapeError("matmul batch dimensions differ: " + shape_str(as) + " x " +
                       shape_str(bs));
  }
  std::size_t batch = a.numel() / (m * k);
  Shape out_shape(as.begin(), as.end() - 1);
  out_shape.push_back(n);
  std::vector<double> out(batch * m * n, 0.0);
  const double* ap = a.data().data();
  const double* bp = b.data().data();
  if (broadcast_b) {
    gemm::acc(ap, bp, out.data(), batch * m, k, n);
  } else {
    for (std::size_t t = 0; t < batch; ++t)
      gemm::acc(ap + t * m * k, bp + t * k * n, out.data() + t * m * n, m, k, n);
  }
  return make_result(std::move(out_shape), std::move(out), {a, b},
                     [batch, m, k, n, broadcast_b](detail::Node& self) {
                       const double* g = self.grad.data();
                       const double* av = self.parents[0]->value.data();
                       const double* bv = self.parents[1]->value.data();
                       double* ga = grad_ptr(self, 0);
                       double* gb = grad_ptr(self, 1);
                       if (broadcast_b) {
                         if (ga) gemm::acc_bt(g, bv, ga, batch * m, k, n);
                         if (gb) gemm::acc_at(av, g, gb, batch * m, k, n);
                         return;
                       }
                       for (std::size_t t = 0; t < batch; ++t) {
                         if (ga) gemm::acc_bt(g + t * m * n, bv + t * k * n, ga + t * m * k, m, k, n);
                         if (gb) gemm::acc_at(av + t * m * k, g + t * m * n, gb + t * k * n, m, k, n);
                       }
                     });
}

Tensor transpose_last2(const Tensor& a) {
  if (a.rank() < 2) throw ShapeError("transpose_last2 needs rank >= 2");
  std::vector<std::size_t> axes(a.rank());
  std::iota(axes.begin(), axes.end(), 0);
  std::swap(axes[axes.size() - 1], axes[axes.size() - 2]);
  return permute(a, axes);
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel())
    throw ShapeError("reshape " + shape_str(a.shape()) + " -> " + shape_str(shape) +
                     " changes element count");
  std::vector<double> out(a.data().begin(), a.data().end());
  return make_result(std::move(shape), std::move(out), {a}, [](detail::Node& self) {
    const auto& g = self.grad;
    double* ga = grad_ptr(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

Tensor permute(const Tensor& a, const std::vector<std::size_t>& axes) {
  const Shape& in = a.shape();
  std::size_t r = in.size();
  if (axes.size() != r) throw ShapeError("permute: axis count does not match rank");
  std::vector<bool> seen(r, false);
  for (std::size_t ax : axes) {
    if (ax >= r || seen[ax]) throw ShapeError("permute: axes are not a permutation");
    seen[ax] = true;
  }
  Shape out_shape(r);
  for (std::size_t i = 0; i < r; ++i) out_shape[i] = in[axes[i]];
  std::vector<std::size_t> in_strides(r, 1);
  for (std::size_t i = r - 1; i > 0; --i) in_strides[i - 1] = in_strides[i] * in[i];
  // Stride in the input for each output axis.
  std::vector<std::size_t> src_stride(r);
  for (std::size_t i = 0; i < r; ++i) src_stride[i] = in_strides[axes[i]];

  std::size_t n = a.numel();
  std::vector<std::size_t> gather(n);
  std::vector<std::size_t> idx(r, 0);
  std::size_t src = 0;
  for (std::size_t flat = 0; flat < n; ++flat) {
    gather[flat] = src;
    for (std::size_t ax = r; ax-- > 0;) {
      ++idx[ax];
      src += src_stride[ax];
      if (idx[ax] < out_shape[ax]) break;
      src -= src_stride[ax] * out_shape[ax];
      idx[ax] = 0;
    }
  }
  auto x = a.data();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = x[gather[i]];
  return make_result(std::move(out_shape), std::move(out), {a},
                     [gather = std::move(gather)](detail::Node& self) {
                       const auto& g = self.grad;
                       double* ga = grad_ptr(self, 0);
                       for (std::size_t i = 0; i < g.size(); ++i) ga[gather[i]] += g[i];
                     });
}

Tensor concat_last(const Tensor& a, const Tensor& b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (as.size() != bs.size() || !std::equal(as.begin(), as.end() - 1, bs.begin()))
    throw ShapeError("concat_last: " + shape_str(as) + " and " + shape_str(bs) +
                     " differ outside the last axis");
  std::size_t wa = as.back();
  std::size_t wb = bs.back();
  std::size_t rows = a.numel() / wa;
  Shape out_shape = as;
  out_shape.back() = wa + wb;
  std::vector<double> out(rows * (wa + wb));
  auto x = a.data();
  auto y = b.data();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(x.begin() + r * wa, wa, out.begin() + r * (wa + wb));
    std::copy_n(y.begin() + r * wb, wb, out.begin() + r * (wa + wb) + wa);
  }
  return make_result(std::move(out_shape), std::move(out), {a, b},
                     [rows, wa, wb](detail::Node& self) {
                       const double* g = self.grad.data();
                       double* ga = grad_ptr(self, 0);
                       double* gb = grad_ptr(self, 1);
                       for (std::size_t r = 0; r < rows; ++r) {
                         const double* gr = g + r * (wa + wb);
                         if (ga)
                           for (std::size_t j = 0; j < wa; ++j) ga[r * wa + j] += gr[j];
                         if (gb)
                           for (std::size_t j = 0; j < wb; ++j) gb[r * wb + j] += gr[wa + j];
                       }
                     });
}

Tensor slice_last(const Tensor& a, std::size_t start, std::size_t length) {
  std::size_t w = a.shape().back();
  if (length == 0 || start + length > w)
    throw ShapeError("slice_last: range out of bounds for " + shape_str(a.shape()));
  std::size_t rows = a.numel() / w;
  Shape out_shape = a.shape();
  out_shape.back() = length;
  std::vector<double> out(rows * length);
  auto x = a.data();
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(x.begin() + r * w + start, length, out.begin() + r * length);
  return make_result(std::move(out_shape), std::move(out), {a},
                     [rows, w, start, length](detail::Node& self) {
                       const double* g = self.grad.data();
                       double* ga = grad_ptr(self, 0);
                       for (std::size_t r = 0; r < rows; ++r)
                         for (std::size_t j = 0; j < length; ++j)
                           ga[r * w + start + j] += g[r * length + j];
                     });
}

}  // namespace eanet
