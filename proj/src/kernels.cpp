// Copyright 2026 The EANet Authors
// SPDX-License-Identifier: Apache-2.0

#include "eanet/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "eanet/error.hpp"
#include "eanet/ops.hpp"
#include "src/gemm.hpp"
#include "src/node_access.hpp"

namespace eanet {

// ---------------------------------------------------------------------------
// Masks and softmax

AttentionMask AttentionMask::all(std::size_t batch, std::size_t rows, std::size_t cols) {
  AttentionMask m;
  m.batch = batch;
  m.rows = rows;
  m.cols = cols;
  m.valid.assign(batch * rows * cols, 1);
  return m;
}

AttentionMask AttentionMask::causal(std::size_t n) {
  AttentionMask m = all(1, n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) m.valid[i * n + j] = 0;
  return m;
}

AttentionMask AttentionMask::key_padding(std::span<const std::size_t> lengths, std::size_t n) {
  AttentionMask m = all(lengths.size(), n, n);
  for (std::size_t b = 0; b < lengths.size(); ++b) {
    if (lengths[b] == 0 || lengths[b] > n)
      throw ContractError("key_padding: length must lie in [1, n]");
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = lengths[b]; j < n; ++j) m.valid[(b * n + i) * n + j] = 0;
  }
  return m;
}

AttentionMask AttentionMask::operator&(const AttentionMask& other) const {
  if (rows != other.rows || cols != other.cols ||
      (batch != other.batch && batch != 1 && other.batch != 1))
    throw ShapeError("attention masks of different shapes cannot be combined");
  AttentionMask m = all(std::max(batch, other.batch), rows, cols);
  for (std::size_t b = 0; b < m.batch; ++b)
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j)
        m.valid[(b * rows + i) * cols + j] =
            at(batch == 1 ? 0 : b, i, j) && other.at(other.batch == 1 ? 0 : b, i, j);
  return m;
}

namespace {

// Maps each row of `logits` (..., R, L) to the offset of its mask row.
std::vector<std::size_t> mask_row_offsets(const Tensor& logits, const AttentionMask& mask) {
  const Shape& s = logits.shape();
  std::size_t cols = s.back();
  std::size_t rows = s.size() >= 2 ? s[s.size() - 2] : 1;
  std::size_t total_rows = logits.numel() / cols;
  std::size_t outer = total_rows / rows;
  std::size_t lead_batch = s.size() >= 3 ? s[0] : 1;
  if (mask.cols != cols || mask.rows != rows || (mask.batch != 1 && mask.batch != lead_batch))
    throw ShapeError("mask (" + std::to_string(mask.batch) + "," + std::to_string(mask.rows) +
                     "," + std::to_string(mask.cols) + ") does not fit logits " + shape_str(s));
  std::size_t per_batch = outer / lead_batch;
  std::vector<std::size_t> offsets(total_rows);
  for (std::size_t r = 0; r < total_rows; ++r) {
    std::size_t o = r / rows;
    std::size_t i = r % rows;
    std::size_t b = mask.batch == 1 ? 0 : o / per_batch;
    offsets[r] = (b * rows + i) * cols;
  }
  return offsets;
}

Tensor softmax_impl(const Tensor& logits, const AttentionMask* mask) {
  std::size_t cols = logits.shape().back();
  std::size_t total_rows = logits.numel() / cols;
  std::vector<std::size_t> offsets;
  if (mask) offsets = mask_row_offsets(logits, *mask);
  auto x = logits.data();
  std::vector<double> out(x.size(), 0.0);
  for (std::size_t r = 0; r < total_rows; ++r) {
    const double* xr = x.data() + r * cols;
    double* pr = out.data() + r * cols;
    const std::uint8_t* vr = mask ? mask->valid.data() + offsets[r] : nullptr;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < cols; ++j)
      if (!vr || vr[j]) mx = std::max(mx, xr[j]);
    if (mx == -std::numeric_limits<double>::infinity())
      throw ContractError("softmax_masked: row " + std::to_string(r) + " has no valid entry");
    double total = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      if (vr && !vr[j]) continue;
      pr[j] = std::exp(xr[j] - mx);
      total += pr[j];
    }
    double inv = 1.0 / total;
    for (std::size_t j = 0; j < cols; ++j) pr[j] *= inv;
  }
  return make_result(logits.shape(), std::move(out), {logits},
                     [cols, total_rows](detail::Node& self) {
                       const double* p = self.value.data();
                       const double* g = self.grad.data();
                       double* gx = grad_ptr(self, 0);
                       for (std::size_t r = 0; r < total_rows; ++r) {
                         const double* pr = p + r * cols;
                         const double* gr = g + r * cols;
                         double dot = 0.0;
                         for (std::size_t j = 0; j < cols; ++j) dot += pr[j] * gr[j];
                         for (std::size_t j = 0; j < cols; ++j)
                           gx[r * cols + j] += pr[j] * (gr[j] - dot);
                       }
                     });
}

}  // namespace

Tensor softmax_masked(const Tensor& logits) { return softmax_impl(logits, nullptr); }

Tensor softmax_masked(const Tensor& logits, const AttentionMask& valid) {
  return softmax_impl(logits, &valid);
}

Tensor zero_invalid(const Tensor& logits, const AttentionMask& valid) {
  std::size_t cols = logits.shape().back();
  std::size_t total_rows = logits.numel() / cols;
  auto offsets = mask_row_offsets(logits, valid);
  std::vector<double> keep(logits.numel());
  for (std::size_t r = 0; r < total_rows; ++r)
    for (std::size_t j = 0; j < cols; ++j) keep[r * cols + j] = valid.valid[offsets[r] + j];
  auto x = logits.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = keep[i] != 0.0 ? x[i] : 0.0;
  return make_result(logits.shape(), std::move(out), {logits},
                     [keep = std::move(keep)](detail::Node& self) {
                       const auto& g = self.grad;
                       double* gx = grad_ptr(self, 0);
                       for (std::size_t i = 0; i < g.size(); ++i)
                         if (keep[i] != 0.0) gx[i] += g[i];
                     });
}

// ---------------------------------------------------------------------------
// Linear, layer norm, dropout

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (w.rank() != 2) throw ShapeError("linear: weight must be 2-D, got " + shape_str(w.shape()));
  std::size_t d_in = w.dim(0);
  std::size_t d_out = w.dim(1);
  if (x.shape().back() != d_in)
    throw ShapeError("linear: input " + shape_str(x.shape()) + " does not match weight " +
                     shape_str(w.shape()));
  bool has_bias = b.defined();
  if (has_bias && (b.rank() != 1 || b.dim(0) != d_out))
    throw ShapeError("linear: bias " + shape_str(b.shape()) + " does not match weight " +
                     shape_str(w.shape()));
  std::size_t rows = x.numel() / d_in;
  Shape out_shape = x.shape();
  out_shape.back() = d_out;
  std::vector<double> out(rows * d_out, 0.0);
  if (has_bias) {
    auto bv = b.data();
    for (std::size_t r = 0; r < rows; ++r) std::copy(bv.begin(), bv.end(), out.begin() + r * d_out);
  }
  gemm::acc(x.data().data(), w.data().data(), out.data(), rows, d_in, d_out);
  std::vector<Tensor> inputs{x, w};
  if (has_bias) inputs.push_back(b);
  return make_result(std::move(out_shape), std::move(out), inputs,
                     [rows, d_in, d_out, has_bias](detail::Node& self) {
                       const double* g = self.grad.data();
                       const double* xv = self.parents[0]->value.data();
                       const double* wv = self.parents[1]->value.data();
                       if (double* gx = grad_ptr(self, 0)) gemm::acc_bt(g, wv, gx, rows, d_in, d_out);
                       if (double* gw = grad_ptr(self, 1)) gemm::acc_at(xv, g, gw, rows, d_in, d_out);
                       if (has_bias) {
                         if (double* gb = grad_ptr(self, 2))
                           for (std::size_t r = 0; r < rows; ++r)
                             for (std::size_t j = 0; j < d_out; ++j) gb[j] += g[r * d_out + j];
                       }
                     });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  std::size_t d = x.shape().back();
  if (d < 2) throw ShapeError("layer_norm needs a last dimension of at least 2");
  if (gamma.numel() != d || beta.numel() != d)
    throw ShapeError("layer_norm: gamma/beta must have " + std::to_string(d) + " entries");
  if (!(eps > 0.0)) throw ContractError("layer_norm: eps must be positive");
  std::size_t rows = x.numel() / d;
  auto xv = x.data();
  auto gv = gamma.data();
  auto bv = beta.data();
  std::vector<double> out(xv.size());
  std::vector<double> xhat(xv.size());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xv.data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += xr[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<double>(d);
    double inv = 1.0 / std::sqrt(var + eps);
    inv_std[r] = inv;
    for (std::size_t j = 0; j < d; ++j) {
      double h = (xr[j] - mu) * inv;
      xhat[r * d + j] = h;
      out[r * d + j] = gv[j] * h + bv[j];
    }
  }
  return make_result(x.shape(), std::move(out), {x, gamma, beta},
                     [rows, d, xhat = std::move(xhat),
                      inv_std = std::move(inv_std)](detail::Node& self) {
                       const double* g = self.grad.data();
                       const double* gam = self.parents[1]->value.data();
                       double* gx = grad_ptr(self, 0);
                       double* ggam = grad_ptr(self, 1);
                       double* gbeta = grad_ptr(self, 2);
                       double dd = static_cast<double>(d);
                       for (std::size_t r = 0; r < rows; ++r) {
                         const double* gr = g + r * d;
                         const double* hr = xhat.data() + r * d;
                         if (ggam)
                           for (std::size_t j = 0; j < d; ++j) ggam[j] += gr[j] * hr[j];
                         if (gbeta)
                           for (std::size_t j = 0; j < d; ++j) gbeta[j] += gr[j];
                         if (!gx) continue;
                         double s1 = 0.0;
                         double s2 = 0.0;
                         for (std::size_t j = 0; j < d; ++j) {
                           double dh = gr[j] * gam[j];
                           s1 += dh;
                           s2 += dh * hr[j];
                         }
                         double k = inv_std[r] / dd;
                         for (std::size_t j = 0; j < d; ++j) {
                           double dh = gr[j] * gam[j];
                           gx[r * d + j] += k * (dd * dh - s1 - hr[j] * s2);
                         }
                       }
                     });
}

Tensor dropout(const Tensor& x, double rate, Rng& rng, bool training) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ContractError("dropout rate must lie in [0, 1)");
  if (!training || rate == 0.0) return x;
  double s = 1.0 / (1.0 - rate);
  std::vector<double> factor(x.numel());
  for (double& f : factor) f = uniform01(rng) < rate ? 0.0 : s;
  auto xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * factor[i];
  return make_result(x.shape(), std::move(out), {x},
                     [factor = std::move(factor)](detail::Node& self) {
                       const auto& g = self.grad;
                       double* gx = grad_ptr(self, 0);
                       for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * factor[i];
                     });
}

// ---------------------------------------------------------------------------
// Attention-map convolution

std::string to_string(ConvMaskKind kind) {
  switch (kind) {
    case ConvMaskKind::Encoder:
      return "encoder";
    case ConvMaskKind::DecoderSelf:
      return "decoder-self";
    case ConvMaskKind::EncoderDecoder:
      return "encoder-decoder";
  }
  return "?";
}

ConvMaskKind conv_mask_kind_from_string(const std::string& name) {
  if (name == "encoder") return ConvMaskKind::Encoder;
  if (name == "decoder-self") return ConvMaskKind::DecoderSelf;
  if (name == "encoder-decoder") return ConvMaskKind::EncoderDecoder;
  throw ConfigError("unknown convolution mask kind '" + name +
                    "' (expected encoder, decoder-self or encoder-decoder)");
}

TapSet kept_taps(ConvMaskKind kind) {
  TapSet taps{};
  for (int dr = -1; dr <= 1; ++dr)
    for (int dc = -1; dc <= 1; ++dc) {
      // Decoder self-attention drops the upper-right corner (row offset < col offset).
      bool on = kind != ConvMaskKind::DecoderSelf || dr >= dc;
      taps[static_cast<std::size_t>((dr + 1) * 3 + (dc + 1))] = on;
    }
  return taps;
}

MapShift output_shift(ConvMaskKind kind) {
  switch (kind) {
    case ConvMaskKind::Encoder:
      return {0, 0};
    case ConvMaskKind::DecoderSelf:
      return {1, 1};
    case ConvMaskKind::EncoderDecoder:
      return {0, 1};
  }
  return {0, 0};
}

Conv2dMapParams Conv2dMapParams::init(std::size_t heads, ConvMaskKind kind, Rng& rng) {
  Conv2dMapParams p;
  p.kind = kind;
  TapSet taps = kept_taps(kind);
  std::size_t active = static_cast<std::size_t>(std::count(taps.begin(), taps.end(), true));
  p.kernel = xavier_tensor({heads, heads, 3, 3}, heads * active, heads * active, rng);
  auto w = p.kernel.mutable_data();
  for (std::size_t i = 0; i < w.size(); ++i)
    if (!taps[i % 9]) w[i] = 0.0;
  p.bias = Tensor::zeros({heads}, true);
  return p;
}

std::size_t Conv2dMapParams::active_taps() const {
  TapSet taps = kept_taps(kind);
  return static_cast<std::size_t>(std::count(taps.begin(), taps.end(), true));
}

Tensor conv2d_taps(const Tensor& maps, const Tensor& kernel, const Tensor& bias,
                   const TapSet& taps, MapShift shift) {
  if (maps.rank() != 4 || maps.dim(2) != maps.dim(3))
    throw ShapeError("conv2d_maps expects (B, K, N, N) maps, got " + shape_str(maps.shape()));
  std::size_t nb = maps.dim(0);
  std::size_t heads = maps.dim(1);
  std::size_t n = maps.dim(2);
  if (kernel.shape() != Shape{heads, heads, 3, 3})
    throw ConfigError("conv2d_maps kernel must be (" + std::to_string(heads) + "," +
                      std::to_string(heads) + ",3,3), got " + shape_str(kernel.shape()));
  if (bias.shape() != Shape{heads})
    throw ConfigError("conv2d_maps bias must have " + std::to_string(heads) + " entries");

  // For each active tap, the input offset relative to the output position.
  struct Tap {
    std::size_t index;
    long dy;
    long dx;
  };
  std::vector<Tap> active;
  for (int r = 0; r < 3; ++r)
    for (int s = 0; s < 3; ++s)
      if (taps[static_cast<std::size_t>(r * 3 + s)])
        active.push_back({static_cast<std::size_t>(r * 3 + s), r - 1L - shift.rows,
                          s - 1L - shift.cols});

  const long ln = static_cast<long>(n);
  auto range = [ln](long off) {
    return std::pair<std::size_t, std::size_t>(static_cast<std::size_t>(std::max(0L, -off)),
                                               static_cast<std::size_t>(std::min(ln, ln - off)));
  };

  const double* a = maps.data().data();
  const double* w = kernel.data().data();
  const double* bv = bias.data().data();
  std::size_t plane = n * n;
  std::vector<double> out(maps.numel());
  for (std::size_t b = 0; b < nb; ++b)
    for (std::size_t o = 0; o < heads; ++o) {
      double* op = out.data() + (b * heads + o) * plane;
      std::fill(op, op + plane, bv[o]);
      for (std::size_t c = 0; c < heads; ++c) {
        const double* ap = a + (b * heads + c) * plane;
        for (const Tap& t : active) {
          double wt = w[(o * heads + c) * 9 + t.index];
          auto [i0, i1] = range(t.dy);
          auto [j0, j1] = range(t.dx);
          for (std::size_t i = i0; i < i1; ++i) {
            const double* arow = ap + (i + t.dy) * n + t.dx;
            double* orow = op + i * n;
            for (std::size_t j = j0; j < j1; ++j) orow[j] += wt * arow[j];
          }
        }
      }
      for (std::size_t i = 0; i < plane; ++i) op[i] = op[i] > 0.0 ? op[i] : 0.0;
    }

  return make_result(
      maps.shape(), std::move(out), {maps, kernel, bias},
      [nb, heads, n, plane, active, range](detail::Node& self) {
        const double* y = self.value.data();
        const double* g = self.grad.data();
        const double* a = self.parents[0]->value.data();
        const double* w = self.parents[1]->value.data();
        double* ga = grad_ptr(self, 0);
        double* gw = grad_ptr(self, 1);
        double* gb = grad_ptr(self, 2);
        std::vector<double> gpre(plane);
        for (std::size_t b = 0; b < nb; ++b)
          for (std::size_t o = 0; o < heads; ++o) {
            std::size_t base = (b * heads + o) * plane;
            double bias_acc = 0.0;
            for (std::size_t i = 0; i < plane; ++i) {
              gpre[i] = y[base + i] > 0.0 ? g[base + i] : 0.0;
              bias_acc += gpre[i];
            }
            if (gb) gb[o] += bias_acc;
            for (std::size_t c = 0; c < heads; ++c) {
              std::size_t abase = (b * heads + c) * plane;
              for (const auto& t : active) {
                std::size_t widx = (o * heads + c) * 9 + t.index;
                double wt = w[widx];
                auto [i0, i1] = range(t.dy);
                auto [j0, j1] = range(t.dx);
                double wacc = 0.0;
                for (std::size_t i = i0; i < i1; ++i) {
                  std::size_t arow = abase + (i + t.dy) * n + t.dx;
                  const double* grow = gpre.data() + i * n;
                  if (gw) wacc += gemm::dot(grow + j0, a + arow + j0, j1 - j0);
                  if (ga)
                    for (std::size_t j = j0; j < j1; ++j) ga[arow + j] += wt * grow[j];
                }
                if (gw) gw[widx] += wacc;
              }
            }
          }
      });
}

Tensor conv2d_maps(const Tensor& maps, const Conv2dMapParams& params) {
  return conv2d_taps(maps, params.kernel, params.bias, kept_taps(params.kind),
                     output_shift(params.kind));
}

// ---------------------------------------------------------------------------
// Dilated 1-D convolution

DilatedConvParams DilatedConvParams::init(std::size_t d_in, std::size_t d_out,
                                          std::size_t layers, Rng& rng) {
  DilatedConvParams p;
  for (std::size_t l = 0; l < layers; ++l) {
    std::size_t in = l == 0 ? d_in : d_out;
    p.kernels.push_back(xavier_tensor({d_out, in, 3}, in * 3, d_out * 3, rng));
    p.biases.push_back(Tensor::zeros({d_out}, true));
  }
  return p;
}

std::size_t DilatedConvParams::dilation(std::size_t layer) {
  if (layer == 0) throw ContractError("dilated layers are numbered from 1");
  return std::size_t{1} << (layer - 1);
}

std::size_t DilatedConvParams::receptive_field(std::size_t layers) {
  return 1 + 2 * ((std::size_t{1} << layers) - 1);
}

Tensor conv1d_dilated(const Tensor& x, const Tensor& kernel, const Tensor& bias,
                      std::size_t dilation) {
  if (x.rank() != 3) throw ShapeError("conv1d_dilated expects (B, T, d), got " + shape_str(x.shape()));
  std::size_t nb = x.dim(0);
  std::size_t len = x.dim(1);
  std::size_t d_in = x.dim(2);
  if (kernel.rank() != 3 || kernel.dim(1) != d_in || kernel.dim(2) != 3)
    throw ConfigError("conv1d_dilated kernel must be (d_out, " + std::to_string(d_in) +
                      ", 3), got " + shape_str(kernel.shape()));
  std::size_t d_out = kernel.dim(0);
  if (bias.shape() != Shape{d_out}) throw ShapeError("conv1d_dilated bias size mismatch");
  if (dilation == 0) throw ContractError("dilation must be positive");

  // Tap k reads x[t + (k - 1) * dilation]; for each series the valid output
  // steps of a tap form one contiguous range, so every tap is a single GEMM.
  const double* kv = kernel.data().data();
  std::vector<double> wt(3 * d_in * d_out);   // tap k: (d_in, d_out)
  std::vector<double> wtt(3 * d_out * d_in);  // tap k: (d_out, d_in)
  for (std::size_t o = 0; o < d_out; ++o)
    for (std::size_t c = 0; c < d_in; ++c)
      for (std::size_t k = 0; k < 3; ++k) {
        double w = kv[(o * d_in + c) * 3 + k];
        wt[(k * d_in + c) * d_out + o] = w;
        wtt[(k * d_out + o) * d_in + c] = w;
      }
  struct TapRange {
    std::size_t out_begin = 0, src_begin = 0, rows = 0;
  };
  std::array<TapRange, 3> ranges{};
  for (std::size_t k = 0; k < 3; ++k) {
    std::size_t shift = dilation;
    if (k == 1) ranges[k] = {0, 0, len};
    else if (shift < len) ranges[k] = k == 0 ? TapRange{shift, 0, len - shift} : TapRange{0, shift, len - shift};
  }
  const double* xv = x.data().data();
  const double* bv = bias.data().data();
  std::vector<double> out(nb * len * d_out);
  for (std::size_t r = 0; r < nb * len; ++r) std::copy(bv, bv + d_out, out.data() + r * d_out);
  for (std::size_t b = 0; b < nb; ++b)
    for (std::size_t k = 0; k < 3; ++k) {
      const TapRange& tr = ranges[k];
      if (tr.rows == 0) continue;
      gemm::acc(xv + (b * len + tr.src_begin) * d_in, wt.data() + k * d_in * d_out,
                out.data() + (b * len + tr.out_begin) * d_out, tr.rows, d_in, d_out);
    }

  return make_result(
      {nb, len, d_out}, std::move(out), {x, kernel, bias},
      [nb, len, d_in, d_out, ranges, wtt = std::move(wtt)](detail::Node& self) {
        const double* g = self.grad.data();
        const double* xv = self.parents[0]->value.data();
        double* gx = grad_ptr(self, 0);
        double* gw = grad_ptr(self, 1);
        double* gb = grad_ptr(self, 2);
        if (gb)
          for (std::size_t r = 0; r < nb * len; ++r)
            for (std::size_t o = 0; o < d_out; ++o) gb[o] += g[r * d_out + o];
        std::vector<double> gwt(gw ? 3 * d_in * d_out : 0, 0.0);
        for (std::size_t b = 0; b < nb; ++b)
          for (std::size_t k = 0; k < 3; ++k) {
            const TapRange& tr = ranges[k];
            if (tr.rows == 0) continue;
            const double* grows = g + (b * len + tr.out_begin) * d_out;
            std::size_t xoff = (b * len + tr.src_begin) * d_in;
            if (gx) gemm::acc(grows, wtt.data() + k * d_out * d_in, gx + xoff, tr.rows, d_out, d_in);
            if (gw) gemm::acc_at(xv + xoff, grows, gwt.data() + k * d_in * d_out, tr.rows, d_in, d_out);
          }
        if (gw)
          for (std::size_t o = 0; o < d_out; ++o)
            for (std::size_t c = 0; c < d_in; ++c)
              for (std::size_t k = 0; k < 3; ++k)
                gw[(o * d_in + c) * 3 + k] += gwt[(k * d_in + c) * d_out + o];
      });
}

Tensor dilated_conv1d_stack(const Tensor& x, const DilatedConvParams& params) {
  if (params.layers() == 0) throw ConfigError("dilated convolution stack needs at least one layer");
  Tensor h = x;
  for (std::size_t l = 0; l < params.layers(); ++l) {
    h = conv1d_dilated(h, params.kernels[l], params.biases[l], DilatedConvParams::dilation(l + 1));
    if (l + 1 < params.layers()) h = relu(h);
  }
  return h;
}

// ---------------------------------------------------------------------------
// Positional encodings

std::string to_string(PosEncodingKind kind) {
  switch (kind) {
    case PosEncodingKind::LearnedAbsolute:
      return "learned";
    case PosEncodingKind::Sinusoidal:
      return "sinusoidal";
    case PosEncodingKind::Relative1D:
      return "relative";
  }
  return "?";
}

PosEncodingKind pos_encoding_kind_from_string(const std::string& name) {
  if (name == "learned") return PosEncodingKind::LearnedAbsolute;
  if (name == "sinusoidal") return PosEncodingKind::Sinusoidal;
  if (name == "relative") return PosEncodingKind::Relative1D;
  throw ConfigError("unknown positional encoding '" + name +
                    "' (expected learned, sinusoidal or relative)");
}

PositionalEncoding PositionalEncoding::learned(std::size_t max_len, std::size_t d, Rng& rng) {
  PositionalEncoding pe;
  pe.kind = PosEncodingKind::LearnedAbsolute;
  pe.table = uniform_tensor({max_len, d}, -0.02, 0.02, rng, true);
  return pe;
}

PositionalEncoding PositionalEncoding::sinusoidal(std::size_t max_len, std::size_t d) {
  PositionalEncoding pe;
  pe.kind = PosEncodingKind::Sinusoidal;
  std::vector<double> v(max_len * d);
  for (std::size_t t = 0; t < max_len; ++t)
    for (std::size_t i = 0; i < d; ++i) {
      double freq = std::pow(10000.0, -static_cast<double>(i - i % 2) / static_cast<double>(d));
      double angle = static_cast<double>(t) * freq;
      v[t * d + i] = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
  pe.table = Tensor({max_len, d}, std::move(v));
  return pe;
}

PositionalEncoding PositionalEncoding::relative(std::size_t max_rel_dist, std::size_t head_dim,
                                                Rng& rng) {
  PositionalEncoding pe;
  pe.kind = PosEncodingKind::Relative1D;
  pe.max_rel_dist = max_rel_dist;
  pe.table = uniform_tensor({2 * max_rel_dist + 1, head_dim}, -0.02, 0.02, rng, true);
  return pe;
}

Tensor add_positional(const Tensor& h, const PositionalEncoding& pe) {
  if (pe.kind == PosEncodingKind::Relative1D)
    throw ConfigError("relative encodings are applied to attention logits, not to the input");
  if (h.rank() != 3) throw ShapeError("add_positional expects (B, T, d)");
  std::size_t nb = h.dim(0);
  std::size_t len = h.dim(1);
  std::size_t d = h.dim(2);
  if (pe.table.dim(1) != d || pe.table.dim(0) < len)
    throw ShapeError("positional table " + shape_str(pe.table.shape()) + " cannot cover " +
                     shape_str(h.shape()));
  auto hv = h.data();
  auto tv = pe.table.data();
  std::vector<double> out(hv.size());
  for (std::size_t b = 0; b < nb; ++b)
    for (std::size_t i = 0; i < len * d; ++i) out[b * len * d + i] = hv[b * len * d + i] + tv[i];
  return make_result(h.shape(), std::move(out), {h, pe.table},
                     [nb, len, d](detail::Node& self) {
                       const double* g = self.grad.data();
                       double* gh = grad_ptr(self, 0);
                       double* gt = grad_ptr(self, 1);
                       for (std::size_t b = 0; b < nb; ++b)
                         for (std::size_t i = 0; i < len * d; ++i) {
                           if (gh) gh[b * len * d + i] += g[b * len * d + i];
                           if (gt) gt[i] += g[b * len * d + i];
                         }
                     });
}

Tensor relative_logits_1d(const Tensor& q, const PositionalEncoding& pe) {
  if (pe.kind != PosEncodingKind::Relative1D)
    throw ConfigError("relative_logits_1d needs a relative positional encoding");
  if (q.rank() != 4) throw ShapeError("relative_logits_1d expects q of shape (B, K, N, d_h)");
  std::size_t outer = q.dim(0) * q.dim(1);
  std::size_t n = q.dim(2);
  std::size_t dh = q.dim(3);
  std::size_t span = 2 * pe.max_rel_dist + 1;
  if (pe.table.shape() != Shape{span, dh})
    throw ShapeError("relative table " + shape_str(pe.table.shape()) + " does not match head width " +
                     std::to_string(dh));
  const long r = static_cast<long>(pe.max_rel_dist);
  std::vector<std::size_t> row_of(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      long off = std::clamp(static_cast<long>(i) - static_cast<long>(j), -r, r);
      row_of[i * n + j] = static_cast<std::size_t>(off + r);
    }
  const double* qv = q.data().data();
  const double* ev = pe.table.data().data();
  std::vector<double> out(outer * n * n);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t i = 0; i < n; ++i) {
      const double* qi = qv + (o * n + i) * dh;
      for (std::size_t j = 0; j < n; ++j) {
        const double* e = ev + row_of[i * n + j] * dh;
        double s = 0.0;
        for (std::size_t c = 0; c < dh; ++c) s += qi[c] * e[c];
        out[(o * n + i) * n + j] = s;
      }
    }
  Shape out_shape{q.dim(0), q.dim(1), n, n};
  return make_result(std::move(out_shape), std::move(out), {q, pe.table},
                     [outer, n, dh, row_of = std::move(row_of)](detail::Node& self) {
                       const double* g = self.grad.data();
                       const double* qv = self.parents[0]->value.data();
                       const double* ev = self.parents[1]->value.data();
                       double* gq = grad_ptr(self, 0);
                       double* ge = grad_ptr(self, 1);
                       for (std::size_t o = 0; o < outer; ++o)
                         for (std::size_t i = 0; i < n; ++i)
                           for (std::size_t j = 0; j < n; ++j) {
                             double gij = g[(o * n + i) * n + j];
                             std::size_t er = row_of[i * n + j] * dh;
                             std::size_t qr = (o * n + i) * dh;
                             for (std::size_t c = 0; c < dh; ++c) {
                               if (gq) gq[qr + c] += gij * ev[er + c];
                               if (ge) ge[er + c] += gij * qv[qr + c];
                             }
                           }
                     });
}

Tensor time_mean_pool(const Tensor& z, std::span<const std::size_t> lengths) {
  if (z.rank() != 3) throw ShapeError("time_mean_pool expects (B, T, d)");
  std::size_t nb = z.dim(0);
  std::size_t len = z.dim(1);
  std::size_t d = z.dim(2);
  if (!lengths.empty() && lengths.size() != nb)
    throw ShapeError("time_mean_pool: one length per batch element required");
  std::vector<double> weight(nb * len, 0.0);
  for (std::size_t b = 0; b < nb; ++b) {
    std::size_t valid = lengths.empty() ? len : lengths[b];
    if (valid == 0 || valid > len) throw ContractError("time_mean_pool: length out of range");
    for (std::size_t t = 0; t < valid; ++t) weight[b * len + t] = 1.0 / static_cast<double>(valid);
  }
  auto zv = z.data();
  std::vector<double> out(nb * d, 0.0);
  for (std::size_t b = 0; b < nb; ++b)
    for (std::size_t t = 0; t < len; ++t) {
      double w = weight[b * len + t];
      if (w == 0.0) continue;
      for (std::size_t c = 0; c < d; ++c) out[b * d + c] += w * zv[(b * len + t) * d + c];
    }
  return make_result({nb, d}, std::move(out), {z},
                     [nb, len, d, weight = std::move(weight)](detail::Node& self) {
                       const double* g = self.grad.data();
                       double* gz = grad_ptr(self, 0);
                       for (std::size_t b = 0; b < nb; ++b)
                         for (std::size_t t = 0; t < len; ++t) {
                           double w = weight[b * len + t];
                           if (w == 0.0) continue;
                           for (std::size_t c = 0; c < d; ++c) gz[(b * len + t) * d + c] += w * g[b * d + c];
                         }
                     });
}

}  // namespace eanet
