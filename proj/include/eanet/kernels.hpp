// Copyright 2026 The EANet Authors
// SPDX-License-Identifier: Apache-2.0

// Neural building blocks: masked softmax, linear, layer norm, dropout, the
// 3x3 convolution over attention maps, the dilated 1-D convolution stack and
// positional encodings.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "eanet/random.hpp"
#include "eanet/tensor.hpp"

namespace eanet {

/// Which attention positions a query row may see. Shape (batch, rows, cols);
/// batch 1 broadcasts. Applied to logits of shape (..., rows, cols) whose
/// leading axis is the batch; any axes in between (heads) broadcast.
struct AttentionMask {
  std::size_t batch = 1;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> valid;

  static AttentionMask all(std::size_t batch, std::size_t rows, std::size_t cols);
  /// valid(i, j) = j <= i.
  static AttentionMask causal(std::size_t n);
  /// valid(b, i, j) = j < lengths[b].
  static AttentionMask key_padding(std::span<const std::size_t> lengths, std::size_t n);

  bool at(std::size_t b, std::size_t i, std::size_t j) const {
    return valid[(b * rows + i) * cols + j] != 0;
  }
  /// Elementwise AND; batch-1 operands broadcast.
  AttentionMask operator&(const AttentionMask& other) const;
};

/// Row softmax over the last axis with max subtraction.
Tensor softmax_masked(const Tensor& logits);
/// Masked entries are exactly 0; a row with no valid entry is a ContractError.
Tensor softmax_masked(const Tensor& logits, const AttentionMask& valid);
/// Replaces masked logits with 0 (finite) and blocks their gradient.
Tensor zero_invalid(const Tensor& logits, const AttentionMask& valid);

/// x (..., d_in) * W (d_in, d_out) + b (d_out). `b` may be undefined.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

/// Inverted dropout. Identity when `training` is false or `rate` is 0.
Tensor dropout(const Tensor& x, double rate, Rng& rng, bool training);

// ---------------------------------------------------------------------------
// Attention-map convolution

enum class ConvMaskKind { Encoder, DecoderSelf, EncoderDecoder };

std::string to_string(ConvMaskKind kind);
ConvMaskKind conv_mask_kind_from_string(const std::string& name);

/// 3x3 tap switches indexed [(row_offset + 1) * 3 + (col_offset + 1)].
using TapSet = std::array<bool, 9>;

/// Output (i, j) is the convolution evaluated at (i - rows, j - cols).
struct MapShift {
  int rows = 0;
  int cols = 0;
};

TapSet kept_taps(ConvMaskKind kind);
MapShift output_shift(ConvMaskKind kind);

struct Conv2dMapParams {
  Tensor kernel;  // (heads_out, heads_in, 3, 3)
  Tensor bias;    // (heads_out)
  ConvMaskKind kind = ConvMaskKind::Encoder;

  /// Glorot init; masked taps start (and stay) at zero.
  static Conv2dMapParams init(std::size_t heads, ConvMaskKind kind, Rng& rng);
  std::size_t active_taps() const;
};

/// ReLU(conv(maps)) with zero padding, the tap set and shift of `params.kind`.
/// maps: (B, K, N, N). Throws ConfigError unless the kernel is (K, K, 3, 3).
Tensor conv2d_maps(const Tensor& maps, const Conv2dMapParams& params);

/// General form behind conv2d_maps: only taps switched on in `taps` are read
/// or receive gradient.
Tensor conv2d_taps(const Tensor& maps, const Tensor& kernel, const Tensor& bias,
                   const TapSet& taps, MapShift shift);

// ---------------------------------------------------------------------------
// Dilated 1-D convolution

struct DilatedConvParams {
  std::vector<Tensor> kernels;  // layer l: (d_out, d_in_l, 3)
  std::vector<Tensor> biases;   // layer l: (d_out)

  static DilatedConvParams init(std::size_t d_in, std::size_t d_out, std::size_t layers,
                                Rng& rng);
  std::size_t layers() const { return kernels.size(); }
  /// Dilation of 1-based layer l: 2^(l-1).
  static std::size_t dilation(std::size_t layer);
  /// 1 + 2 * (2^m - 1) for kernel width 3.
  static std::size_t receptive_field(std::size_t layers);
};

/// Width-3 convolution along time with symmetric zero padding; x (B, T, d_in).
Tensor conv1d_dilated(const Tensor& x, const Tensor& kernel, const Tensor& bias,
                      std::size_t dilation);

/// Layers with dilations 1, 2, 4, ...; ReLU between layers, none after the last.
Tensor dilated_conv1d_stack(const Tensor& x, const DilatedConvParams& params);

// ---------------------------------------------------------------------------
// Positional encodings

enum class PosEncodingKind { LearnedAbsolute, Sinusoidal, Relative1D };

std::string to_string(PosEncodingKind kind);
PosEncodingKind pos_encoding_kind_from_string(const std::string& name);

struct PositionalEncoding {
  PosEncodingKind kind = PosEncodingKind::LearnedAbsolute;
  // Absolute kinds: (max_len, d). Relative1D: (2 * max_rel_dist + 1, head_dim),
  // row max_rel_dist + k holds e_k.
  Tensor table;
  std::size_t max_rel_dist = 0;

  static PositionalEncoding learned(std::size_t max_len, std::size_t d, Rng& rng);
  static PositionalEncoding sinusoidal(std::size_t max_len, std::size_t d);
  static PositionalEncoding relative(std::size_t max_rel_dist, std::size_t head_dim, Rng& rng);
};

/// h (B, T, d) + table[0:T]. Absolute kinds only.
Tensor add_positional(const Tensor& h, const PositionalEncoding& pe);

/// R[b, k, i, j] = q[b, k, i] . e_{clip(i - j)}; q (B, K, N, head_dim).
Tensor relative_logits_1d(const Tensor& q, const PositionalEncoding& pe);

/// Mean over the valid prefix of each series: z (B, T, d) -> (B, d).
/// Empty `lengths` means every step is valid.
Tensor time_mean_pool(const Tensor& z, std::span<const std::size_t> lengths);

}  // namespace eanet
