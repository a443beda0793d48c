// Copyright 2026 The EANet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eanet/evolving_attention.hpp"
#include "eanet/kernels.hpp"
#include "eanet/random.hpp"
#include "eanet/tensor.hpp"

namespace eanet {

enum class Architecture {
  EaDcTransformer,  // evolving attention branch + dilated convolution branch
  DcTransformer,    // vanilla attention branch + dilated convolution branch
  EaTransformer,    // evolving attention only (p = 1)
  Transformer,      // vanilla attention only
};

enum class TaskKind { Pretrain, Regression, Classification };

std::string to_string(Architecture arch);
Architecture architecture_from_string(const std::string& name);
std::string to_string(TaskKind task);
TaskKind task_kind_from_string(const std::string& name);

struct ModelConfig {
  Architecture arch = Architecture::EaDcTransformer;
  std::size_t n_blocks = 3;
  std::size_t d = 64;
  std::size_t heads = 4;
  double alpha = 0.5;
  double beta = 0.3;
  double p = 0.25;  // share of d given to the attention branch
  std::size_t dilated_layers = 2;
  std::size_t ffn_mult = 4;
  double dropout = 0.1;
  ConvMaskKind mask_kind = ConvMaskKind::Encoder;
  PosEncodingKind pos_encoding = PosEncodingKind::LearnedAbsolute;
  std::size_t max_rel_dist = 16;
  TaskKind task = TaskKind::Pretrain;
  std::size_t n_classes = 2;
  std::size_t classifier_hidden = 0;  // extra ReLU layers of width d before the classifier
  std::size_t in_channels = 1;
  std::size_t max_len = 64;
  double layer_norm_eps = 1e-5;

  bool evolving() const;
  /// p as used by the blocks: 1 for the attention-only architectures.
  double effective_p() const;
  std::size_t attention_width() const;
  std::size_t dilated_width() const;
  std::size_t ffn_width() const { return ffn_mult * d; }

  /// Throws ConfigError on structural violations (non-integer p*d, head split, ranges).
  void validate() const;
  /// Non-fatal departures from the published search grids.
  std::vector<std::string> grid_warnings() const;
};

using KeyValues = std::map<std::string, std::string>;

/// Flat `model.*` / `task` keys.
KeyValues to_key_values(const ModelConfig& config);
/// Starts from `base` and overrides with any keys present.
ModelConfig model_config_from_key_values(const KeyValues& kv, ModelConfig base = {});

struct BlockParams {
  std::optional<AttentionHeadParams> attention;
  std::optional<EvolveParams> evolution;
  std::optional<DilatedConvParams> dilated;
  Tensor w1, b1, w2, b2;
  Tensor norm1_gamma, norm1_beta, norm2_gamma, norm2_beta;
  double layer_norm_eps = 1e-5;

  static BlockParams init(const ModelConfig& config, Rng& rng);
  std::size_t attention_parameter_count() const;
};

/// Per-forward settings shared by all blocks.
struct BlockContext {
  const AttentionMask* valid = nullptr;
  double dropout = 0.0;
  Rng* rng = nullptr;
  bool training = false;
};

struct BlockOutput {
  Tensor y;
  std::optional<AttentionLogits> logits;  // absent when the block has no attention
};

/// Attention-only block: logits = evolve(prev, raw_logits(x)), H = attention,
/// Y1 = LN(x + drop(H)), Y = LN(Y1 + drop(FFN(Y1))).
BlockOutput ea_transformer_block(const Tensor& x, const std::optional<AttentionLogits>& prev,
                                 const BlockParams& params, const BlockContext& ctx);

/// Attention branch (width p*d) concatenated with the dilated branch
/// (width (1-p)*d) computed from the block input, then FFN and norms.
BlockOutput ea_dc_block(const Tensor& x, const std::optional<AttentionLogits>& prev,
                        const BlockParams& params, const BlockContext& ctx);

/// FFN(z) = ReLU(z W1 + b1) W2 + b2 with dropout on the hidden activations.
Tensor feed_forward(const Tensor& z, const BlockParams& params, const BlockContext& ctx);

struct ForwardContext {
  bool training = false;
  Rng* rng = nullptr;
};

struct EncodeResult {
  Tensor z;
  std::vector<AttentionLogits> logits;  // one per block that has attention
  std::optional<AttentionMask> valid;   // mask used by every block, if any
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct Model {
  ModelConfig config;
  Tensor embed_w;  // (C, d)
  Tensor embed_b;  // (d)
  std::optional<PositionalEncoding> positional;
  std::vector<BlockParams> blocks;
  std::vector<Tensor> head_hidden_w;
  std::vector<Tensor> head_hidden_b;
  Tensor head_w;
  Tensor head_b;

  static Model create(const ModelConfig& config, std::uint64_t seed);

  /// Attention mask implied by the mask kind and series lengths (nullopt when
  /// every position is visible).
  std::optional<AttentionMask> attention_mask(std::size_t batch, std::size_t len,
                                              std::span<const std::size_t> lengths) const;

  /// x: (B, T, C). Embedding, positional encoding, then the block chain.
  EncodeResult encode(const Tensor& x, std::span<const std::size_t> lengths,
                      const ForwardContext& ctx = {}) const;

  /// (B, T, d) -> (B, T, C)
  Tensor reconstruct_head(const Tensor& z) const;
  /// (B, T, d) -> (B)
  Tensor regression_head(const Tensor& z, std::span<const std::size_t> lengths) const;
  /// (B, T, d) -> (B, n_classes) probabilities.
  Tensor classification_head(const Tensor& z, std::span<const std::size_t> lengths) const;

  /// Every trainable tensor in a fixed order with stable names.
  std::vector<NamedTensor> parameters() const;
  std::size_t parameter_count() const;
};

/// Copies values of same-named parameters from `src` into `dst`. Names that
/// exist in only one model are skipped; a shape disagreement throws
/// ConfigError listing every differing tensor. Returns the number copied.
std::size_t copy_matching_parameters(const Model& src, Model& dst,
                                     const std::string& skip_prefix = "");

/// Self-describing checkpoint: text header (version, config, tensor table)
/// followed by little-endian float64 payload.
void save_checkpoint(const std::string& path, const Model& model);
Model load_checkpoint(const std::string& path);

}  // namespace eanet
