// Copyright 2026 The EANet Authors
// SPDX-License-Identifier: Apache-2.0

#include "eanet/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "eanet/error.hpp"
#include "eanet/ops.hpp"
#include "src/text_util.hpp"

namespace eanet {

// ---------------------------------------------------------------------------
// Enum names

std::string to_string(Architecture arch) {
  switch (arch) {
    case Architecture::EaDcTransformer:
      return "ea-dc-transformer";
    case Architecture::DcTransformer:
      return "dc-transformer";
    case Architecture::EaTransformer:
      return "ea-transformer";
    case Architecture::Transformer:
      return "transformer";
  }
  return "?";
}

Architecture architecture_from_string(const std::string& name) {
  for (auto a : {Architecture::EaDcTransformer, Architecture::DcTransformer,
                 Architecture::EaTransformer, Architecture::Transformer})
    if (to_string(a) == name) return a;
  throw ConfigError("unknown architecture '" + name +
                    "' (expected ea-dc-transformer, dc-transformer, ea-transformer or transformer)");
}

std::string to_string(TaskKind task) {
  switch (task) {
    case TaskKind::Pretrain:
      return "pretrain";
    case TaskKind::Regression:
      return "regression";
    case TaskKind::Classification:
      return "classification";
  }
  return "?";
}

TaskKind task_kind_from_string(const std::string& name) {
  for (auto t : {TaskKind::Pretrain, TaskKind::Regression, TaskKind::Classification})
    if (to_string(t) == name) return t;
  throw ConfigError("unknown task '" + name + "' (expected pretrain, regression or classification)");
}

// ---------------------------------------------------------------------------
// ModelConfig

bool ModelConfig::evolving() const {
  return arch == Architecture::EaDcTransformer || arch == Architecture::EaTransformer;
}

double ModelConfig::effective_p() const {
  return (arch == Architecture::EaTransformer || arch == Architecture::Transformer) ? 1.0 : p;
}

std::size_t ModelConfig::attention_width() const {
  return static_cast<std::size_t>(std::llround(effective_p() * static_cast<double>(d)));
}

std::size_t ModelConfig::dilated_width() const { return d - attention_width(); }

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (n_blocks == 0) fail("model.blocks must be at least 1");
  if (d < 2) fail("model.d must be at least 2");
  if (heads == 0) fail("model.heads must be at least 1");
  if (!(alpha >= 0.0 && alpha <= 1.0)) fail("model.alpha must lie in [0, 1]");
  if (!(beta >= 0.0 && beta <= 1.0)) fail("model.beta must lie in [0, 1]");
  if (!(p >= 0.0 && p <= 1.0)) fail("model.p must lie in [0, 1]");
  double pd = effective_p() * static_cast<double>(d);
  if (std::abs(pd - std::round(pd)) > 1e-9)
    fail("model.p * model.d = " + format_double(pd) + " is not an integer width");
  std::size_t aw = attention_width();
  if (aw > 0 && aw % heads != 0)
    fail("attention width " + std::to_string(aw) + " is not divisible by " +
         std::to_string(heads) + " heads");
  if (dilated_width() > 0 && dilated_layers == 0) fail("model.dilated_layers must be at least 1");
  if (ffn_mult == 0) fail("model.ffn_mult must be at least 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("model.dropout must lie in [0, 1)");
  if (task == TaskKind::Classification && n_classes < 2)
    fail("classification needs at least 2 classes");
  if (in_channels == 0) fail("input channel count must be at least 1");
  if (max_len == 0) fail("maximum series length must be at least 1");
  if (!(layer_norm_eps > 0.0)) fail("model.layer_norm_eps must be positive");
}

std::vector<std::string> ModelConfig::grid_warnings() const {
  std::vector<std::string> out;
  auto on_grid = [](double v, double step, double lo, double hi) {
    double k = (v - lo) / step;
    return v >= lo - 1e-12 && v <= hi + 1e-12 && std::abs(k - std::round(k)) < 1e-9;
  };
  if (d != 64 && d != 128) out.push_back("model.d = " + std::to_string(d) + " is outside {64, 128}");
  if (n_blocks < 2 || n_blocks > 5)
    out.push_back("model.blocks = " + std::to_string(n_blocks) + " is outside {2, 3, 4, 5}");
  if (evolving()) {
    if (!on_grid(alpha, 0.2, 0.1, 0.9))
      out.push_back("model.alpha = " + format_double(alpha) + " is outside {0.1, 0.3, ..., 0.9}");
    if (!on_grid(beta, 0.2, 0.1, 0.9))
      out.push_back("model.beta = " + format_double(beta) + " is outside {0.1, 0.3, ..., 0.9}");
  }
  if ((arch == Architecture::EaDcTransformer || arch == Architecture::DcTransformer) &&
      !on_grid(p, 0.125, 0.0, 1.0))
    out.push_back("model.p = " + format_double(p) + " is not a multiple of 0.125");
  return out;
}

KeyValues to_key_values(const ModelConfig& c) {
  KeyValues kv;
  kv["model.arch"] = to_string(c.arch);
  kv["model.blocks"] = std::to_string(c.n_blocks);
  kv["model.d"] = std::to_string(c.d);
  kv["model.heads"] = std::to_string(c.heads);
  kv["model.alpha"] = format_double(c.alpha);
  kv["model.beta"] = format_double(c.beta);
  kv["model.p"] = format_double(c.p);
  kv["model.dilated_layers"] = std::to_string(c.dilated_layers);
  kv["model.ffn_mult"] = std::to_string(c.ffn_mult);
  kv["model.dropout"] = format_double(c.dropout);
  kv["model.mask_kind"] = to_string(c.mask_kind);
  kv["model.pos_encoding"] = to_string(c.pos_encoding);
  kv["model.max_rel_dist"] = std::to_string(c.max_rel_dist);
  kv["model.classifier_hidden"] = std::to_string(c.classifier_hidden);
  kv["model.layer_norm_eps"] = format_double(c.layer_norm_eps);
  kv["model.in_channels"] = std::to_string(c.in_channels);
  kv["model.max_len"] = std::to_string(c.max_len);
  kv["task"] = to_string(c.task);
  kv["task.n_classes"] = std::to_string(c.n_classes);
  return kv;
}

ModelConfig model_config_from_key_values(const KeyValues& kv, ModelConfig c) {
  auto get = [&kv](const std::string& key) -> const std::string* {
    auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  if (auto v = get("model.arch")) c.arch = architecture_from_string(*v);
  if (auto v = get("model.blocks")) c.n_blocks = parse_size(*v, "model.blocks");
  if (auto v = get("model.d")) c.d = parse_size(*v, "model.d");
  if (auto v = get("model.heads")) c.heads = parse_size(*v, "model.heads");
  if (auto v = get("model.alpha")) c.alpha = parse_double(*v, "model.alpha");
  if (auto v = get("model.beta")) c.beta = parse_double(*v, "model.beta");
  if (auto v = get("model.p")) c.p = parse_double(*v, "model.p");
  if (auto v = get("model.dilated_layers")) c.dilated_layers = parse_size(*v, "model.dilated_layers");
  if (auto v = get("model.ffn_mult")) c.ffn_mult = parse_size(*v, "model.ffn_mult");
  if (auto v = get("model.dropout")) c.dropout = parse_double(*v, "model.dropout");
  if (auto v = get("model.mask_kind")) c.mask_kind = conv_mask_kind_from_string(*v);
  if (auto v = get("model.pos_encoding")) c.pos_encoding = pos_encoding_kind_from_string(*v);
  if (auto v = get("model.max_rel_dist")) c.max_rel_dist = parse_size(*v, "model.max_rel_dist");
  if (auto v = get("model.classifier_hidden"))
    c.classifier_hidden = parse_size(*v, "model.classifier_hidden");
  if (auto v = get("model.layer_norm_eps")) c.layer_norm_eps = parse_double(*v, "model.layer_norm_eps");
  if (auto v = get("model.in_channels")) c.in_channels = parse_size(*v, "model.in_channels");
  if (auto v = get("model.max_len")) c.max_len = parse_size(*v, "model.max_len");
  if (auto v = get("task")) c.task = task_kind_from_string(*v);
  if (auto v = get("task.n_classes")) c.n_classes = parse_size(*v, "task.n_classes");
  return c;
}

// ---------------------------------------------------------------------------
// Blocks

BlockParams BlockParams::init(const ModelConfig& config, Rng& rng) {
  config.validate();
  BlockParams b;
  std::size_t d = config.d;
  std::size_t aw = config.attention_width();
  std::size_t dw = config.dilated_width();
  b.layer_norm_eps = config.layer_norm_eps;
  if (aw > 0) {
    b.attention = AttentionHeadParams::init(d, aw, aw, config.heads, rng);
    if (config.pos_encoding == PosEncodingKind::Relative1D)
      b.attention->relative =
          PositionalEncoding::relative(config.max_rel_dist, b.attention->head_dim, rng);
    if (config.evolving())
      b.evolution = EvolveParams{config.alpha, config.beta,
                                 Conv2dMapParams::init(config.heads, config.mask_kind, rng)};
  }
  if (dw > 0) b.dilated = DilatedConvParams::init(d, dw, config.dilated_layers, rng);
  std::size_t hidden = config.ffn_width();
  b.w1 = xavier_tensor({d, hidden}, d, hidden, rng);
  b.b1 = Tensor::zeros({hidden}, true);
  b.w2 = xavier_tensor({hidden, d}, hidden, d, rng);
  b.b2 = Tensor::zeros({d}, true);
  b.norm1_gamma = Tensor::full({d}, 1.0, true);
  b.norm1_beta = Tensor::zeros({d}, true);
  b.norm2_gamma = Tensor::full({d}, 1.0, true);
  b.norm2_beta = Tensor::zeros({d}, true);
  return b;
}

std::size_t BlockParams::attention_parameter_count() const {
  std::size_t n = 0;
  if (attention) {
    n += attention->wq.numel() + attention->wk.numel() + attention->wv.numel() +
         attention->wo.numel();
    if (attention->relative) n += attention->relative->table.numel();
  }
  if (evolution) n += evolution->conv.kernel.numel() + evolution->conv.bias.numel();
  return n;
}

namespace {

Tensor branch_dropout(const Tensor& t, const BlockContext& ctx) {
  if (!ctx.training || ctx.dropout == 0.0) return t;
  if (!ctx.rng) throw ContractError("training-mode dropout needs a generator");
  return dropout(t, ctx.dropout, *ctx.rng, true);
}

BlockOutput run_block(const Tensor& x, const std::optional<AttentionLogits>& prev,
                      const BlockParams& params, const BlockContext& ctx) {
  if (x.rank() != 3) throw ShapeError("block input must be (B, N, d), got " + shape_str(x.shape()));
  if (!params.attention && !params.dilated)
    throw ConfigError("a block needs an attention branch, a dilated branch, or both");
  BlockOutput out;
  Tensor attn_out;
  if (params.attention) {
    AttentionLogits logits = raw_logits(x, *params.attention);
    if (params.evolution) {
      logits = evolve(prev, logits, *params.evolution, ctx.valid);
    } else {
      logits.layer_index = prev ? prev->layer_index + 1 : 1;
    }
    attn_out = attention_apply(logits, x, *params.attention, ctx.valid,
                               DropoutSpec{ctx.dropout, ctx.rng, ctx.training});
    out.logits = logits;
  }
  Tensor mixed;
  if (params.dilated) {
    Tensor conv_out = dilated_conv1d_stack(x, *params.dilated);
    mixed = attn_out.defined() ? concat_last(attn_out, conv_out) : conv_out;
  } else {
    mixed = attn_out;
  }
  if (mixed.shape() != x.shape())
    throw ShapeError("block branches produce " + shape_str(mixed.shape()) + " for input " +
                     shape_str(x.shape()));
  Tensor y1 = layer_norm(add(x, branch_dropout(mixed, ctx)), params.norm1_gamma,
                         params.norm1_beta, params.layer_norm_eps);
  Tensor ff = feed_forward(y1, params, ctx);
  out.y = layer_norm(add(y1, branch_dropout(ff, ctx)), params.norm2_gamma, params.norm2_beta,
                     params.layer_norm_eps);
  return out;
}

}  // namespace

Tensor feed_forward(const Tensor& z, const BlockParams& params, const BlockContext& ctx) {
  Tensor hidden = relu(linear(z, params.w1, params.b1));
  return linear(branch_dropout(hidden, ctx), params.w2, params.b2);
}

BlockOutput ea_transformer_block(const Tensor& x, const std::optional<AttentionLogits>& prev,
                                 const BlockParams& params, const BlockContext& ctx) {
  if (params.dilated || !params.attention)
    throw ConfigError("ea_transformer_block needs attention-only block parameters");
  return run_block(x, prev, params, ctx);
}

BlockOutput ea_dc_block(const Tensor& x, const std::optional<AttentionLogits>& prev,
                        const BlockParams& params, const BlockContext& ctx) {
  return run_block(x, prev, params, ctx);
}

// ---------------------------------------------------------------------------
// Model

Model Model::create(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng = derive_rng(seed, 0x6d6f64656cULL);
  Model m;
  m.config = config;
  std::size_t d = config.d;
  m.embed_w = xavier_tensor({config.in_channels, d}, config.in_channels, d, rng);
  m.embed_b = Tensor::zeros({d}, true);
  if (config.pos_encoding == PosEncodingKind::LearnedAbsolute)
    m.positional = PositionalEncoding::learned(config.max_len, d, rng);
  else if (config.pos_encoding == PosEncodingKind::Sinusoidal)
    m.positional = PositionalEncoding::sinusoidal(config.max_len, d);
  for (std::size_t i = 0; i < config.n_blocks; ++i) m.blocks.push_back(BlockParams::init(config, rng));

  std::size_t out_width = config.in_channels;
  if (config.task == TaskKind::Regression) out_width = 1;
  if (config.task == TaskKind::Classification) {
    out_width = config.n_classes;
    for (std::size_t i = 0; i < config.classifier_hidden; ++i) {
      m.head_hidden_w.push_back(xavier_tensor({d, d}, d, d, rng));
      m.head_hidden_b.push_back(Tensor::zeros({d}, true));
    }
  }
  m.head_w = xavier_tensor({d, out_width}, d, out_width, rng);
  m.head_b = Tensor::zeros({out_width}, true);
  return m;
}

std::optional<AttentionMask> Model::attention_mask(std::size_t batch, std::size_t len,
                                                   std::span<const std::size_t> lengths) const {
  std::optional<AttentionMask> mask;
  bool padded = std::any_of(lengths.begin(), lengths.end(), [len](std::size_t l) { return l < len; });
  if (padded) {
    if (lengths.size() != batch) throw ShapeError("one length per batch element required");
    mask = AttentionMask::key_padding(lengths, len);
  }
  if (config.mask_kind == ConvMaskKind::DecoderSelf) {
    AttentionMask causal = AttentionMask::causal(len);
    mask = mask ? (*mask & causal) : causal;
  }
  return mask;
}

EncodeResult Model::encode(const Tensor& x, std::span<const std::size_t> lengths,
                           const ForwardContext& ctx) const {
  if (x.rank() != 3 || x.dim(2) != config.in_channels)
    throw ShapeError("model expects input (B, T, " + std::to_string(config.in_channels) +
                     "), got " + shape_str(x.shape()));
  if (x.dim(1) > config.max_len)
    throw ShapeError("series length " + std::to_string(x.dim(1)) + " exceeds model maximum " +
                     std::to_string(config.max_len));
  EncodeResult result;
  result.valid = attention_mask(x.dim(0), x.dim(1), lengths);
  BlockContext bctx{result.valid ? &*result.valid : nullptr, config.dropout, ctx.rng, ctx.training};

  Tensor h = linear(x, embed_w, embed_b);
  if (positional) h = add_positional(h, *positional);
  std::optional<AttentionLogits> prev;
  for (const auto& block : blocks) {
    BlockOutput out = ea_dc_block(h, prev, block, bctx);
    h = out.y;
    if (out.logits) {
      result.logits.push_back(*out.logits);
      prev = out.logits;
    }
  }
  result.z = h;
  return result;
}

Tensor Model::reconstruct_head(const Tensor& z) const {
  if (config.task != TaskKind::Pretrain) throw ConfigError("model has no reconstruction head");
  return linear(z, head_w, head_b);
}

Tensor Model::regression_head(const Tensor& z, std::span<const std::size_t> lengths) const {
  if (config.task != TaskKind::Regression) throw ConfigError("model has no regression head");
  Tensor pooled = time_mean_pool(z, lengths);
  return reshape(linear(pooled, head_w, head_b), {z.dim(0)});
}

Tensor Model::classification_head(const Tensor& z, std::span<const std::size_t> lengths) const {
  if (config.task != TaskKind::Classification) throw ConfigError("model has no classification head");
  Tensor h = time_mean_pool(z, lengths);
  for (std::size_t i = 0; i < head_hidden_w.size(); ++i)
    h = relu(linear(h, head_hidden_w[i], head_hidden_b[i]));
  return softmax_masked(linear(h, head_w, head_b));
}

std::vector<NamedTensor> Model::parameters() const {
  std::vector<NamedTensor> out;
  out.push_back({"embed.weight", embed_w});
  out.push_back({"embed.bias", embed_b});
  if (positional && positional->kind == PosEncodingKind::LearnedAbsolute)
    out.push_back({"pos.table", positional->table});
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const BlockParams& b = blocks[i];
    std::string p = "block" + std::to_string(i) + ".";
    if (b.attention) {
      out.push_back({p + "attn.wq", b.attention->wq});
      out.push_back({p + "attn.wk", b.attention->wk});
      out.push_back({p + "attn.wv", b.attention->wv});
      out.push_back({p + "attn.wo", b.attention->wo});
      if (b.attention->relative) out.push_back({p + "attn.relative", b.attention->relative->table});
    }
    if (b.evolution) {
      out.push_back({p + "evolve.kernel", b.evolution->conv.kernel});
      out.push_back({p + "evolve.bias", b.evolution->conv.bias});
    }
    if (b.dilated) {
      for (std::size_t l = 0; l < b.dilated->layers(); ++l) {
        std::string q = p + "dilated" + std::to_string(l) + ".";
        out.push_back({q + "kernel", b.dilated->kernels[l]});
        out.push_back({q + "bias", b.dilated->biases[l]});
      }
    }
    out.push_back({p + "ffn.w1", b.w1});
    out.push_back({p + "ffn.b1", b.b1});
    out.push_back({p + "ffn.w2", b.w2});
    out.push_back({p + "ffn.b2", b.b2});
    out.push_back({p + "norm1.gamma", b.norm1_gamma});
    out.push_back({p + "norm1.beta", b.norm1_beta});
    out.push_back({p + "norm2.gamma", b.norm2_gamma});
    out.push_back({p + "norm2.beta", b.norm2_beta});
  }
  for (std::size_t i = 0; i < head_hidden_w.size(); ++i) {
    out.push_back({"head.hidden" + std::to_string(i) + ".weight", head_hidden_w[i]});
    out.push_back({"head.hidden" + std::to_string(i) + ".bias", head_hidden_b[i]});
  }
  out.push_back({"head.weight", head_w});
  out.push_back({"head.bias", head_b});
  return out;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.tensor.numel();
  return n;
}

std::size_t copy_matching_parameters(const Model& src, Model& dst, const std::string& skip_prefix) {
  std::map<std::string, Tensor> source;
  for (auto& p : src.parameters()) source.emplace(p.name, p.tensor);
  std::vector<std::string> mismatches;
  std::vector<std::pair<Tensor, Tensor>> copies;
  for (auto& p : dst.parameters()) {
    if (!skip_prefix.empty() && p.name.rfind(skip_prefix, 0) == 0) continue;
    auto it = source.find(p.name);
    if (it == source.end()) continue;
    if (it->second.shape() != p.tensor.shape()) {
      mismatches.push_back(p.name + ": " + shape_str(it->second.shape()) + " vs " +
                           shape_str(p.tensor.shape()));
      continue;
    }
    copies.emplace_back(it->second, p.tensor);
  }
  if (!mismatches.empty()) {
    std::string msg = "architecture mismatch:";
    for (const auto& m : mismatches) msg += "\n  " + m;
    throw ConfigError(msg);
  }
  for (auto& [from, to] : copies) {
    auto values = to.mutable_data();
    std::copy(from.data().begin(), from.data().end(), values.begin());
  }
  return copies.size();
}

}  // namespace eanet
