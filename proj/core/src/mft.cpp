#include "mmft/mft.hpp"

#include <cmath>

#include "mmft/errors.hpp"
#include "mmft/ops.hpp"

namespace mmft {

void MftConfig::validate() const {
  if (heads < 1 || head_dim < 1) throw ValidationError("mft: heads and head_dim must be positive");
  if (model_dim % 3 != 0) throw ValidationError("mft: model_dim must be divisible by 3 modalities");
  if (model_dim % 4 != 0) throw ValidationError("mft: model_dim must be divisible by 4 for the positional encoding");
  if (modality_channels * 3 != model_dim) throw ValidationError("mft: 3 * modality_channels must equal model_dim");
  if (layers < 1) throw ValidationError("mft: at least one transformer layer is required");
  if (kernel < 1 || kernel % 2 == 0) throw ValidationError("mft: dynamic kernel size must be odd");
  if (groups < 1 || modality_channels % groups != 0) {
    throw ValidationError("mft: groups must divide the modality channel count");
  }
  if (ffn_dim < 1 || filter_hidden < 1) throw ValidationError("mft: hidden widths must be positive");
}

Tensor positional_encoding(std::int64_t height, std::int64_t width, std::int64_t model_dim) {
  if (model_dim % 4 != 0) {
    throw ValidationError("positional_encoding: model_dim must be divisible by 4, got " + std::to_string(model_dim));
  }
  const std::int64_t half = model_dim / 2;
  std::vector<Real> out(static_cast<std::size_t>(height * width * model_dim));
  std::vector<Real> freq(static_cast<std::size_t>(half / 2));
  for (std::int64_t j = 0; j < half / 2; ++j) {
    freq[j] = std::pow(10000.0, -2.0 * static_cast<Real>(j) / static_cast<Real>(half));
  }
  for (std::int64_t y = 0; y < height; ++y) {
    for (std::int64_t x = 0; x < width; ++x) {
      Real* row = out.data() + (y * width + x) * model_dim;
      for (std::int64_t j = 0; j < half / 2; ++j) {
        row[2 * j] = std::sin(static_cast<Real>(y) * freq[j]);
        row[2 * j + 1] = std::cos(static_cast<Real>(y) * freq[j]);
        row[half + 2 * j] = std::sin(static_cast<Real>(x) * freq[j]);
        row[half + 2 * j + 1] = std::cos(static_cast<Real>(x) * freq[j]);
      }
    }
  }
  return Tensor(Shape{height * width, model_dim}, std::move(out));
}

MhsaParams MhsaParams::create(ParameterStore& store, const std::string& name, std::int64_t model_dim, int heads,
                              std::int64_t head_dim, Rng& rng) {
  const std::int64_t inner = heads * head_dim;
  MhsaParams p;
  p.wq = store.normal(name + ".wq", {model_dim, inner}, model_dim, 1.0, rng);
  p.wk = store.normal(name + ".wk", {model_dim, inner}, model_dim, 1.0, rng);
  p.wv = store.normal(name + ".wv", {model_dim, inner}, model_dim, 1.0, rng);
  p.wo = store.normal(name + ".wo", {inner, model_dim}, inner, 0.5, rng);
  return p;
}

Tensor mhsa(const Tensor& q, const Tensor& k, const Tensor& v, const MhsaParams& p, int heads,
            std::int64_t head_dim) {
  if (q.rank() != 2 || k.shape() != q.shape() || v.shape() != q.shape()) {
    throw ShapeError("mhsa: q, k, v must share one [N, d_m] shape, got " + shape_str(q.shape()) + ", " +
                     shape_str(k.shape()) + ", " + shape_str(v.shape()));
  }
  if (p.wq.dim(0) != q.dim(1) || p.wq.dim(1) != heads * head_dim || p.wo.dim(0) != heads * head_dim) {
    throw ShapeError("mhsa: projection shapes do not match heads x head_dim");
  }
  const Tensor qp = matmul(q, p.wq);
  const Tensor kp = matmul(k, p.wk);
  const Tensor vp = matmul(v, p.wv);
  const Real inv_sqrt = 1.0 / std::sqrt(static_cast<Real>(head_dim));
  std::vector<Tensor> outputs;
  outputs.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    const Tensor qh = slice(qp, 1, h * head_dim, head_dim);
    const Tensor kh = slice(kp, 1, h * head_dim, head_dim);
    const Tensor vh = slice(vp, 1, h * head_dim, head_dim);
    const Tensor attn = softmax(scale(matmul(qh, transpose(kh)), inv_sqrt), 1);
    outputs.push_back(matmul(attn, vh));
  }
  const Tensor joined = heads == 1 ? outputs.front() : concat(outputs, 1);
  return matmul(joined, p.wo);
}

TransformerLayerParams TransformerLayerParams::create(ParameterStore& store, const std::string& name,
                                                      const MftConfig& config, Rng& rng) {
  TransformerLayerParams p;
  p.attention = MhsaParams::create(store, name + ".attn", config.model_dim, config.heads, config.head_dim, rng);
  p.ffn_in = Linear::create(store, name + ".ffn_in", config.model_dim, config.ffn_dim, rng, std::sqrt(2.0));
  p.ffn_out = Linear::create(store, name + ".ffn_out", config.ffn_dim, config.model_dim, rng, 0.5);
  return p;
}

Tensor transformer_layer(const Tensor& tokens, const Tensor& pos, const TransformerLayerParams& p,
                         const MftConfig& config) {
  if (tokens.rank() != 2 || tokens.dim(1) != config.model_dim) {
    throw ShapeError("transformer_layer: tokens must be [N, " + std::to_string(config.model_dim) + "], got " +
                     shape_str(tokens.shape()));
  }
  if (pos.shape() != tokens.shape()) {
    throw ShapeError("transformer_layer: positional encoding " + shape_str(pos.shape()) + " does not match tokens " +
                     shape_str(tokens.shape()));
  }
  const Tensor qk = add(tokens, pos);
  const Tensor attended = add(tokens, mhsa(qk, qk, tokens, p.attention, config.heads, config.head_dim));
  return add(attended, p.ffn_out(relu(p.ffn_in(attended))));
}

Tensor aggregate_modalities(const FeatureTriple& t, std::int64_t model_dim) {
  t.validate();
  const auto c = t.shape()[0], h = t.shape()[1], w = t.shape()[2];
  if (3 * c != model_dim) {
    throw ShapeError("aggregate_modalities: 3 x " + std::to_string(c) + " channels != model_dim " +
                     std::to_string(model_dim));
  }
  const Tensor stacked = concat({t[Task::Depth], t[Task::Saliency], t[Task::Contour]}, 0);
  return transpose(reshape(stacked, {3 * c, h * w}));
}

Tensor tokens_to_map(const Tensor& tokens, std::int64_t height, std::int64_t width) {
  if (tokens.rank() != 2 || tokens.dim(0) != height * width) {
    throw ShapeError("tokens_to_map: " + shape_str(tokens.shape()) + " is not a " + std::to_string(height) + "x" +
                     std::to_string(width) + " token grid");
  }
  return reshape(transpose(tokens), {tokens.dim(1), height, width});
}

DynamicFilterGenerator::DynamicFilterGenerator(std::int64_t in_channels, std::int64_t hidden_channels,
                                               std::int64_t group_count, int kernel_size, ParameterStore& store,
                                               const std::string& name, Rng& rng)
    : groups(group_count), kernel(kernel_size) {
  hidden = Conv2d::create(store, name + ".hidden", in_channels, hidden_channels, 1, 1, rng, 1.0);
  out = Conv2d::create(store, name + ".out", hidden_channels, group_count * kernel_size * kernel_size, 1, 1, rng,
                       0.5);
}

Tensor DynamicFilterGenerator::operator()(const Tensor& features) const {
  if (features.rank() != 3 || features.dim(0) != hidden.in_channels()) {
    throw ShapeError("filter generator: expected " + std::to_string(hidden.in_channels()) + " channels, got " +
                     shape_str(features.shape()));
  }
  if (features.dim(0) % groups != 0) throw ShapeError("filter generator: channels not divisible by groups");
  const auto h = features.dim(1), w = features.dim(2);
  const Tensor raw = out(hidden(features));  // [G*K*K, H, W]
  return permute(reshape(raw, {groups, kernel, kernel, h, w}), {0, 3, 4, 1, 2});
}

Tensor apply_grouped_dynamic_filter(const Tensor& x, const Tensor& filters) {
  return grouped_dynamic_filter(x, filters);
}

MftBlock::MftBlock(const MftConfig& config, ParameterStore& store, Rng& rng, const std::string& name)
    : config_(config) {
  config_.validate();
  for (int l = 0; l < config_.layers; ++l) {
    layers.push_back(TransformerLayerParams::create(store, name + ".layer" + std::to_string(l + 1), config_, rng));
  }
  for (Task t : kTasks) {
    const std::string task(task_name(t));
    projections[static_cast<std::size_t>(t)] =
        Conv2d::create(store, name + ".proj." + task, config_.model_dim, config_.modality_channels, 1, 1, rng, 1.0);
    if (config_.use_filter) {
      generators[static_cast<std::size_t>(t)] =
          DynamicFilterGenerator(config_.modality_channels, config_.filter_hidden, config_.groups, config_.kernel,
                                 store, name + ".filter." + task, rng);
    }
  }
}

Tensor MftBlock::fused_map(const FeatureTriple& t) const {
  const auto h = t.shape()[1], w = t.shape()[2];
  Tensor x = aggregate_modalities(t, config_.model_dim);
  const Tensor pos = config_.use_positional_encoding ? positional_encoding(h, w, config_.model_dim)
                                                     : Tensor(Shape{h * w, config_.model_dim}, 0.0);
  for (const auto& layer : layers) x = transformer_layer(x, pos, layer, config_);
  return tokens_to_map(x, h, w);
}

Tensor MftBlock::filters(const FeatureTriple& t, Task task) const {
  if (!config_.use_filter) throw ValidationError("mft: filters requested with the filter disabled");
  return generators[static_cast<std::size_t>(task)](t[task]);
}

FeatureTriple MftBlock::operator()(const FeatureTriple& t) const {
  t.validate();
  if (t.shape()[0] != config_.modality_channels) {
    throw ShapeError("mft: expected " + std::to_string(config_.modality_channels) + " channels per modality, got " +
                     shape_str(t.shape()));
  }
  const Tensor fused = fused_map(t);
  FeatureTriple out;
  for (Task task : kTasks) {
    const auto i = static_cast<std::size_t>(task);
    Tensor v = projections[i](fused);
    if (config_.use_filter) v = apply_grouped_dynamic_filter(v, generators[i](t[task]));
    out[task] = add(t[task], v);
  }
  return out;
}

}  // namespace mmft
