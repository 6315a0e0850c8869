#include "mmft/decoder.hpp"

#include "mmft/errors.hpp"
#include "mmft/ops.hpp"

namespace mmft {

void DecoderConfig::validate() const {
  if (input_size < 32 || input_size % 32 != 0) {
    throw ValidationError("decoder input size must be a positive multiple of 32");
  }
  for (std::size_t i = 0; i < kNumLevels; ++i) {
    if (channels[i] < 1 || encoder_channels[i] < 1) throw ValidationError("decoder channels must be positive");
  }
}

SqueezeExpand::SqueezeExpand(std::int64_t channels, ParameterStore& store, const std::string& name,
                             Rng& rng) {
  squeeze_conv = Conv2d::create(store, name + ".squeeze", channels, channels, 3, 1, rng);
  for (Task t : kTasks) {
    expand_convs[static_cast<std::size_t>(t)] = Conv2d::create(
        store, name + ".expand." + std::string(task_name(t)), channels, channels, 3, 1, rng, 1.0);
  }
}

Tensor SqueezeExpand::squeeze(const FeatureTriple& t) const {
  t.validate();
  return relu(squeeze_conv(add(add(t[Task::Depth], t[Task::Saliency]), t[Task::Contour])));
}

FeatureTriple SqueezeExpand::expand(const FeatureTriple& t, const Tensor& fused) const {
  t.validate();
  if (fused.shape() != t.shape()) {
    throw ShapeError("expand: fused map " + shape_str(fused.shape()) + " does not match " + shape_str(t.shape()));
  }
  FeatureTriple out;
  for (std::size_t i = 0; i < kNumTasks; ++i) out.maps[i] = add(t.maps[i], expand_convs[i](fused));
  return out;
}

SideHead::SideHead(std::int64_t channels, ParameterStore& store, const std::string& name, Rng& rng) {
  proj = Conv2d::create(store, name, channels, 1, 1, 1, rng, 1.0);
}

Tensor SideHead::operator()(const Tensor& features, std::int64_t size) const {
  return sigmoid(resize_bilinear(proj(features), size, size));
}

TopDownMerge::TopDownMerge(std::int64_t in_channels, std::int64_t out_channels, std::int64_t skip_channels,
                           ParameterStore& store, const std::string& name, Rng& rng) {
  for (Task t : kTasks) {
    const std::string task(task_name(t));
    up_convs[static_cast<std::size_t>(t)] =
        Conv2d::create(store, name + ".up." + task, in_channels, out_channels, 3, 1, rng);
    lateral_convs[static_cast<std::size_t>(t)] =
        Conv2d::create(store, name + ".lateral." + task, skip_channels, out_channels, 1, 1, rng);
  }
}

FeatureTriple TopDownMerge::operator()(const FeatureTriple& enhanced, const Tensor& skip) const {
  enhanced.validate();
  const auto h = enhanced.shape()[1] * 2, w = enhanced.shape()[2] * 2;
  if (skip.rank() != 3 || skip.dim(1) != h || skip.dim(2) != w) {
    throw ShapeError("top-down merge: upsampled " + shape_str(enhanced.shape()) + " does not meet skip " +
                     shape_str(skip.shape()));
  }
  FeatureTriple out;
  for (std::size_t i = 0; i < kNumTasks; ++i) {
    const Tensor up = up_convs[i](resize_bilinear(enhanced.maps[i], h, w));
    out.maps[i] = relu(add(up, lateral_convs[i](skip)));
  }
  return out;
}

Decoder::Decoder(const DecoderConfig& config, ParameterStore& store, Rng& rng) : config_(config) {
  config_.validate();
  heads_.resize(kNumLevels);
  for (std::size_t l = 0; l < kNumLevels; ++l) {
    for (Task t : kTasks) {
      heads_[l][static_cast<std::size_t>(t)] = SideHead(
          config_.channels[l], store, "decoder.level" + std::to_string(l + 1) + ".side." + std::string(task_name(t)),
          rng);
    }
  }
  for (std::size_t l = 0; l + 1 < kNumLevels; ++l) {
    merges_.emplace_back(config_.channels[l + 1], config_.channels[l], config_.encoder_channels[l], store,
                         "decoder.level" + std::to_string(l + 1) + ".merge", rng);
    blocks_.emplace_back(config_.channels[l], store, "decoder.level" + std::to_string(l + 1) + ".se", rng);
  }
}

DecodeResult Decoder::operator()(const FeaturePyramid& pyramid, const FeatureTriple& level5,
                                 const Level5Fusion& fusion) const {
  level5.validate();
  const auto size = config_.input_size;
  DecodeResult r;
  auto emit = [&](std::size_t level, const FeatureTriple& t) {
    for (std::size_t i = 0; i < kNumTasks; ++i) r.side.maps[level][i] = heads_[level][i](t.maps[i], size);
  };

  std::size_t level = kNumLevels - 1;
  emit(level, level5);
  FeatureTriple t = fusion(level5);
  if (t.shape() != level5.shape()) throw ShapeError("level-5 fusion changed the feature shape");
  while (level-- > 0) {
    t = merges_[level](t, pyramid.levels[level]);
    emit(level, t);
    t = blocks_[level](t);
  }
  r.prediction = r.side.maps[0];
  r.enhanced_finest = t;
  return r;
}

}  // namespace mmft
