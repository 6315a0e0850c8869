#include "mmft/encoder.hpp"

#include <string>

#include "mmft/errors.hpp"
#include "mmft/ops.hpp"

namespace mmft {

void FeatureTriple::validate() const {
  for (const auto& m : maps) {
    if (!m.defined() || m.rank() != 3) throw ShapeError("feature triple: every map must be [C,H,W]");
  }
  if (maps[1].shape() != maps[0].shape() || maps[2].shape() != maps[0].shape()) {
    throw ShapeError("feature triple: shapes differ: " + shape_str(maps[0].shape()) + ", " +
                     shape_str(maps[1].shape()) + ", " + shape_str(maps[2].shape()));
  }
}

void EncoderConfig::validate() const {
  if (input_size < 32 || input_size % 32 != 0) {
    throw ValidationError("encoder input size must be a positive multiple of 32, got " +
                          std::to_string(input_size));
  }
  for (std::size_t i = 0; i < kNumLevels; ++i) {
    if (channels[i] < 1) throw ValidationError("encoder channels must be positive");
    if (strides[i] != (std::int64_t{2} << i)) throw ValidationError("encoder strides must be 2,4,8,16,32");
  }
}

Encoder::Encoder(const EncoderConfig& config, ParameterStore& store, Rng& rng) : config_(config) {
  config_.validate();
  std::int64_t in = 3;
  for (std::size_t i = 0; i < kNumLevels; ++i) {
    const std::string name = "encoder.stage" + std::to_string(i + 1);
    const auto out = config_.channels[i];
    stages_[i].conv = Conv2d::create(store, name + ".conv", in, out, 3, 1, rng);
    stages_[i].down = Conv2d::create(store, name + ".down", out, out, 3, 2, rng);
    in = out;
  }
}

FeaturePyramid Encoder::operator()(const Tensor& rgb) const {
  const Shape expected{3, config_.input_size, config_.input_size};
  if (rgb.shape() != expected) {
    throw ValidationError("encoder: expected input " + shape_str(expected) + ", got " + shape_str(rgb.shape()));
  }
  FeaturePyramid p;
  Tensor x = rgb;
  for (std::size_t i = 0; i < kNumLevels; ++i) {
    x = relu(stages_[i].down(relu(stages_[i].conv(x))));
    p.levels[i] = x;
  }
  return p;
}

ModalityStems::ModalityStems(std::int64_t in_channels, std::int64_t out_channels, ParameterStore& store,
                             Rng& rng) {
  for (Task t : kTasks) {
    heads_[static_cast<std::size_t>(t)] =
        Conv2d::create(store, "stem." + std::string(task_name(t)), in_channels, out_channels, 3, 1, rng);
  }
}

FeatureTriple ModalityStems::operator()(const Tensor& deepest) const {
  if (deepest.rank() != 3 || deepest.dim(0) != heads_[0].in_channels()) {
    throw ShapeError("modality stems: expected " + std::to_string(heads_[0].in_channels()) +
                     " input channels, got " + shape_str(deepest.shape()));
  }
  FeatureTriple t;
  for (std::size_t i = 0; i < kNumTasks; ++i) t.maps[i] = relu(heads_[i](deepest));
  return t;
}

}  // namespace mmft
