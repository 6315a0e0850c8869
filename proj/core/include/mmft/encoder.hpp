#pragma once

#include <array>
#include <cstdint>

#include "mmft/features.hpp"
#include "mmft/layers.hpp"

namespace mmft {

struct EncoderConfig {
  std::array<std::int64_t, kNumLevels> channels{16, 32, 64, 128, 256};
  std::array<std::int64_t, kNumLevels> strides{2, 4, 8, 16, 32};
  std::int64_t input_size = 352;

  void validate() const;
};

/// Toy multi-scale backbone. Each of the five stages is a 3x3 conv + ReLU
/// followed by a stride-2 3x3 conv + ReLU, so level i sits at stride 2^(i+1).
class Encoder {
 public:
  Encoder(const EncoderConfig& config, ParameterStore& store, Rng& rng);

  /// rgb must be [3,S,S] with S == config.input_size.
  FeaturePyramid operator()(const Tensor& rgb) const;
  const EncoderConfig& config() const { return config_; }

 private:
  struct Stage {
    Conv2d conv;
    Conv2d down;
  };
  EncoderConfig config_;
  std::array<Stage, kNumLevels> stages_;
};

/// Three independent 3x3 conv + ReLU heads that turn the deepest encoder level
/// into the initial depth / saliency / contour streams.
class ModalityStems {
 public:
  ModalityStems(std::int64_t in_channels, std::int64_t out_channels, ParameterStore& store, Rng& rng);

  FeatureTriple operator()(const Tensor& deepest) const;

 private:
  std::array<Conv2d, kNumTasks> heads_;
};

}  // namespace mmft
