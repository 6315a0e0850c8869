#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "mmft/features.hpp"
#include "mmft/layers.hpp"

namespace mmft {

struct DecoderConfig {
  /// Per-modality channels, finest level first.
  std::array<std::int64_t, kNumLevels> channels{16, 32, 64, 128, 128};
  std::array<std::int64_t, kNumLevels> encoder_channels{16, 32, 64, 128, 256};
  std::int64_t input_size = 352;

  void validate() const;
};

/// Squeeze-and-Expand fusion of one decoder level.
///
/// squeeze: F_DSC = ReLU(Conv3x3(F_D + F_S + F_C)).
/// expand:  F_enM = F_M + Conv3x3_M(F_DSC), one conv per modality.
class SqueezeExpand {
 public:
  SqueezeExpand(std::int64_t channels, ParameterStore& store, const std::string& name, Rng& rng);

  Tensor squeeze(const FeatureTriple& t) const;
  FeatureTriple expand(const FeatureTriple& t, const Tensor& fused) const;
  FeatureTriple operator()(const FeatureTriple& t) const { return expand(t, squeeze(t)); }

  Conv2d squeeze_conv;
  std::array<Conv2d, kNumTasks> expand_convs;
};

/// Deep-supervision head: 1x1 conv to one channel, bilinear upsample to the
/// input size, sigmoid.
class SideHead {
 public:
  SideHead() = default;
  SideHead(std::int64_t channels, ParameterStore& store, const std::string& name, Rng& rng);

  Tensor operator()(const Tensor& features, std::int64_t size) const;

  Conv2d proj;
};

/// FPN-style step from level i to level i-1: per modality, upsample x2,
/// 3x3 conv to the finer width, add a 1x1 lateral conv of the encoder skip, ReLU.
class TopDownMerge {
 public:
  TopDownMerge(std::int64_t in_channels, std::int64_t out_channels, std::int64_t skip_channels,
               ParameterStore& store, const std::string& name, Rng& rng);

  FeatureTriple operator()(const FeatureTriple& enhanced, const Tensor& skip) const;

  std::array<Conv2d, kNumTasks> up_convs;
  std::array<Conv2d, kNumTasks> lateral_convs;
};

/// The fusion used in the deepest decoder block (the transformer block or an
/// ablation stand-in). Maps a level-5 triple to an enhanced triple of equal shape.
class Level5Fusion {
 public:
  virtual ~Level5Fusion() = default;
  virtual FeatureTriple operator()(const FeatureTriple& t) const = 0;
};

struct DecodeResult {
  SideOutputs side;
  /// Final task predictions: the level-1 (finest) side outputs.
  std::array<Tensor, kNumTasks> prediction;
  /// Output of the finest block's Squeeze-and-Expand.
  FeatureTriple enhanced_finest;

  const Tensor& predicted(Task t) const { return prediction[static_cast<std::size_t>(t)]; }
};

class Decoder {
 public:
  Decoder(const DecoderConfig& config, ParameterStore& store, Rng& rng);

  /// level5: the initial deepest-level triple (from the modality stems).
  DecodeResult operator()(const FeaturePyramid& pyramid, const FeatureTriple& level5,
                          const Level5Fusion& fusion) const;

  const DecoderConfig& config() const { return config_; }
  const SqueezeExpand& block(std::size_t level) const { return blocks_.at(level); }
  const TopDownMerge& merge(std::size_t level) const { return merges_.at(level); }
  const SideHead& side_head(std::size_t level, Task t) const {
    return heads_.at(level)[static_cast<std::size_t>(t)];
  }

 private:
  DecoderConfig config_;
  std::vector<std::array<SideHead, kNumTasks>> heads_;  // [level][task]
  std::vector<SqueezeExpand> blocks_;                     // levels 0..3
  std::vector<TopDownMerge> merges_;                      // merges_[l]: level l+1 -> level l
};

}  // namespace mmft
