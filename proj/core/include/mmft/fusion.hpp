#pragma once

#include <array>
#include <memory>
#include <string>
#include <string_view>

#include "mmft/decoder.hpp"
#include "mmft/mft.hpp"

namespace mmft {

/// Which unit fuses the three streams in the deepest decoder block.
enum class FusionKind {
  Mft,              // transformer + modality-specific filters
  MsfOff,           // transformer only: F_m + proj_m(TMFF)
  ConvReplacement,  // two 3x3 conv + ReLU layers over the concatenated streams
  NonLocal,         // one single-head non-local block over the concatenated streams
};

std::string_view fusion_name(FusionKind kind);
/// Accepts "mft", "msf-off", "conv", "non-local". Throws ValidationError otherwise.
FusionKind parse_fusion(std::string_view name);

/// Plain convolutional stand-in for the transformer: F_m + proj_m(conv(conv(concat))).
class ConvFusion : public Level5Fusion {
 public:
  ConvFusion(const MftConfig& config, ParameterStore& store, Rng& rng, const std::string& name = "convfuse");
  FeatureTriple operator()(const FeatureTriple& t) const override;

 private:
  MftConfig config_;
  Conv2d first_;
  Conv2d second_;
  std::array<Conv2d, kNumTasks> projections_;
};

/// Embedded-Gaussian non-local block: tokens + softmax(theta phi^T) g W_z, with
/// theta/phi/g of width d_m/2 and no positional encoding or FFN.
class NonLocalFusion : public Level5Fusion {
 public:
  NonLocalFusion(const MftConfig& config, ParameterStore& store, Rng& rng, const std::string& name = "nonlocal");
  FeatureTriple operator()(const FeatureTriple& t) const override;

 private:
  MftConfig config_;
  MhsaParams attention_;
  std::array<Conv2d, kNumTasks> projections_;
};

std::unique_ptr<Level5Fusion> make_fusion(FusionKind kind, const MftConfig& config, ParameterStore& store,
                                          Rng& rng);

}  // namespace mmft
