#pragma once

#include <cstdint>
#include <memory>

#include "mmft/decoder.hpp"
#include "mmft/encoder.hpp"
#include "mmft/fusion.hpp"
#include "mmft/mft.hpp"

namespace mmft {

struct ModelConfig {
  std::int64_t input_size = 352;
  EncoderConfig encoder;
  DecoderConfig decoder;
  MftConfig mft;
  FusionKind fusion = FusionKind::Mft;
  std::uint64_t seed = 0;

  /// Copies input_size and encoder widths into the sub-configs and checks
  /// that the stream widths line up with the fusion block.
  void finalize();
  void validate() const;

  /// A small network for gradient checks and fast tests: 64x64 input, narrow
  /// channels, a 2-layer 2-head transformer.
  static ModelConfig reduced(std::int64_t input_size = 64);
};

/// Encoder, modality stems, multi-modal decoder and deepest-level fusion
/// sharing one parameter store. Inference consumes only the RGB image.
class Model {
 public:
  explicit Model(ModelConfig config);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  /// rgb [3,S,S] -> side outputs and final predictions.
  DecodeResult forward(const Tensor& rgb) const;

  ParameterStore& parameters() { return store_; }
  const ParameterStore& parameters() const { return store_; }
  const ModelConfig& config() const { return config_; }
  const Level5Fusion& fusion() const { return *fusion_; }
  const Decoder& decoder() const { return *decoder_; }

 private:
  ModelConfig config_;
  ParameterStore store_;
  std::unique_ptr<Encoder> encoder_;
  std::unique_ptr<ModalityStems> stems_;
  std::unique_ptr<Decoder> decoder_;
  std::unique_ptr<Level5Fusion> fusion_;
};

}  // namespace mmft
