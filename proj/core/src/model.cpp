#include "mmft/model.hpp"

#include "mmft/errors.hpp"

namespace mmft {

void ModelConfig::finalize() {
  encoder.input_size = input_size;
  decoder.input_size = input_size;
  decoder.encoder_channels = encoder.channels;
  mft.use_filter = fusion == FusionKind::Mft;
}

void ModelConfig::validate() const {
  encoder.validate();
  decoder.validate();
  mft.validate();
  if (encoder.input_size != input_size || decoder.input_size != input_size) {
    throw ValidationError("model: sub-config input sizes disagree with input_size");
  }
  if (decoder.encoder_channels != encoder.channels) {
    throw ValidationError("model: decoder skip widths must match the encoder widths");
  }
  if (decoder.channels[kNumLevels - 1] != mft.modality_channels) {
    throw ValidationError("model: deepest decoder width " + std::to_string(decoder.channels[kNumLevels - 1]) +
                          " != fusion stream width " + std::to_string(mft.modality_channels));
  }
}

ModelConfig ModelConfig::reduced(std::int64_t input_size) {
  ModelConfig c;
  c.input_size = input_size;
  c.encoder.channels = {4, 4, 6, 6, 8};
  c.decoder.channels = {3, 3, 4, 4, 4};
  c.mft.heads = 2;
  c.mft.head_dim = 3;
  c.mft.model_dim = 12;
  c.mft.modality_channels = 4;
  c.mft.layers = 2;
  c.mft.ffn_dim = 16;
  c.mft.filter_hidden = 4;
  c.mft.groups = 2;
  c.finalize();
  return c;
}

Model::Model(ModelConfig config) : config_(config) {
  config_.finalize();
  config_.validate();
  Rng rng(config_.seed);
  encoder_ = std::make_unique<Encoder>(config_.encoder, store_, rng);
  stems_ = std::make_unique<ModalityStems>(config_.encoder.channels[kNumLevels - 1], config_.mft.modality_channels,
                                           store_, rng);
  fusion_ = make_fusion(config_.fusion, config_.mft, store_, rng);
  decoder_ = std::make_unique<Decoder>(config_.decoder, store_, rng);
}

DecodeResult Model::forward(const Tensor& rgb) const {
  const FeaturePyramid pyramid = (*encoder_)(rgb);
  const FeatureTriple level5 = (*stems_)(pyramid.levels[kNumLevels - 1]);
  return (*decoder_)(pyramid, level5, *fusion_);
}

}  // namespace mmft
