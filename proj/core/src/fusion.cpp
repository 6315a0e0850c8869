#include "mmft/fusion.hpp"

#include "mmft/errors.hpp"
#include "mmft/ops.hpp"

namespace mmft {

std::string_view fusion_name(FusionKind kind) {
  switch (kind) {
    case FusionKind::Mft: return "mft";
    case FusionKind::MsfOff: return "msf-off";
    case FusionKind::ConvReplacement: return "conv";
    case FusionKind::NonLocal: return "non-local";
  }
  return "?";
}

FusionKind parse_fusion(std::string_view name) {
  for (auto k : {FusionKind::Mft, FusionKind::MsfOff, FusionKind::ConvReplacement, FusionKind::NonLocal}) {
    if (fusion_name(k) == name) return k;
  }
  throw ValidationError("unknown fusion variant '" + std::string(name) + "' (mft, msf-off, conv, non-local)");
}

namespace {

std::array<Conv2d, kNumTasks> make_projections(const MftConfig& config, ParameterStore& store, Rng& rng,
                                               const std::string& name) {
  std::array<Conv2d, kNumTasks> out;
  for (Task t : kTasks) {
    out[static_cast<std::size_t>(t)] = Conv2d::create(store, name + ".proj." + std::string(task_name(t)),
                                                      config.model_dim, config.modality_channels, 1, 1, rng, 1.0);
  }
  return out;
}

FeatureTriple residual_projection(const FeatureTriple& t, const Tensor& fused,
                                  const std::array<Conv2d, kNumTasks>& projections) {
  FeatureTriple out;
  for (std::size_t i = 0; i < kNumTasks; ++i) out.maps[i] = add(t.maps[i], projections[i](fused));
  return out;
}

Tensor stack(const FeatureTriple& t, const MftConfig& config) {
  t.validate();
  if (t.shape()[0] != config.modality_channels) {
    throw ShapeError("fusion: expected " + std::to_string(config.modality_channels) + " channels per modality, got " +
                     shape_str(t.shape()));
  }
  return concat({t[Task::Depth], t[Task::Saliency], t[Task::Contour]}, 0);
}

}  // namespace

ConvFusion::ConvFusion(const MftConfig& config, ParameterStore& store, Rng& rng, const std::string& name)
    : config_(config) {
  config_.validate();
  first_ = Conv2d::create(store, name + ".conv1", config_.model_dim, config_.model_dim, 3, 1, rng);
  second_ = Conv2d::create(store, name + ".conv2", config_.model_dim, config_.model_dim, 3, 1, rng);
  projections_ = make_projections(config_, store, rng, name);
}

FeatureTriple ConvFusion::operator()(const FeatureTriple& t) const {
  const Tensor fused = relu(second_(relu(first_(stack(t, config_)))));
  return residual_projection(t, fused, projections_);
}

NonLocalFusion::NonLocalFusion(const MftConfig& config, ParameterStore& store, Rng& rng, const std::string& name)
    : config_(config) {
  config_.validate();
  attention_ = MhsaParams::create(store, name + ".attn", config_.model_dim, 1, config_.model_dim / 2, rng);
  projections_ = make_projections(config_, store, rng, name);
}

FeatureTriple NonLocalFusion::operator()(const FeatureTriple& t) const {
  stack(t, config_);
  const auto h = t.shape()[1], w = t.shape()[2];
  const Tensor tokens = aggregate_modalities(t, config_.model_dim);
  const Tensor out = add(tokens, mhsa(tokens, tokens, tokens, attention_, 1, config_.model_dim / 2));
  return residual_projection(t, tokens_to_map(out, h, w), projections_);
}

std::unique_ptr<Level5Fusion> make_fusion(FusionKind kind, const MftConfig& config, ParameterStore& store,
                                          Rng& rng) {
  switch (kind) {
    case FusionKind::Mft: {
      MftConfig c = config;
      c.use_filter = true;
      return std::make_unique<MftBlock>(c, store, rng);
    }
    case FusionKind::MsfOff: {
      MftConfig c = config;
      c.use_filter = false;
      return std::make_unique<MftBlock>(c, store, rng);
    }
    case FusionKind::ConvReplacement: return std::make_unique<ConvFusion>(config, store, rng);
    case FusionKind::NonLocal: return std::make_unique<NonLocalFusion>(config, store, rng);
  }
  throw ValidationError("unknown fusion variant");
}

}  // namespace mmft
