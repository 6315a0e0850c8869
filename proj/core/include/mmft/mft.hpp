#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mmft/decoder.hpp"
#include "mmft/features.hpp"
#include "mmft/layers.hpp"

namespace mmft {

/// Multi-modal filtered transformer hyper-parameters.
///
/// Heads use head_dim-wide query/key/value projections; the concatenated
/// heads (heads * head_dim wide) are mapped back to model_dim by W^O.
struct MftConfig {
  int heads = 8;
  std::int64_t model_dim = 384;
  std::int64_t head_dim = 12;
  int layers = 6;
  std::int64_t ffn_dim = 4 * 384;
  /// Width of each modality stream entering the block (model_dim / 3).
  std::int64_t modality_channels = 128;
  /// Hidden width of the two-layer 1x1 filter generator.
  std::int64_t filter_hidden = 64;
  std::int64_t groups = 8;
  int kernel = 3;
  /// false drops the modality-specific filter (the "MSF off" ablation).
  bool use_filter = true;
  /// false replaces the sine/cosine encoding with zeros.
  bool use_positional_encoding = true;

  void validate() const;
};

/// Fixed 2-D sine/cosine encoding, [H*W, d_m]. The first d_m/2 features encode
/// the row index and the rest the column index; within each half, feature
/// pair j holds (sin(p * f_j), cos(p * f_j)) with f_j = 10000^(-2j / (d_m/2)).
Tensor positional_encoding(std::int64_t height, std::int64_t width, std::int64_t model_dim);

/// Projection matrices of one multi-head self-attention unit. Head i uses the
/// column block [i*head_dim, (i+1)*head_dim) of wq / wk / wv.
struct MhsaParams {
  Tensor wq;  // [d_m, heads*head_dim]
  Tensor wk;  // [d_m, heads*head_dim]
  Tensor wv;  // [d_m, heads*head_dim]
  Tensor wo;  // [heads*head_dim, d_m]

  static MhsaParams create(ParameterStore& store, const std::string& name, std::int64_t model_dim,
                           int heads, std::int64_t head_dim, Rng& rng);
};

/// Concat_i(softmax(q Wq_i (k Wk_i)^T / sqrt(head_dim)) v Wv_i) W^O over [N, d_m] sequences.
Tensor mhsa(const Tensor& q, const Tensor& k, const Tensor& v, const MhsaParams& p, int heads,
            std::int64_t head_dim);

struct TransformerLayerParams {
  MhsaParams attention;
  Linear ffn_in;
  Linear ffn_out;

  static TransformerLayerParams create(ParameterStore& store, const std::string& name, const MftConfig& config,
                                       Rng& rng);
};

/// x = t + MHSA(t + pos, t + pos, t); returns x + FFN(x) with FFN = Linear, ReLU, Linear.
Tensor transformer_layer(const Tensor& tokens, const Tensor& pos, const TransformerLayerParams& p,
                         const MftConfig& config);

/// Channel-concatenates the three level-5 maps and flattens them into tokens:
/// [H*W, 3C]. Throws ShapeError when 3C != model_dim.
Tensor aggregate_modalities(const FeatureTriple& t, std::int64_t model_dim);

/// Inverse of the token flattening: [H*W, d] -> [d, H, W].
Tensor tokens_to_map(const Tensor& tokens, std::int64_t height, std::int64_t width);

/// Two stacked 1x1 convolutions producing per-pixel grouped kernels
/// [G, H, W, K, K] from a modality feature map.
class DynamicFilterGenerator {
 public:
  DynamicFilterGenerator() = default;
  DynamicFilterGenerator(std::int64_t in_channels, std::int64_t hidden, std::int64_t groups, int kernel,
                         ParameterStore& store, const std::string& name, Rng& rng);

  Tensor operator()(const Tensor& features) const;

  Conv2d hidden;
  Conv2d out;
  std::int64_t groups = 0;
  int kernel = 0;
};

/// Y[c,h,w] = sum_{u,v} F[c / (C/G), h, w, u + K/2, v + K/2] * X[c, h+u, w+v], zero padded.
Tensor apply_grouped_dynamic_filter(const Tensor& x, const Tensor& filters);

/// The deepest decoder block's fusion: transformer over aggregated tokens,
/// then per modality a 1x1 projection of the fused map filtered by kernels
/// generated from that modality's own input feature, added residually.
class MftBlock : public Level5Fusion {
 public:
  MftBlock(const MftConfig& config, ParameterStore& store, Rng& rng, const std::string& name = "mft");

  FeatureTriple operator()(const FeatureTriple& t) const override;

  /// Transformer output reshaped to a map, [d_m, H, W].
  Tensor fused_map(const FeatureTriple& t) const;
  /// Filters generated for one modality from its input feature.
  Tensor filters(const FeatureTriple& t, Task task) const;

  const MftConfig& config() const { return config_; }
  std::vector<TransformerLayerParams> layers;
  std::array<Conv2d, kNumTasks> projections;
  std::array<DynamicFilterGenerator, kNumTasks> generators;

 private:
  MftConfig config_;
};

}  // namespace mmft
