#pragma once

#include <array>
#include <cstdint>

#include "mmft/features.hpp"
#include "mmft/sample.hpp"
#include "mmft/tensor.hpp"

namespace mmft {

struct LossConfig {
  int levels = 5;
  int ssim_window = 11;
  Real ssim_sigma = 1.5;
  Real ssim_c1 = 0.01 * 0.01;
  Real ssim_c2 = 0.03 * 0.03;
  int weight_pool_k = 31;
  Real weight_gain = 5.0;
  /// Probability clamp used by every BCE term.
  Real bce_eps = 1e-7;

  void validate() const;
};

using LevelMaps = std::array<Tensor, kNumLevels>;

/// 1 - mean SSIM over all fully covered windows (no padding) of [1,H,W] maps.
Tensor ssim_loss(const Tensor& pred, const Tensor& gt, const LossConfig& config = {});

/// Mean |pred - gt| over valid pixels plus ssim_loss(pred * valid, gt * valid).
Tensor depth_level_loss(const Tensor& pred, const Tensor& gt, const Tensor& valid, const LossConfig& config = {});
Tensor depth_loss(const LevelMaps& preds, const Tensor& gt, const Tensor& valid, const LossConfig& config = {});

/// 1 + gain * |avgpool(gt, k, 1, k/2) - gt|. Not differentiated.
Tensor weight_map(const Tensor& gt, const LossConfig& config = {});

/// Element-wise BCE with the prediction clamped to [eps, 1 - eps].
Tensor bce_map(const Tensor& pred, const Tensor& gt, Real eps);

/// sum(w * bce) / sum(w).
Tensor weighted_bce(const Tensor& pred, const Tensor& gt, const Tensor& w, Real eps);
/// 1 - sum(w p g) / sum(w (p + g - p g)).
Tensor weighted_iou(const Tensor& pred, const Tensor& gt, const Tensor& w);

Tensor saliency_level_loss(const Tensor& pred, const Tensor& gt, const Tensor& w, const LossConfig& config = {});
Tensor saliency_loss(const LevelMaps& preds, const Tensor& gt, const LossConfig& config = {});

Tensor contour_level_loss(const Tensor& pred, const Tensor& gt, const LossConfig& config = {});
Tensor contour_loss(const LevelMaps& preds, const Tensor& gt, const LossConfig& config = {});

struct LossReport {
  /// Differentiable total; backward() on it trains the model.
  Tensor total;
  Real depth = 0;
  Real saliency = 0;
  Real contour = 0;
  Real total_value = 0;
  /// per_level[level][task]
  std::array<std::array<Real, kNumTasks>, kNumLevels> per_level{};
};

/// Gathers the per-level maps of one task.
LevelMaps task_maps(const SideOutputs& side, Task task);

/// L = L_d + L_s + L_c. Samples without depth contribute L_d = 0.
LossReport total_loss(const SideOutputs& side, const Sample& sample, const LossConfig& config = {});

}  // namespace mmft
