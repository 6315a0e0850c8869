#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mmft/tensor.hpp"

namespace mmft {

/// Named scalar results. Keys used: f_max, f_weighted, s_measure, e_measure,
/// mae, auc, rmse, rmse_log, abs_rel, sq_rel, p1, p2, p3.
struct MetricReport {
  std::map<std::string, Real> values;

  void set(const std::string& key, Real v) { values[key] = v; }
  std::optional<Real> get(const std::string& key) const;
  void merge(const MetricReport& other);
};

/// Saliency metrics operate on [1,H,W] (or any equal-shaped) maps, pred in
/// [0,1] and gt in {0,1}. Threshold sweeps binarize with pred >= k/255 for
/// k = 0..255.
Real mae(const Tensor& pred, const Tensor& gt);

/// max over thresholds of (1 + b2) P R / (b2 P + R). Precision is 1 when nothing
/// is predicted positive. Throws ValidationError when gt has no foreground.
Real f_beta_max(const Tensor& pred, const Tensor& gt, Real beta2 = 0.3);

/// Weighted F-measure with beta^2 = 1, a 7x7 sigma-5 Gaussian dependency
/// kernel (zero padded) and the 2 - exp(ln(0.5) / 5 * dist) background
/// importance. Throws ValidationError when gt has no foreground.
Real weighted_f(const Tensor& pred, const Tensor& gt);

/// Structure measure: alpha * object score + (1 - alpha) * region score.
Real s_measure(const Tensor& pred, const Tensor& gt, Real alpha = 0.5);

/// Enhanced-alignment score of one binary map.
Real e_measure_binary(std::span<const Real> fm, std::span<const Real> gt);
/// Max of the enhanced-alignment score over the 256 binarizations.
Real e_measure(const Tensor& pred, const Tensor& gt);

/// Trapezoidal ROC area over the 256-threshold curve plus the (0,0) corner.
/// Throws ValidationError when gt has only one class.
Real auc(const Tensor& pred, const Tensor& gt);

/// All saliency metrics for one prediction.
MetricReport saliency_metrics(const Tensor& pred, const Tensor& gt);

/// Depth errors over pixels with valid > 0.5; pred and gt are floored at eps.
MetricReport depth_metrics(const Tensor& pred, const Tensor& gt, const Tensor& valid, Real eps = 1e-6);

/// Shared by the weighted F-measure: squared distance to, and row-major index
/// of, the nearest foreground pixel (smallest index on ties).
struct NearestForeground {
  std::vector<Real> dist;
  std::vector<std::int64_t> index;
};
NearestForeground nearest_foreground(std::span<const Real> mask, std::int64_t h, std::int64_t w);

}  // namespace mmft
