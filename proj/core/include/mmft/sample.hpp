#pragma once

#include <cstdint>
#include <string>

#include "mmft/layers.hpp"
#include "mmft/morphology.hpp"
#include "mmft/tensor.hpp"

namespace mmft {

/// One aligned training/evaluation example.
///
/// rgb is [3,H,W] in [0,1]; depth, saliency, contour and valid are [1,H,W].
/// Depth is nearer-is-larger, min-max normalized over valid pixels. saliency,
/// contour and valid are {0,1}. A sample loaded without a depth file has
/// has_depth == false and an all-zero valid mask.
struct Sample {
  std::string id;
  Tensor rgb;
  Tensor depth;
  Tensor saliency;
  Tensor contour;
  Tensor valid;
  bool has_depth = true;

  std::int64_t height() const { return rgb.dim(1); }
  std::int64_t width() const { return rgb.dim(2); }
  /// Throws ValidationError if shapes disagree, masks are not binary, or the
  /// contour is not dilate - erode of the saliency mask.
  void validate(const MorphConfig& morph = {}) const;
};

struct AugmentConfig {
  Real flip_prob = 0.5;
  Real max_rotate_deg = 15.0;
  Real max_border_crop_frac = 0.1;
  std::uint64_t seed = 0;
  void validate() const;
};

/// Concrete geometric transform applied identically to every map of a sample.
/// Crop fractions are removed from each border before resizing back.
struct GeometricTransform {
  bool flip = false;
  Real rotate_deg = 0;
  Real crop_top = 0, crop_bottom = 0, crop_left = 0, crop_right = 0;
};

GeometricTransform draw_transform(const AugmentConfig& config, Rng& rng);

/// Bilinear for rgb/depth, nearest for masks; contour recomputed afterwards.
Sample apply_transform(const Sample& sample, const GeometricTransform& transform,
                       const MorphConfig& morph = {});

Sample augment(const Sample& sample, const AugmentConfig& config, Rng& rng,
               const MorphConfig& morph = {});

/// Resizes every map to size x size. size must be a positive multiple of 32.
Sample resize_sample(const Sample& sample, std::int64_t size, const MorphConfig& morph = {});

/// Non-differentiable nearest-neighbour resize of [C,H,W].
Tensor resize_nearest(const Tensor& image, std::int64_t out_h, std::int64_t out_w);

enum class ShapeKind { Mixed, Disk, Rect };

/// Layered synthetic scene: a smooth background plus n_shapes random disks or
/// rectangles at constant per-layer depth. The nearest layers are the salient
/// foreground. Deterministic per seed.
Sample generate_synthetic(std::uint64_t seed, std::int64_t height, std::int64_t width, int n_shapes,
                          ShapeKind kind = ShapeKind::Mixed);

}  // namespace mmft
