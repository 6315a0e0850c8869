#pragma once

#include "mmft/tensor.hpp"

namespace mmft {

enum class MorphMode { Dilate, Erode };

/// Structuring element: an m x m block of ones.
struct MorphConfig {
  int m = 3;
  void validate() const;
};

/// Binary dilation / erosion of a [1,H,W] {0,1} mask with zero padding outside
/// the map. Throws ValidationError on non-binary input or even/non-positive m.
Tensor morph(const Tensor& mask, int m, MorphMode mode);

/// Salient contour ground truth: dilate(g_s) - erode(g_s).
Tensor contour_from_saliency(const Tensor& saliency, const MorphConfig& config = {});

bool is_binary(const Tensor& t);

}  // namespace mmft
