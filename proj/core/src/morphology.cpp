#include "mmft/morphology.hpp"

#include <algorithm>
#include <string>

#include "mmft/errors.hpp"

namespace mmft {

void MorphConfig::validate() const {
  if (m < 1 || m % 2 == 0) {
    throw ValidationError("structuring element size must be odd and >= 1, got " + std::to_string(m));
  }
}

bool is_binary(const Tensor& t) {
  return std::all_of(t.values().begin(), t.values().end(), [](Real v) { return v == 0.0 || v == 1.0; });
}

Tensor morph(const Tensor& mask, int m, MorphMode mode) {
  MorphConfig{m}.validate();
  if (mask.rank() != 3 || mask.dim(0) != 1) {
    throw ShapeError("morph: expects a [1,H,W] mask, got " + shape_str(mask.shape()));
  }
  if (!is_binary(mask)) throw ValidationError("morph: mask is not binary");
  const auto h = mask.dim(1), w = mask.dim(2);
  const std::int64_t r = m / 2;
  const bool dilate = mode == MorphMode::Dilate;
  const auto in = mask.values();

  // The square element is separable: a row pass followed by a column pass.
  // Out-of-range taps read 0, which never raises a max and always drops a min.
  std::vector<Real> rows(in.size());
  for (std::int64_t y = 0; y < h; ++y) {
    for (std::int64_t x = 0; x < w; ++x) {
      Real acc = dilate ? 0.0 : 1.0;
      for (std::int64_t dx = -r; dx <= r; ++dx) {
        const std::int64_t ix = x + dx;
        const Real v = (ix >= 0 && ix < w) ? in[y * w + ix] : 0.0;
        acc = dilate ? std::max(acc, v) : std::min(acc, v);
      }
      rows[y * w + x] = acc;
    }
  }
  std::vector<Real> out(in.size());
  for (std::int64_t y = 0; y < h; ++y) {
    for (std::int64_t x = 0; x < w; ++x) {
      Real acc = dilate ? 0.0 : 1.0;
      for (std::int64_t dy = -r; dy <= r; ++dy) {
        const std::int64_t iy = y + dy;
        const Real v = (iy >= 0 && iy < h) ? rows[iy * w + x] : 0.0;
        acc = dilate ? std::max(acc, v) : std::min(acc, v);
      }
      out[y * w + x] = acc;
    }
  }
  return Tensor(mask.shape(), std::move(out));
}

Tensor contour_from_saliency(const Tensor& saliency, const MorphConfig& config) {
  config.validate();
  const Tensor dilated = morph(saliency, config.m, MorphMode::Dilate);
  const Tensor eroded = morph(saliency, config.m, MorphMode::Erode);
  std::vector<Real> out(dilated.values().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = dilated.values()[i] - eroded.values()[i];
  return Tensor(saliency.shape(), std::move(out));
}

}  // namespace mmft
