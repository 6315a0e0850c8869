#include "mmft/sample.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mmft/errors.hpp"
#include "mmft/ops.hpp"

namespace mmft {

namespace {

enum class Interp { Bilinear, Nearest };
enum class Border { Zero, Clamp };

// Resamples every channel of img at source coordinates produced by `map`
// (pixel centres at integer coordinates).
template <typename Map>
Tensor warp(const Tensor& img, Map map, Interp interp, Border border) {
  const auto c = img.dim(0), h = img.dim(1), w = img.dim(2);
  const auto in = img.values();
  std::vector<Real> out(in.size());
  auto fetch = [&](const Real* plane, std::int64_t x, std::int64_t y) -> Real {
    if (x < 0 || x >= w || y < 0 || y >= h) {
      if (border == Border::Zero) return 0.0;
      x = std::clamp<std::int64_t>(x, 0, w - 1);
      y = std::clamp<std::int64_t>(y, 0, h - 1);
    }
    return plane[y * w + x];
  };
  for (std::int64_t y = 0; y < h; ++y) {
    for (std::int64_t x = 0; x < w; ++x) {
      const auto [sx, sy] = map(static_cast<Real>(x), static_cast<Real>(y));
      for (std::int64_t ch = 0; ch < c; ++ch) {
        const Real* plane = in.data() + ch * h * w;
        Real v;
        if (interp == Interp::Nearest) {
          v = fetch(plane, static_cast<std::int64_t>(std::floor(sx + 0.5)),
                    static_cast<std::int64_t>(std::floor(sy + 0.5)));
        } else {
          const Real fx = std::floor(sx), fy = std::floor(sy);
          const Real ax = sx - fx, ay = sy - fy;
          const auto x0 = static_cast<std::int64_t>(fx), y0 = static_cast<std::int64_t>(fy);
          v = (1 - ay) * ((1 - ax) * fetch(plane, x0, y0) + (ax > 0 ? ax * fetch(plane, x0 + 1, y0) : 0.0)) +
              (ay > 0 ? ay * ((1 - ax) * fetch(plane, x0, y0 + 1) +
                              (ax > 0 ? ax * fetch(plane, x0 + 1, y0 + 1) : 0.0))
                      : 0.0);
        }
        out[(ch * h + y) * w + x] = v;
      }
    }
  }
  return Tensor(img.shape(), std::move(out));
}

template <typename Map>
Sample warp_sample(const Sample& s, Map map, Border border, const MorphConfig& morph) {
  Sample out;
  out.id = s.id;
  out.has_depth = s.has_depth;
  out.rgb = warp(s.rgb, map, Interp::Bilinear, border);
  out.depth = warp(s.depth, map, Interp::Bilinear, border);
  out.saliency = warp(s.saliency, map, Interp::Nearest, border);
  out.valid = warp(s.valid, map, Interp::Nearest, border);
  out.contour = contour_from_saliency(out.saliency, morph);
  return out;
}

}  // namespace

void Sample::validate(const MorphConfig& morph) const {
  if (!rgb.defined() || rgb.rank() != 3 || rgb.dim(0) != 3) throw ValidationError(id + ": rgb must be [3,H,W]");
  const Shape map_shape{1, rgb.dim(1), rgb.dim(2)};
  for (const Tensor* t : {&depth, &saliency, &contour, &valid}) {
    if (!t->defined() || t->shape() != map_shape) {
      throw ValidationError(id + ": ground-truth maps must be " + shape_str(map_shape));
    }
  }
  if (!is_binary(saliency) || !is_binary(contour) || !is_binary(valid)) {
    throw ValidationError(id + ": masks must be binary");
  }
  const Tensor expected = contour_from_saliency(saliency, morph);
  if (!std::equal(expected.values().begin(), expected.values().end(), contour.values().begin())) {
    throw ValidationError(id + ": contour is not dilate - erode of saliency");
  }
}

void AugmentConfig::validate() const {
  if (flip_prob < 0 || flip_prob > 1) throw ValidationError("flip_prob must lie in [0,1]");
  if (max_border_crop_frac < 0 || max_border_crop_frac >= 0.5) {
    throw ValidationError("max_border_crop_frac must lie in [0,0.5)");
  }
  if (max_rotate_deg < 0) throw ValidationError("max_rotate_deg must be >= 0");
}

GeometricTransform draw_transform(const AugmentConfig& config, Rng& rng) {
  config.validate();
  std::uniform_real_distribution<Real> unit(0.0, 1.0);
  GeometricTransform t;
  t.flip = unit(rng) < config.flip_prob;
  t.rotate_deg = (2 * unit(rng) - 1) * config.max_rotate_deg;
  t.crop_top = unit(rng) * config.max_border_crop_frac;
  t.crop_bottom = unit(rng) * config.max_border_crop_frac;
  t.crop_left = unit(rng) * config.max_border_crop_frac;
  t.crop_right = unit(rng) * config.max_border_crop_frac;
  return t;
}

Sample apply_transform(const Sample& sample, const GeometricTransform& t, const MorphConfig& morph) {
  Sample s = sample;
  const auto h = static_cast<Real>(sample.height());
  const auto w = static_cast<Real>(sample.width());
  if (t.flip) {
    s = warp_sample(s, [w](Real x, Real y) { return std::pair{w - 1 - x, y}; }, Border::Clamp, morph);
  }
  if (t.rotate_deg != 0) {
    const Real rad = t.rotate_deg * std::numbers::pi / 180.0;
    const Real cs = std::cos(rad), sn = std::sin(rad);
    const Real cx = (w - 1) / 2, cy = (h - 1) / 2;
    s = warp_sample(
        s,
        [=](Real x, Real y) {
          const Real dx = x - cx, dy = y - cy;
          return std::pair{cs * dx + sn * dy + cx, -sn * dx + cs * dy + cy};
        },
        Border::Zero, morph);
  }
  if (t.crop_top > 0 || t.crop_bottom > 0 || t.crop_left > 0 || t.crop_right > 0) {
    const Real y0 = t.crop_top * h, y1 = h - t.crop_bottom * h;
    const Real x0 = t.crop_left * w, x1 = w - t.crop_right * w;
    const Real sy = (y1 - y0) / h, sx = (x1 - x0) / w;
    s = warp_sample(
        s, [=](Real x, Real y) { return std::pair{x0 + (x + 0.5) * sx - 0.5, y0 + (y + 0.5) * sy - 0.5}; },
        Border::Clamp, morph);
  }
  s.contour = contour_from_saliency(s.saliency, morph);
  return s;
}

Sample augment(const Sample& sample, const AugmentConfig& config, Rng& rng, const MorphConfig& morph) {
  return apply_transform(sample, draw_transform(config, rng), morph);
}

Tensor resize_nearest(const Tensor& image, std::int64_t out_h, std::int64_t out_w) {
  if (image.rank() != 3) throw ShapeError("resize_nearest: expects [C,H,W]");
  const auto c = image.dim(0), h = image.dim(1), w = image.dim(2);
  const auto in = image.values();
  std::vector<Real> out(static_cast<std::size_t>(c * out_h * out_w));
  for (std::int64_t ch = 0; ch < c; ++ch) {
    for (std::int64_t y = 0; y < out_h; ++y) {
      const auto sy = std::min<std::int64_t>(h - 1, (y * h * 2 + h) / (out_h * 2));
      for (std::int64_t x = 0; x < out_w; ++x) {
        const auto sx = std::min<std::int64_t>(w - 1, (x * w * 2 + w) / (out_w * 2));
        out[(ch * out_h + y) * out_w + x] = in[(ch * h + sy) * w + sx];
      }
    }
  }
  return Tensor(Shape{c, out_h, out_w}, std::move(out));
}

Sample resize_sample(const Sample& sample, std::int64_t size, const MorphConfig& morph) {
  if (size < 32 || size % 32 != 0) {
    throw ValidationError("input size must be a positive multiple of 32, got " + std::to_string(size));
  }
  if (sample.height() == size && sample.width() == size) return sample;
  NoGradGuard guard;
  Sample s;
  s.id = sample.id;
  s.has_depth = sample.has_depth;
  s.rgb = resize_bilinear(sample.rgb, size, size).detach();
  s.depth = resize_bilinear(sample.depth, size, size).detach();
  s.saliency = resize_nearest(sample.saliency, size, size);
  s.valid = resize_nearest(sample.valid, size, size);
  s.contour = contour_from_saliency(s.saliency, morph);
  return s;
}

Sample generate_synthetic(std::uint64_t seed, std::int64_t height, std::int64_t width, int n_shapes,
                          ShapeKind kind) {
  if (n_shapes < 1) throw ValidationError("generate_synthetic: n_shapes must be >= 1");
  if (height < 8 || width < 8) throw ValidationError("generate_synthetic: map must be at least 8x8");
  Rng rng(seed);
  std::uniform_real_distribution<Real> unit(0.0, 1.0);
  auto uniform = [&](Real lo, Real hi) { return lo + (hi - lo) * unit(rng); };

  const auto pixels = height * width;
  std::vector<Real> rgb(static_cast<std::size_t>(3 * pixels));
  std::vector<Real> depth(static_cast<std::size_t>(pixels));
  std::vector<Real> saliency(static_cast<std::size_t>(pixels), 0.0);

  // Muted background with a vertical colour ramp; the ground recedes upwards.
  Real top[3], bottom[3];
  const Real base_top = uniform(0.25, 0.55), base_bottom = uniform(0.25, 0.55);
  for (int c = 0; c < 3; ++c) {
    top[c] = base_top + uniform(-0.06, 0.06);
    bottom[c] = base_bottom + uniform(-0.06, 0.06);
  }
  for (std::int64_t y = 0; y < height; ++y) {
    const Real t = static_cast<Real>(y) / static_cast<Real>(height - 1);
    for (std::int64_t x = 0; x < width; ++x) {
      for (int c = 0; c < 3; ++c) rgb[c * pixels + y * width + x] = (1 - t) * top[c] + t * bottom[c];
      depth[y * width + x] = 0.05 + 0.25 * t;
    }
  }

  const int n_fg = n_shapes == 1 ? 1 : 1 + static_cast<int>(rng() % static_cast<std::uint64_t>((n_shapes + 1) / 2));
  const int n_bg = n_shapes - n_fg;
  std::vector<Real> fg_depths(static_cast<std::size_t>(n_fg));
  for (auto& d : fg_depths) d = uniform(0.6, 1.0);
  std::sort(fg_depths.begin(), fg_depths.end());

  const Real short_side = static_cast<Real>(std::min(height, width));
  for (int i = 0; i < n_shapes; ++i) {
    const bool foreground = i >= n_bg;
    const bool disk = kind == ShapeKind::Disk || (kind == ShapeKind::Mixed && unit(rng) < 0.5);
    Real colour[3];
    if (foreground) {
      const int hot = static_cast<int>(rng() % 3);
      for (int c = 0; c < 3; ++c) colour[c] = uniform(0.0, 0.35);
      colour[hot] = uniform(0.85, 1.0);
    } else {
      const Real g = uniform(0.3, 0.6);
      for (int c = 0; c < 3; ++c) colour[c] = g + uniform(-0.08, 0.08);
    }
    const Real layer_depth = foreground ? fg_depths[static_cast<std::size_t>(i - n_bg)] : uniform(0.35, 0.55);

    Real cx, cy, rx, ry;
    if (disk) {
      rx = ry = uniform(0.1, 0.22) * short_side;
    } else {
      rx = uniform(0.1, 0.25) * static_cast<Real>(width);
      ry = uniform(0.1, 0.25) * static_cast<Real>(height);
    }
    cx = uniform(rx, static_cast<Real>(width) - rx);
    cy = uniform(ry, static_cast<Real>(height) - ry);
    for (std::int64_t y = 0; y < height; ++y) {
      for (std::int64_t x = 0; x < width; ++x) {
        const Real px = static_cast<Real>(x) + 0.5 - cx, py = static_cast<Real>(y) + 0.5 - cy;
        const bool inside = disk ? px * px + py * py <= rx * rx : std::abs(px) <= rx && std::abs(py) <= ry;
        if (!inside) continue;
        const auto p = y * width + x;
        for (int c = 0; c < 3; ++c) rgb[c * pixels + p] = colour[c];
        depth[p] = layer_depth;
        if (foreground) saliency[p] = 1.0;
      }
    }
  }
  for (auto& v : rgb) v = std::clamp(v + uniform(-0.03, 0.03), 0.0, 1.0);

  const auto [lo, hi] = std::minmax_element(depth.begin(), depth.end());
  const Real dmin = *lo, span = *hi - *lo;
  for (auto& d : depth) d = span > 0 ? (d - dmin) / span : 0.0;

  Sample s;
  s.id = "synthetic_" + std::to_string(seed);
  s.rgb = Tensor(Shape{3, height, width}, std::move(rgb));
  s.depth = Tensor(Shape{1, height, width}, std::move(depth));
  s.saliency = Tensor(Shape{1, height, width}, std::move(saliency));
  s.valid = Tensor(Shape{1, height, width}, 1.0);
  s.contour = contour_from_saliency(s.saliency);
  return s;
}

}  // namespace mmft
