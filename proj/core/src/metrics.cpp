#include "mmft/metrics.hpp"

#include <algorithm>
#include <array>
#include <cfloat>
#include <cmath>
#include <limits>

#include "mmft/errors.hpp"

namespace mmft {

std::optional<Real> MetricReport::get(const std::string& key) const {
  const auto it = values.find(key);
  if (it == values.end()) return std::nullopt;
  return it->second;
}

void MetricReport::merge(const MetricReport& other) {
  for (const auto& [k, v] : other.values) values[k] = v;
}

namespace {

constexpr int kThresholds = 256;
constexpr Real kEps = DBL_EPSILON;

void check_pair(const Tensor& pred, const Tensor& gt, const char* what) {
  if (pred.shape() != gt.shape()) {
    throw ShapeError(std::string(what) + ": prediction " + shape_str(pred.shape()) + " vs ground truth " +
                     shape_str(gt.shape()));
  }
  if (pred.rank() < 2) throw ShapeError(std::string(what) + ": expected a 2-D map");
}

std::int64_t map_height(const Tensor& t) { return t.dim(-2); }
std::int64_t map_width(const Tensor& t) { return t.dim(-1); }

/// Number of thresholds a value passes minus one: the largest k with v >= k/255.
int level_of(Real v) {
  int k = static_cast<int>(std::floor(v * 255.0));
  k = std::clamp(k, 0, 255);
  while (k < 255 && v >= (k + 1) / 255.0) ++k;
  while (k > 0 && v < k / 255.0) --k;
  return k;
}

/// Per-threshold counts of predicted positives among foreground and background.
struct SweepCounts {
  std::array<Real, kThresholds> tp{};
  std::array<Real, kThresholds> fp{};
  Real positives = 0;
  Real negatives = 0;
};

SweepCounts sweep(const Tensor& pred, const Tensor& gt) {
  std::array<Real, kThresholds> hist_fg{}, hist_bg{};
  SweepCounts s;
  const auto& p = pred.values();
  const auto& g = gt.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const int k = level_of(p[i]);
    if (g[i] > 0.5) {
      hist_fg[k] += 1;
      s.positives += 1;
    } else {
      hist_bg[k] += 1;
      s.negatives += 1;
    }
  }
  Real tp = 0, fp = 0;
  for (int k = kThresholds - 1; k >= 0; --k) {
    tp += hist_fg[k];
    fp += hist_bg[k];
    s.tp[k] = tp;
    s.fp[k] = fp;
  }
  return s;
}

Real sample_std(const std::vector<Real>& v) {
  if (v.size() <= 1) return 0;
  Real m = 0;
  for (Real x : v) m += x;
  m /= static_cast<Real>(v.size());
  Real acc = 0;
  for (Real x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<Real>(v.size() - 1));
}

Real object_score(const std::vector<Real>& values) {
  if (values.empty()) return 0;
  Real x = 0;
  for (Real v : values) x += v;
  x /= static_cast<Real>(values.size());
  return 2.0 * x / (x * x + 1.0 + sample_std(values) + kEps);
}

/// Structural similarity of one quadrant, computed over the whole block.
Real block_ssim(const std::vector<Real>& p, const std::vector<Real>& g) {
  const auto n = static_cast<Real>(p.size());
  if (p.empty()) return 0;
  Real x = 0, y = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    x += p[i];
    y += g[i];
  }
  x /= n;
  y /= n;
  Real sx = 0, sy = 0, sxy = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    sx += (p[i] - x) * (p[i] - x);
    sy += (g[i] - y) * (g[i] - y);
    sxy += (p[i] - x) * (g[i] - y);
  }
  sx /= (n - 1 + kEps);
  sy /= (n - 1 + kEps);
  sxy /= (n - 1 + kEps);
  const Real a = 4 * x * y * sxy;
  const Real b = (x * x + y * y) * (sx + sy);
  if (a != 0) return a / (b + kEps);
  if (b == 0) return 1;
  return 0;
}

}  // namespace

Real mae(const Tensor& pred, const Tensor& gt) {
  check_pair(pred, gt, "mae");
  Real acc = 0;
  const auto& p = pred.values();
  const auto& g = gt.values();
  for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - g[i]);
  return acc / static_cast<Real>(p.size());
}

Real f_beta_max(const Tensor& pred, const Tensor& gt, Real beta2) {
  check_pair(pred, gt, "f_beta_max");
  const SweepCounts s = sweep(pred, gt);
  if (s.positives == 0) throw ValidationError("f_beta_max: ground truth has no foreground");
  Real best = 0;
  for (int k = 0; k < kThresholds; ++k) {
    const Real predicted = s.tp[k] + s.fp[k];
    const Real precision = predicted > 0 ? s.tp[k] / predicted : 1.0;
    const Real recall = s.tp[k] / s.positives;
    const Real den = beta2 * precision + recall;
    const Real f = den > 0 ? (1 + beta2) * precision * recall / den : 0.0;
    best = std::max(best, f);
  }
  return best;
}

NearestForeground nearest_foreground(std::span<const Real> mask, std::int64_t h, std::int64_t w) {
  constexpr std::int64_t kNone = -1;
  // For every (row, column): nearest foreground row in that column, preferring the upper one on ties.
  std::vector<std::int64_t> up(static_cast<std::size_t>(h * w), kNone), down(static_cast<std::size_t>(h * w), kNone);
  for (std::int64_t x = 0; x < w; ++x) {
    std::int64_t last = kNone;
    for (std::int64_t y = 0; y < h; ++y) {
      if (mask[y * w + x] > 0.5) last = y;
      up[y * w + x] = last;
    }
    last = kNone;
    for (std::int64_t y = h - 1; y >= 0; --y) {
      if (mask[y * w + x] > 0.5) last = y;
      down[y * w + x] = last;
    }
  }
  NearestForeground out;
  out.dist.assign(static_cast<std::size_t>(h * w), std::numeric_limits<Real>::infinity());
  out.index.assign(static_cast<std::size_t>(h * w), kNone);
  for (std::int64_t y = 0; y < h; ++y) {
    for (std::int64_t x = 0; x < w; ++x) {
      Real best = std::numeric_limits<Real>::infinity();
      std::int64_t best_idx = kNone;
      for (std::int64_t c = 0; c < w; ++c) {
        const Real dx2 = static_cast<Real>((c - x) * (c - x));
        if (dx2 > best) continue;
        std::int64_t row = kNone;
        const std::int64_t u = up[y * w + c], d = down[y * w + c];
        if (u != kNone && (d == kNone || y - u <= d - y)) row = u;
        else row = d;
        if (row == kNone) continue;
        const Real d2 = dx2 + static_cast<Real>((row - y) * (row - y));
        const std::int64_t idx = row * w + c;
        if (d2 < best || (d2 == best && idx < best_idx)) {
          best = d2;
          best_idx = idx;
        }
      }
      out.dist[y * w + x] = best;
      out.index[y * w + x] = best_idx;
    }
  }
  return out;
}

Real weighted_f(const Tensor& pred, const Tensor& gt) {
  check_pair(pred, gt, "weighted_f");
  const std::int64_t h = map_height(gt), w = map_width(gt);
  const auto& p = pred.values();
  const auto& g = gt.values();
  const auto n = static_cast<std::size_t>(h * w);
  std::vector<bool> fg(n);
  std::size_t fg_count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    fg[i] = g[i] > 0.5;
    fg_count += fg[i];
  }
  if (fg_count == 0) throw ValidationError("weighted_f: ground truth has no foreground");

  std::vector<Real> err(n);
  for (std::size_t i = 0; i < n; ++i) err[i] = std::abs(p[i] - (fg[i] ? 1.0 : 0.0));
  const NearestForeground nf = nearest_foreground(g, h, w);
  std::vector<Real> et = err;
  for (std::size_t i = 0; i < n; ++i) {
    if (!fg[i]) et[i] = err[static_cast<std::size_t>(nf.index[i])];
  }

  constexpr int kSize = 7;
  constexpr Real kSigma = 5.0;
  std::array<Real, kSize * kSize> kern{};
  Real ksum = 0;
  for (int u = 0; u < kSize; ++u) {
    for (int v = 0; v < kSize; ++v) {
      const Real du = u - kSize / 2, dv = v - kSize / 2;
      kern[u * kSize + v] = std::exp(-(du * du + dv * dv) / (2 * kSigma * kSigma));
      ksum += kern[u * kSize + v];
    }
  }
  for (auto& k : kern) k /= ksum;

  Real ew_fg = 0, ew_bg = 0;
  for (std::int64_t y = 0; y < h; ++y) {
    for (std::int64_t x = 0; x < w; ++x) {
      const auto i = static_cast<std::size_t>(y * w + x);
      Real e = err[i];
      if (fg[i]) {
        Real ea = 0;
        for (int u = 0; u < kSize; ++u) {
          const std::int64_t yy = y + u - kSize / 2;
          if (yy < 0 || yy >= h) continue;
          for (int v = 0; v < kSize; ++v) {
            const std::int64_t xx = x + v - kSize / 2;
            if (xx < 0 || xx >= w) continue;
            ea += kern[u * kSize + v] * et[static_cast<std::size_t>(yy * w + xx)];
          }
        }
        if (ea < e) e = ea;
        ew_fg += e;
      } else {
        const Real importance = 2.0 - std::exp(std::log(0.5) / 5.0 * std::sqrt(nf.dist[i]));
        ew_bg += e * importance;
      }
    }
  }
  const Real tpw = static_cast<Real>(fg_count) - ew_fg;
  const Real recall = 1.0 - ew_fg / static_cast<Real>(fg_count);
  const Real precision = tpw / (kEps + tpw + ew_bg);
  return 2.0 * recall * precision / (kEps + recall + precision);
}

Real s_measure(const Tensor& pred, const Tensor& gt, Real alpha) {
  check_pair(pred, gt, "s_measure");
  const std::int64_t h = map_height(gt), w = map_width(gt);
  const auto& p = pred.values();
  const auto& g = gt.values();
  const auto n = static_cast<std::size_t>(h * w);
  Real gmean = 0, pmean = 0;
  for (std::size_t i = 0; i < n; ++i) {
    gmean += g[i] > 0.5 ? 1.0 : 0.0;
    pmean += p[i];
  }
  gmean /= static_cast<Real>(n);
  pmean /= static_cast<Real>(n);
  if (gmean == 0) return 1.0 - pmean;
  if (gmean == 1) return pmean;

  std::vector<Real> fg_vals, bg_vals;
  for (std::size_t i = 0; i < n; ++i) {
    if (g[i] > 0.5) fg_vals.push_back(p[i]);
    else bg_vals.push_back(1.0 - p[i]);
  }
  const Real object = gmean * object_score(fg_vals) + (1 - gmean) * object_score(bg_vals);

  // Centroid in 1-based coordinates; the first block spans rows 1..cy and columns 1..cx.
  Real sx = 0, sy = 0, area = 0;
  for (std::int64_t y = 0; y < h; ++y) {
    for (std::int64_t x = 0; x < w; ++x) {
      if (g[y * w + x] > 0.5) {
        sx += static_cast<Real>(x + 1);
        sy += static_cast<Real>(y + 1);
        area += 1;
      }
    }
  }
  const auto cx = static_cast<std::int64_t>(std::round(sx / area));
  const auto cy = static_cast<std::int64_t>(std::round(sy / area));
  const std::array<std::int64_t, 4> y0{0, 0, cy, cy}, y1{cy, cy, h, h};
  const std::array<std::int64_t, 4> x0{0, cx, 0, cx}, x1{cx, w, cx, w};
  Real region = 0;
  for (int q = 0; q < 4; ++q) {
    std::vector<Real> pq, gq;
    for (std::int64_t y = y0[q]; y < y1[q]; ++y) {
      for (std::int64_t x = x0[q]; x < x1[q]; ++x) {
        pq.push_back(p[y * w + x]);
        gq.push_back(g[y * w + x] > 0.5 ? 1.0 : 0.0);
      }
    }
    const Real weight = static_cast<Real>(pq.size()) / static_cast<Real>(n);
    region += weight * block_ssim(pq, gq);
  }
  return std::max(0.0, alpha * object + (1 - alpha) * region);
}

Real e_measure_binary(std::span<const Real> fm, std::span<const Real> gt) {
  if (fm.size() != gt.size() || fm.empty()) throw ShapeError("e_measure: map sizes differ");
  const auto n = static_cast<Real>(fm.size());
  Real gsum = 0, fsum = 0;
  for (std::size_t i = 0; i < fm.size(); ++i) {
    gsum += gt[i];
    fsum += fm[i];
  }
  Real total = 0;
  if (gsum == 0) {
    for (Real f : fm) total += 1.0 - f;
  } else if (gsum == n) {
    total = fsum;
  } else {
    const Real mf = fsum / n, mg = gsum / n;
    for (std::size_t i = 0; i < fm.size(); ++i) {
      const Real a = fm[i] - mf, b = gt[i] - mg;
      const Real align = 2 * a * b / (a * a + b * b + kEps);
      total += (align + 1) * (align + 1) / 4;
    }
  }
  return total / n;
}

Real e_measure(const Tensor& pred, const Tensor& gt) {
  check_pair(pred, gt, "e_measure");
  const auto& p = pred.values();
  std::vector<Real> g(gt.values().size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = gt.values()[i] > 0.5 ? 1.0 : 0.0;
  std::vector<int> level(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) level[i] = level_of(p[i]);
  std::vector<Real> fm(p.size());
  Real best = 0;
  for (int k = 0; k < kThresholds; ++k) {
    for (std::size_t i = 0; i < p.size(); ++i) fm[i] = level[i] >= k ? 1.0 : 0.0;
    best = std::max(best, e_measure_binary(fm, g));
  }
  return best;
}

Real auc(const Tensor& pred, const Tensor& gt) {
  check_pair(pred, gt, "auc");
  const SweepCounts s = sweep(pred, gt);
  if (s.positives == 0 || s.negatives == 0) throw ValidationError("auc: ground truth must contain both classes");
  // Walk thresholds from strict (only the (0,0) corner) to lenient (k = 0 accepts everything).
  Real area = 0, prev_tpr = 0, prev_fpr = 0;
  for (int k = kThresholds - 1; k >= 0; --k) {
    const Real tpr = s.tp[k] / s.positives, fpr = s.fp[k] / s.negatives;
    area += (fpr - prev_fpr) * (tpr + prev_tpr) / 2;
    prev_tpr = tpr;
    prev_fpr = fpr;
  }
  return area;
}

MetricReport saliency_metrics(const Tensor& pred, const Tensor& gt) {
  MetricReport r;
  r.set("mae", mae(pred, gt));
  r.set("f_max", f_beta_max(pred, gt));
  r.set("f_weighted", weighted_f(pred, gt));
  r.set("s_measure", s_measure(pred, gt));
  r.set("e_measure", e_measure(pred, gt));
  r.set("auc", auc(pred, gt));
  return r;
}

MetricReport depth_metrics(const Tensor& pred, const Tensor& gt, const Tensor& valid, Real eps) {
  check_pair(pred, gt, "depth_metrics");
  if (valid.shape() != gt.shape()) throw ShapeError("depth_metrics: valid mask shape differs");
  Real n = 0, se = 0, sle = 0, abs_rel = 0, sq_rel = 0;
  std::array<Real, 3> hits{};
  for (std::size_t i = 0; i < gt.values().size(); ++i) {
    if (valid.values()[i] <= 0.5) continue;
    const Real p = std::max(pred.values()[i], eps), g = std::max(gt.values()[i], eps);
    const Real d = p - g;
    n += 1;
    se += d * d;
    const Real dl = std::log(p) - std::log(g);
    sle += dl * dl;
    abs_rel += std::abs(d) / g;
    sq_rel += d * d / g;
    const Real ratio = std::max(p / g, g / p);
    Real bound = 1.25;
    for (auto& hit : hits) {
      if (ratio < bound) hit += 1;
      bound *= 1.25;
    }
  }
  if (n == 0) throw ValidationError("depth_metrics: no valid pixels");
  MetricReport r;
  r.set("rmse", std::sqrt(se / n));
  r.set("rmse_log", std::sqrt(sle / n));
  r.set("abs_rel", abs_rel / n);
  r.set("sq_rel", sq_rel / n);
  r.set("p1", hits[0] / n);
  r.set("p2", hits[1] / n);
  r.set("p3", hits[2] / n);
  return r;
}

}  // namespace mmft
