#include "mmft/losses.hpp"

#include <cmath>
#include <vector>

#include "mmft/errors.hpp"
#include "mmft/ops.hpp"

namespace mmft {

void LossConfig::validate() const {
  if (levels != static_cast<int>(kNumLevels)) throw ValidationError("loss: levels must equal the decoder depth (5)");
  if (ssim_window < 1 || ssim_window % 2 == 0) throw ValidationError("loss: ssim window must be odd");
  if (ssim_sigma <= 0 || ssim_c1 <= 0 || ssim_c2 <= 0) throw ValidationError("loss: ssim constants must be positive");
  if (weight_pool_k < 1 || weight_pool_k % 2 == 0) throw ValidationError("loss: weight pool size must be odd");
  if (weight_gain < 0) throw ValidationError("loss: weight gain must be non-negative");
  if (bce_eps <= 0 || bce_eps >= 0.5) throw ValidationError("loss: bce eps must lie in (0, 0.5)");
}

namespace {

void require_map(const Tensor& t, const Shape& shape, const char* what) {
  if (t.rank() != 3 || t.dim(0) != 1) throw ShapeError(std::string(what) + ": expected [1,H,W], got " + shape_str(t.shape()));
  if (!shape.empty() && t.shape() != shape) {
    throw ShapeError(std::string(what) + ": shape " + shape_str(t.shape()) + " != " + shape_str(shape));
  }
}

std::vector<Real> gaussian_taps(int size, Real sigma) {
  std::vector<Real> k(static_cast<std::size_t>(size));
  Real total = 0;
  for (int i = 0; i < size; ++i) {
    const Real d = i - size / 2;
    k[i] = std::exp(-d * d / (2 * sigma * sigma));
    total += k[i];
  }
  for (auto& v : k) v /= total;
  return k;
}

}  // namespace

Tensor ssim_loss(const Tensor& pred, const Tensor& gt, const LossConfig& config) {
  require_map(pred, {}, "ssim_loss");
  require_map(gt, pred.shape(), "ssim_loss");
  if (pred.dim(1) < config.ssim_window || pred.dim(2) < config.ssim_window) {
    throw ValidationError("ssim_loss: map " + shape_str(pred.shape()) + " smaller than the " +
                          std::to_string(config.ssim_window) + "-tap window");
  }
  const auto k = gaussian_taps(config.ssim_window, config.ssim_sigma);
  const auto filt = [&](const Tensor& t) { return separable_filter_valid(t, k); };
  const Tensor mx = filt(pred), my = filt(gt);
  const Tensor mxx = mul(mx, mx), myy = mul(my, my), mxy = mul(mx, my);
  const Tensor vx = sub(filt(mul(pred, pred)), mxx);
  const Tensor vy = sub(filt(mul(gt, gt)), myy);
  const Tensor cxy = sub(filt(mul(pred, gt)), mxy);
  const Tensor num = mul(add_scalar(scale(mxy, 2), config.ssim_c1), add_scalar(scale(cxy, 2), config.ssim_c2));
  const Tensor den = mul(add_scalar(add(mxx, myy), config.ssim_c1), add_scalar(add(vx, vy), config.ssim_c2));
  return rsub_scalar(1.0, mean(div(num, den)));
}

Tensor depth_level_loss(const Tensor& pred, const Tensor& gt, const Tensor& valid, const LossConfig& config) {
  require_map(pred, {}, "depth_loss");
  require_map(gt, pred.shape(), "depth_loss");
  require_map(valid, pred.shape(), "depth_loss");
  Real count = 0;
  for (Real v : valid.values()) count += v;
  if (count <= 0) throw ValidationError("depth_loss: valid mask is empty");
  const Tensor l1 = scale(sum(mul(abs(sub(pred, gt)), valid)), 1.0 / count);
  return add(l1, ssim_loss(mul(pred, valid), mul(gt, valid), config));
}

Tensor depth_loss(const LevelMaps& preds, const Tensor& gt, const Tensor& valid, const LossConfig& config) {
  Tensor total = depth_level_loss(preds[0], gt, valid, config);
  for (std::size_t l = 1; l < preds.size(); ++l) total = add(total, depth_level_loss(preds[l], gt, valid, config));
  return total;
}

Tensor weight_map(const Tensor& gt, const LossConfig& config) {
  require_map(gt, {}, "weight_map");
  NoGradGuard guard;
  const int k = config.weight_pool_k;
  const Tensor pooled = avgpool(gt.detach(), k, 1, k / 2);
  return add_scalar(scale(abs(sub(pooled, gt.detach())), config.weight_gain), 1.0);
}

Tensor bce_map(const Tensor& pred, const Tensor& gt, Real eps) {
  const Tensor p = clamp(pred, eps, 1.0 - eps);
  return neg(add(mul(gt, log(p)), mul(rsub_scalar(1.0, gt), log(rsub_scalar(1.0, p)))));
}

Tensor weighted_bce(const Tensor& pred, const Tensor& gt, const Tensor& w, Real eps) {
  require_map(pred, {}, "weighted_bce");
  require_map(gt, pred.shape(), "weighted_bce");
  require_map(w, pred.shape(), "weighted_bce");
  Real wsum = 0;
  for (Real v : w.values()) wsum += v;
  return scale(sum(mul(w, bce_map(pred, gt, eps))), 1.0 / wsum);
}

Tensor weighted_iou(const Tensor& pred, const Tensor& gt, const Tensor& w) {
  require_map(pred, {}, "weighted_iou");
  require_map(gt, pred.shape(), "weighted_iou");
  require_map(w, pred.shape(), "weighted_iou");
  // The tiny offset only matters when prediction and ground truth are both empty.
  constexpr Real kEps = 1e-12;
  const Tensor pg = mul(pred, gt);
  const Tensor inter = add_scalar(sum(mul(w, pg)), kEps);
  const Tensor uni = add_scalar(sum(mul(w, sub(add(pred, gt), pg))), kEps);
  return rsub_scalar(1.0, div(inter, uni));
}

Tensor saliency_level_loss(const Tensor& pred, const Tensor& gt, const Tensor& w, const LossConfig& config) {
  return add(weighted_bce(pred, gt, w, config.bce_eps), weighted_iou(pred, gt, w));
}

Tensor saliency_loss(const LevelMaps& preds, const Tensor& gt, const LossConfig& config) {
  const Tensor w = weight_map(gt, config);
  Tensor total = saliency_level_loss(preds[0], gt, w, config);
  for (std::size_t l = 1; l < preds.size(); ++l) total = add(total, saliency_level_loss(preds[l], gt, w, config));
  return total;
}

Tensor contour_level_loss(const Tensor& pred, const Tensor& gt, const LossConfig& config) {
  require_map(pred, {}, "contour_loss");
  require_map(gt, pred.shape(), "contour_loss");
  return mean(bce_map(pred, gt, config.bce_eps));
}

Tensor contour_loss(const LevelMaps& preds, const Tensor& gt, const LossConfig& config) {
  Tensor total = contour_level_loss(preds[0], gt, config);
  for (std::size_t l = 1; l < preds.size(); ++l) total = add(total, contour_level_loss(preds[l], gt, config));
  return total;
}

LevelMaps task_maps(const SideOutputs& side, Task task) {
  LevelMaps out;
  for (std::size_t l = 0; l < kNumLevels; ++l) out[l] = side.at(l, task);
  return out;
}

LossReport total_loss(const SideOutputs& side, const Sample& sample, const LossConfig& config) {
  config.validate();
  LossReport r;
  const Tensor w = weight_map(sample.saliency, config);
  Tensor ld, ls, lc;
  for (std::size_t l = 0; l < kNumLevels; ++l) {
    auto& row = r.per_level[l];
    if (sample.has_depth) {
      const Tensor d = depth_level_loss(side.at(l, Task::Depth), sample.depth, sample.valid, config);
      row[static_cast<std::size_t>(Task::Depth)] = d.item();
      ld = ld.defined() ? add(ld, d) : d;
    }
    const Tensor s = saliency_level_loss(side.at(l, Task::Saliency), sample.saliency, w, config);
    const Tensor c = contour_level_loss(side.at(l, Task::Contour), sample.contour, config);
    row[static_cast<std::size_t>(Task::Saliency)] = s.item();
    row[static_cast<std::size_t>(Task::Contour)] = c.item();
    ls = ls.defined() ? add(ls, s) : s;
    lc = lc.defined() ? add(lc, c) : c;
  }
  r.depth = ld.defined() ? ld.item() : 0.0;
  r.saliency = ls.item();
  r.contour = lc.item();
  r.total = ld.defined() ? add(add(ld, ls), lc) : add(ls, lc);
  r.total_value = r.total.item();
  return r;
}

}  // namespace mmft
