#include <algorithm>
#include <cmath>
#include <string>

#include "mmft/errors.hpp"
#include "mmft/ops.hpp"

namespace mmft {

namespace {

using detail::Node;

void require_chw(const Tensor& x, const char* op) {
  if (x.rank() != 3) {
    throw ShapeError(std::string(op) + ": expects a [C,H,W] tensor, got " + shape_str(x.shape()));
  }
}

// Source taps for one output coordinate under the half-pixel convention.
struct Tap {
  std::int64_t i0, i1;
  Real w0, w1;
};

std::vector<Tap> bilinear_taps(std::int64_t in, std::int64_t out) {
  std::vector<Tap> taps(static_cast<std::size_t>(out));
  const Real ratio = static_cast<Real>(in) / static_cast<Real>(out);
  for (std::int64_t o = 0; o < out; ++o) {
    Real src = (static_cast<Real>(o) + 0.5) * ratio - 0.5;
    if (src < 0) src = 0;
    auto i0 = static_cast<std::int64_t>(src);
    if (i0 > in - 1) i0 = in - 1;
    const std::int64_t i1 = i0 < in - 1 ? i0 + 1 : i0;
    const Real l1 = src - static_cast<Real>(i0);
    taps[o] = Tap{i0, i1, 1.0 - l1, l1};
  }
  return taps;
}

}  // namespace

Tensor softmax(const Tensor& x, int axis) {
  const int r = x.rank();
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) {
    throw ShapeError("softmax: axis out of range for " + shape_str(x.shape()));
  }
  std::int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= x.shape()[d];
  for (int d = axis + 1; d < r; ++d) inner *= x.shape()[d];
  const std::int64_t n = x.shape()[axis];
  const auto xv = x.values();
  std::vector<Real> out(xv.size());
  for (std::int64_t o = 0; o < outer; ++o) {
    for (std::int64_t i = 0; i < inner; ++i) {
      const std::int64_t base = o * n * inner + i;
      Real mx = xv[base];
      for (std::int64_t j = 1; j < n; ++j) mx = std::max(mx, xv[base + j * inner]);
      Real total = 0;
      for (std::int64_t j = 0; j < n; ++j) {
        const Real e = std::exp(xv[base + j * inner] - mx);
        out[base + j * inner] = e;
        total += e;
      }
      for (std::int64_t j = 0; j < n; ++j) out[base + j * inner] /= total;
    }
  }
  return detail::make_result(x.shape(), std::move(out), {x}, "softmax", [outer, inner, n](Node& o) {
    auto gi = o.inputs[0]->grad_buffer();
    for (std::int64_t a = 0; a < outer; ++a) {
      for (std::int64_t i = 0; i < inner; ++i) {
        const std::int64_t base = a * n * inner + i;
        Real dot = 0;
        for (std::int64_t j = 0; j < n; ++j) dot += o.grad[base + j * inner] * o.value[base + j * inner];
        for (std::int64_t j = 0; j < n; ++j) {
          const auto k = base + j * inner;
          gi[k] += o.value[k] * (o.grad[k] - dot);
        }
      }
    }
  });
}

Tensor resize_bilinear(const Tensor& x, std::int64_t out_h, std::int64_t out_w) {
  require_chw(x, "resize_bilinear");
  if (out_h < 1 || out_w < 1) throw ValidationError("resize_bilinear: output extent must be >= 1");
  const auto c = x.dim(0), h = x.dim(1), w = x.dim(2);
  auto ty = bilinear_taps(h, out_h);
  auto tx = bilinear_taps(w, out_w);
  const auto xv = x.values();
  std::vector<Real> out(static_cast<std::size_t>(c * out_h * out_w));
  for (std::int64_t ch = 0; ch < c; ++ch) {
    const Real* src = xv.data() + ch * h * w;
    Real* dst = out.data() + ch * out_h * out_w;
    for (std::int64_t oy = 0; oy < out_h; ++oy) {
      const Tap& y = ty[oy];
      const Real* r0 = src + y.i0 * w;
      const Real* r1 = src + y.i1 * w;
      for (std::int64_t ox = 0; ox < out_w; ++ox) {
        const Tap& t = tx[ox];
        dst[oy * out_w + ox] = y.w0 * (t.w0 * r0[t.i0] + t.w1 * r0[t.i1]) +
                               y.w1 * (t.w0 * r1[t.i0] + t.w1 * r1[t.i1]);
      }
    }
  }
  return detail::make_result(
      Shape{c, out_h, out_w}, std::move(out), {x}, "resize_bilinear",
      [c, h, w, out_h, out_w, ty = std::move(ty), tx = std::move(tx)](Node& o) {
        auto gi = o.inputs[0]->grad_buffer();
        for (std::int64_t ch = 0; ch < c; ++ch) {
          Real* dst = gi.data() + ch * h * w;
          const Real* g = o.grad.data() + ch * out_h * out_w;
          for (std::int64_t oy = 0; oy < out_h; ++oy) {
            const Tap& y = ty[oy];
            Real* r0 = dst + y.i0 * w;
            Real* r1 = dst + y.i1 * w;
            for (std::int64_t ox = 0; ox < out_w; ++ox) {
              const Tap& t = tx[ox];
              const Real v = g[oy * out_w + ox];
              r0[t.i0] += y.w0 * t.w0 * v;
              r0[t.i1] += y.w0 * t.w1 * v;
              r1[t.i0] += y.w1 * t.w0 * v;
              r1[t.i1] += y.w1 * t.w1 * v;
            }
          }
        }
      });
}

Tensor avgpool(const Tensor& x, int k, int stride, int pad) {
  require_chw(x, "avgpool");
  if (k < 1 || stride < 1 || pad < 0) throw ValidationError("avgpool: bad window parameters");
  const auto c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (h + 2 * pad < k || w + 2 * pad < k) throw ShapeError("avgpool: window larger than padded input");
  const std::int64_t ho = (h + 2 * pad - k) / stride + 1;
  const std::int64_t wo = (w + 2 * pad - k) / stride + 1;
  const Real inv = 1.0 / static_cast<Real>(k * k);
  const auto xv = x.values();

  // Horizontal window sums per input row, then vertical sums.
  std::vector<Real> rows(static_cast<std::size_t>(h * wo));
  std::vector<Real> out(static_cast<std::size_t>(c * ho * wo));
  for (std::int64_t ch = 0; ch < c; ++ch) {
    const Real* src = xv.data() + ch * h * w;
    for (std::int64_t y = 0; y < h; ++y) {
      for (std::int64_t ox = 0; ox < wo; ++ox) {
        const std::int64_t x0 = std::max<std::int64_t>(0, ox * stride - pad);
        const std::int64_t x1 = std::min<std::int64_t>(w, ox * stride - pad + k);
        Real s = 0;
        for (std::int64_t ix = x0; ix < x1; ++ix) s += src[y * w + ix];
        rows[y * wo + ox] = s;
      }
    }
    Real* dst = out.data() + ch * ho * wo;
    for (std::int64_t oy = 0; oy < ho; ++oy) {
      const std::int64_t y0 = std::max<std::int64_t>(0, oy * stride - pad);
      const std::int64_t y1 = std::min<std::int64_t>(h, oy * stride - pad + k);
      for (std::int64_t ox = 0; ox < wo; ++ox) {
        Real s = 0;
        for (std::int64_t iy = y0; iy < y1; ++iy) s += rows[iy * wo + ox];
        dst[oy * wo + ox] = s * inv;
      }
    }
  }
  return detail::make_result(
      Shape{c, ho, wo}, std::move(out), {x}, "avgpool", [c, h, w, ho, wo, k, stride, pad, inv](Node& o) {
        auto gi = o.inputs[0]->grad_buffer();
        std::vector<Real> rows(static_cast<std::size_t>(h * wo));
        for (std::int64_t ch = 0; ch < c; ++ch) {
          std::fill(rows.begin(), rows.end(), 0.0);
          const Real* g = o.grad.data() + ch * ho * wo;
          for (std::int64_t oy = 0; oy < ho; ++oy) {
            const std::int64_t y0 = std::max<std::int64_t>(0, oy * stride - pad);
            const std::int64_t y1 = std::min<std::int64_t>(h, oy * stride - pad + k);
            for (std::int64_t iy = y0; iy < y1; ++iy) {
              for (std::int64_t ox = 0; ox < wo; ++ox) rows[iy * wo + ox] += g[oy * wo + ox] * inv;
            }
          }
          Real* dst = gi.data() + ch * h * w;
          for (std::int64_t y = 0; y < h; ++y) {
            for (std::int64_t ox = 0; ox < wo; ++ox) {
              const std::int64_t x0 = std::max<std::int64_t>(0, ox * stride - pad);
              const std::int64_t x1 = std::min<std::int64_t>(w, ox * stride - pad + k);
              const Real v = rows[y * wo + ox];
              for (std::int64_t ix = x0; ix < x1; ++ix) dst[y * w + ix] += v;
            }
          }
        }
      });
}

Tensor separable_filter_valid(const Tensor& x, std::span<const Real> kernel) {
  require_chw(x, "separable_filter_valid");
  const auto kk = static_cast<std::int64_t>(kernel.size());
  const auto c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (kk < 1 || h < kk || w < kk) {
    throw ShapeError("separable_filter_valid: map " + shape_str(x.shape()) +
                     " smaller than the " + std::to_string(kk) + "-tap window");
  }
  const std::int64_t ho = h - kk + 1, wo = w - kk + 1;
  std::vector<Real> kern(kernel.begin(), kernel.end());
  const auto xv = x.values();
  std::vector<Real> tmp(static_cast<std::size_t>(h * wo));
  std::vector<Real> out(static_cast<std::size_t>(c * ho * wo));
  for (std::int64_t ch = 0; ch < c; ++ch) {
    const Real* src = xv.data() + ch * h * w;
    for (std::int64_t y = 0; y < h; ++y) {
      for (std::int64_t ox = 0; ox < wo; ++ox) {
        Real s = 0;
        for (std::int64_t j = 0; j < kk; ++j) s += kern[j] * src[y * w + ox + j];
        tmp[y * wo + ox] = s;
      }
    }
    Real* dst = out.data() + ch * ho * wo;
    for (std::int64_t oy = 0; oy < ho; ++oy) {
      for (std::int64_t ox = 0; ox < wo; ++ox) {
        Real s = 0;
        for (std::int64_t i = 0; i < kk; ++i) s += kern[i] * tmp[(oy + i) * wo + ox];
        dst[oy * wo + ox] = s;
      }
    }
  }
  return detail::make_result(
      Shape{c, ho, wo}, std::move(out), {x}, "separable_filter_valid",
      [c, h, w, ho, wo, kk, kern = std::move(kern)](Node& o) {
        auto gi = o.inputs[0]->grad_buffer();
        std::vector<Real> tmp(static_cast<std::size_t>(h * wo));
        for (std::int64_t ch = 0; ch < c; ++ch) {
          std::fill(tmp.begin(), tmp.end(), 0.0);
          const Real* g = o.grad.data() + ch * ho * wo;
          for (std::int64_t oy = 0; oy < ho; ++oy) {
            for (std::int64_t i = 0; i < kk; ++i) {
              for (std::int64_t ox = 0; ox < wo; ++ox) tmp[(oy + i) * wo + ox] += kern[i] * g[oy * wo + ox];
            }
          }
          Real* dst = gi.data() + ch * h * w;
          for (std::int64_t y = 0; y < h; ++y) {
            for (std::int64_t ox = 0; ox < wo; ++ox) {
              const Real v = tmp[y * wo + ox];
              for (std::int64_t j = 0; j < kk; ++j) dst[y * w + ox + j] += kern[j] * v;
            }
          }
        }
      });
}

Tensor grouped_dynamic_filter(const Tensor& x, const Tensor& filters) {
  require_chw(x, "grouped_dynamic_filter");
  if (filters.rank() != 5) {
    throw ShapeError("grouped_dynamic_filter: filters must be [G,H,W,K,K], got " +
                     shape_str(filters.shape()));
  }
  const auto c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const auto groups = filters.dim(0), k = filters.dim(3);
  if (filters.dim(1) != h || filters.dim(2) != w || filters.dim(4) != k) {
    throw ShapeError("grouped_dynamic_filter: filters " + shape_str(filters.shape()) +
                     " do not match input " + shape_str(x.shape()));
  }
  if (c % groups != 0) {
    throw ShapeError("grouped_dynamic_filter: " + std::to_string(c) + " channels not divisible by " +
                     std::to_string(groups) + " groups");
  }
  const std::int64_t per_group = c / groups;
  const std::int64_t r = k / 2;
  const std::int64_t taps = k * k;
  const auto xv = x.values();
  const auto fv = filters.values();
  std::vector<Real> out(static_cast<std::size_t>(c * h * w), 0.0);
  for (std::int64_t ch = 0; ch < c; ++ch) {
    const std::int64_t grp = ch / per_group;
    const Real* src = xv.data() + ch * h * w;
    for (std::int64_t y = 0; y < h; ++y) {
      for (std::int64_t xx = 0; xx < w; ++xx) {
        const Real* f = fv.data() + ((grp * h + y) * w + xx) * taps;
        Real s = 0;
        for (std::int64_t u = -r; u <= r; ++u) {
          const std::int64_t iy = y + u;
          if (iy < 0 || iy >= h) continue;
          for (std::int64_t v = -r; v <= r; ++v) {
            const std::int64_t ix = xx + v;
            if (ix < 0 || ix >= w) continue;
            s += f[(u + r) * k + (v + r)] * src[iy * w + ix];
          }
        }
        out[(ch * h + y) * w + xx] = s;
      }
    }
  }
  return detail::make_result(
      Shape{c, h, w}, std::move(out), {x, filters}, "grouped_dynamic_filter",
      [c, h, w, k, r, taps, per_group](Node& o) {
        Node& nx = *o.inputs[0];
        Node& nf = *o.inputs[1];
        Real* gx = nx.requires_grad ? nx.grad_buffer().data() : nullptr;
        Real* gf = nf.requires_grad ? nf.grad_buffer().data() : nullptr;
        for (std::int64_t ch = 0; ch < c; ++ch) {
          const std::int64_t grp = ch / per_group;
          const Real* src = nx.value.data() + ch * h * w;
          for (std::int64_t y = 0; y < h; ++y) {
            for (std::int64_t xx = 0; xx < w; ++xx) {
              const Real g = o.grad[(ch * h + y) * w + xx];
              if (g == 0) continue;
              const std::int64_t fbase = ((grp * h + y) * w + xx) * taps;
              for (std::int64_t u = -r; u <= r; ++u) {
                const std::int64_t iy = y + u;
                if (iy < 0 || iy >= h) continue;
                for (std::int64_t v = -r; v <= r; ++v) {
                  const std::int64_t ix = xx + v;
                  if (ix < 0 || ix >= w) continue;
                  const std::int64_t tap = fbase + (u + r) * k + (v + r);
                  if (gx) gx[(ch * h + iy) * w + ix] += nf.value[tap] * g;
                  if (gf) gf[tap] += src[iy * w + ix] * g;
                }
              }
            }
          }
        }
      });
}

}  // namespace mmft
