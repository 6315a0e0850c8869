#include <Eigen/Core>
#include <string>

#include "mmft/errors.hpp"
#include "mmft/ops.hpp"

namespace mmft {

namespace {

using detail::Node;
using RowMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using MapM = Eigen::Map<RowMat>;

struct ConvGeom {
  std::int64_t ci, h, w, co, k, ho, wo;
  int stride, pad;
  std::int64_t patch() const { return ci * k * k; }
  std::int64_t pixels() const { return ho * wo; }
  bool pointwise() const { return k == 1 && stride == 1 && pad == 0; }
};

// cols[(c*K + ky)*K + kx, oy*Wo + ox] = x[c, oy*s - p + ky, ox*s - p + kx]
void im2col(const ConvGeom& g, const Real* x, Real* cols) {
  for (std::int64_t c = 0; c < g.ci; ++c) {
    for (std::int64_t ky = 0; ky < g.k; ++ky) {
      for (std::int64_t kx = 0; kx < g.k; ++kx) {
        Real* row = cols + ((c * g.k + ky) * g.k + kx) * g.pixels();
        for (std::int64_t oy = 0; oy < g.ho; ++oy) {
          const std::int64_t iy = oy * g.stride - g.pad + ky;
          Real* dst = row + oy * g.wo;
          if (iy < 0 || iy >= g.h) {
            std::fill_n(dst, g.wo, 0.0);
            continue;
          }
          const Real* src = x + (c * g.h + iy) * g.w;
          for (std::int64_t ox = 0; ox < g.wo; ++ox) {
            const std::int64_t ix = ox * g.stride - g.pad + kx;
            dst[ox] = (ix >= 0 && ix < g.w) ? src[ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const ConvGeom& g, const Real* cols, Real* dx) {
  for (std::int64_t c = 0; c < g.ci; ++c) {
    for (std::int64_t ky = 0; ky < g.k; ++ky) {
      for (std::int64_t kx = 0; kx < g.k; ++kx) {
        const Real* row = cols + ((c * g.k + ky) * g.k + kx) * g.pixels();
        for (std::int64_t oy = 0; oy < g.ho; ++oy) {
          const std::int64_t iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.h) continue;
          const Real* src = row + oy * g.wo;
          Real* dst = dx + (c * g.h + iy) * g.w;
          for (std::int64_t ox = 0; ox < g.wo; ++ox) {
            const std::int64_t ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: inner dimensions differ for " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  }
  const auto m = a.dim(0), k = a.dim(1), p = b.dim(1);
  std::vector<Real> out(static_cast<std::size_t>(m * p));
  MapM(out.data(), m, p).noalias() = MapC(a.values().data(), m, k) * MapC(b.values().data(), k, p);
  return detail::make_result(Shape{m, p}, std::move(out), {a, b}, "matmul", [m, k, p](Node& o) {
    Node& na = *o.inputs[0];
    Node& nb = *o.inputs[1];
    MapC g(o.grad.data(), m, p);
    if (na.requires_grad) {
      MapM(na.grad_buffer().data(), m, k).noalias() += g * MapC(nb.value.data(), k, p).transpose();
    }
    if (nb.requires_grad) {
      MapM(nb.grad_buffer().data(), k, p).noalias() += MapC(na.value.data(), m, k).transpose() * g;
    }
  });
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int pad) {
  if (x.rank() != 3 || w.rank() != 4 || w.dim(1) != x.dim(0) || w.dim(2) != w.dim(3)) {
    throw ShapeError("conv2d: input " + shape_str(x.shape()) + " does not fit weight " +
                     shape_str(w.shape()));
  }
  if (stride < 1 || pad < 0) throw ValidationError("conv2d: stride must be >= 1 and pad >= 0");
  ConvGeom g{};
  g.ci = x.dim(0);
  g.h = x.dim(1);
  g.w = x.dim(2);
  g.co = w.dim(0);
  g.k = w.dim(2);
  g.stride = stride;
  g.pad = pad;
  if (g.h + 2 * pad < g.k || g.w + 2 * pad < g.k) {
    throw ShapeError("conv2d: kernel " + std::to_string(g.k) + " larger than padded input " +
                     shape_str(x.shape()));
  }
  g.ho = (g.h + 2 * pad - g.k) / stride + 1;
  g.wo = (g.w + 2 * pad - g.k) / stride + 1;
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != g.co)) {
    throw ShapeError("conv2d: bias " + shape_str(bias.shape()) + " does not match " +
                     std::to_string(g.co) + " output channels");
  }

  std::vector<Real> out(static_cast<std::size_t>(g.co * g.pixels()));
  MapC wmat(w.values().data(), g.co, g.patch());
  MapM omat(out.data(), g.co, g.pixels());
  if (g.pointwise()) {
    omat.noalias() = wmat * MapC(x.values().data(), g.ci, g.pixels());
  } else {
    std::vector<Real> cols(static_cast<std::size_t>(g.patch() * g.pixels()));
    im2col(g, x.values().data(), cols.data());
    omat.noalias() = wmat * MapC(cols.data(), g.patch(), g.pixels());
  }
  if (bias.defined()) {
    const auto bv = bias.values();
    for (std::int64_t c = 0; c < g.co; ++c) omat.row(c).array() += bv[c];
  }

  std::vector<Tensor> inputs{x, w};
  if (bias.defined()) inputs.push_back(bias);
  return detail::make_result(Shape{g.co, g.ho, g.wo}, std::move(out), inputs, "conv2d", [g](Node& o) {
    Node& nx = *o.inputs[0];
    Node& nw = *o.inputs[1];
    MapC gout(o.grad.data(), g.co, g.pixels());
    if (o.inputs.size() > 2 && o.inputs[2]->requires_grad) {
      auto gb = o.inputs[2]->grad_buffer();
      for (std::int64_t c = 0; c < g.co; ++c) gb[c] += gout.row(c).sum();
    }
    if (g.pointwise()) {
      if (nw.requires_grad) {
        MapM(nw.grad_buffer().data(), g.co, g.ci).noalias() +=
            gout * MapC(nx.value.data(), g.ci, g.pixels()).transpose();
      }
      if (nx.requires_grad) {
        MapM(nx.grad_buffer().data(), g.ci, g.pixels()).noalias() +=
            MapC(nw.value.data(), g.co, g.ci).transpose() * gout;
      }
      return;
    }
    std::vector<Real> cols(static_cast<std::size_t>(g.patch() * g.pixels()));
    if (nw.requires_grad) {
      im2col(g, nx.value.data(), cols.data());
      MapM(nw.grad_buffer().data(), g.co, g.patch()).noalias() +=
          gout * MapC(cols.data(), g.patch(), g.pixels()).transpose();
    }
    if (nx.requires_grad) {
      MapM(cols.data(), g.patch(), g.pixels()).noalias() =
          MapC(nw.value.data(), g.co, g.patch()).transpose() * gout;
      col2im(g, cols.data(), nx.grad_buffer().data());
    }
  });
}

}  // namespace mmft
