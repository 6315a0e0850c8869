#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mmft/tensor.hpp"

// Differentiable tensor operations. Every function records a backward rule when
// any input requires gradients and grad mode is enabled.
//
// Binary elementwise ops accept equal shapes, a single-element operand, or an
// operand whose shape matches the trailing axes (suffix) or the leading axes
// (prefix, with optional trailing 1s) of the other. Suffix wins when both match.
namespace mmft {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& a, Real s);
Tensor scale(const Tensor& a, Real s);
Tensor neg(const Tensor& a);
/// s - a
Tensor rsub_scalar(Real s, const Tensor& a);

Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor log(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor square(const Tensor& a);
Tensor sqrt(const Tensor& a);
/// Gradient passes where lo <= a <= hi, zero elsewhere.
Tensor clamp(const Tensor& a, Real lo, Real hi);

/// Sum of all elements, shape [1].
Tensor sum(const Tensor& a);
/// Mean of all elements, shape [1].
Tensor mean(const Tensor& a);

Tensor reshape(const Tensor& a, Shape shape);
Tensor permute(const Tensor& a, std::span<const int> axes);
Tensor permute(const Tensor& a, std::initializer_list<int> axes);
Tensor transpose(const Tensor& a);  // 2-D only
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& a, int axis, std::int64_t start, std::int64_t length);

/// [M,K] x [K,P] -> [M,P]
Tensor matmul(const Tensor& a, const Tensor& b);

/// Cross-correlation. x [Ci,H,W], w [Co,Ci,K,K], bias [Co] or undefined.
/// Output extent floor((H + 2*pad - K) / stride) + 1.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int pad);

/// Max-shifted softmax along one axis.
Tensor softmax(const Tensor& x, int axis);

/// Bilinear resize of [C,H,W] with the half-pixel (align_corners = false) convention.
Tensor resize_bilinear(const Tensor& x, std::int64_t out_h, std::int64_t out_w);

/// Average pooling of [C,H,W]; the divisor is always k*k, padded zeros included.
Tensor avgpool(const Tensor& x, int k, int stride, int pad);

/// Separable filter of [C,H,W] with a 1-D kernel applied along both axes, no
/// padding: output [C, H-K+1, W-K+1].
Tensor separable_filter_valid(const Tensor& x, std::span<const Real> kernel);

/// Per-pixel grouped filtering. x [C,H,W], filters [G,H,W,K,K] with C divisible by G.
/// Channel c uses group c / (C/G); taps outside the map read zero.
Tensor grouped_dynamic_filter(const Tensor& x, const Tensor& filters);

}  // namespace mmft
