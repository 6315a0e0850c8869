#include <numeric>
#include <string>

#include "mmft/errors.hpp"
#include "mmft/ops.hpp"

namespace mmft {

namespace {

using detail::Node;

std::vector<std::int64_t> strides_of(const Shape& s) {
  std::vector<std::int64_t> st(s.size(), 1);
  for (int i = static_cast<int>(s.size()) - 2; i >= 0; --i) st[i] = st[i + 1] * s[i + 1];
  return st;
}

int normalize_axis(int axis, int rank, const char* op) {
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) {
    throw ShapeError(std::string(op) + ": axis out of range for rank " + std::to_string(rank));
  }
  return axis;
}

}  // namespace

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  }
  for (auto d : shape) {
    if (d <= 0) throw ShapeError("reshape: non-positive extent in " + shape_str(shape));
  }
  std::vector<Real> v(a.values().begin(), a.values().end());
  return detail::make_result(std::move(shape), std::move(v), {a}, "reshape", [](Node& o) {
    auto gi = o.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += o.grad[i];
  });
}

Tensor permute(const Tensor& a, std::span<const int> axes) {
  const int r = a.rank();
  if (static_cast<int>(axes.size()) != r) {
    throw ShapeError("permute: " + std::to_string(axes.size()) + " axes given for " +
                     shape_str(a.shape()));
  }
  std::vector<bool> used(static_cast<std::size_t>(r), false);
  Shape out_shape(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) {
    const int ax = axes[i];
    if (ax < 0 || ax >= r || used[ax]) throw ShapeError("permute: invalid axis permutation");
    used[ax] = true;
    out_shape[i] = a.shape()[ax];
  }
  const auto in_strides = strides_of(a.shape());
  // Input stride for each output axis.
  std::vector<std::int64_t> src_stride(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) src_stride[i] = in_strides[axes[i]];

  const auto n = a.numel();
  std::vector<std::int64_t> map(static_cast<std::size_t>(n));
  std::vector<std::int64_t> idx(static_cast<std::size_t>(r), 0);
  std::int64_t src = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    map[i] = src;
    for (int d = r - 1; d >= 0; --d) {
      if (++idx[d] < out_shape[d]) {
        src += src_stride[d];
        break;
      }
      src -= src_stride[d] * (out_shape[d] - 1);
      idx[d] = 0;
    }
  }
  const auto av = a.values();
  std::vector<Real> out(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) out[i] = av[map[i]];
  return detail::make_result(std::move(out_shape), std::move(out), {a}, "permute",
                             [map = std::move(map)](Node& o) {
                               auto gi = o.inputs[0]->grad_buffer();
                               for (std::size_t i = 0; i < map.size(); ++i) gi[map[i]] += o.grad[i];
                             });
}

Tensor permute(const Tensor& a, std::initializer_list<int> axes) {
  return permute(a, std::span<const int>(axes.begin(), axes.size()));
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("transpose: expects a 2-D tensor, got " + shape_str(a.shape()));
  return permute(a, {1, 0});
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts.front().shape();
  const int r = static_cast<int>(first.size());
  axis = normalize_axis(axis, r, "concat");
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    bool ok = p.rank() == r;
    for (int d = 0; ok && d < r; ++d) ok = d == axis || p.shape()[d] == first[d];
    if (!ok) {
      throw ShapeError("concat: shapes " + shape_str(first) + " and " + shape_str(p.shape()) +
                       " differ outside axis " + std::to_string(axis));
    }
    out_shape[axis] += p.shape()[axis];
  }
  std::int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= first[d];
  for (int d = axis + 1; d < r; ++d) inner *= first[d];
  const std::int64_t out_row = out_shape[axis] * inner;

  std::vector<Real> out(static_cast<std::size_t>(shape_numel(out_shape)));
  std::vector<std::int64_t> offsets;
  std::int64_t offset = 0;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    const std::int64_t row = p.shape()[axis] * inner;
    const auto pv = p.values();
    for (std::int64_t o = 0; o < outer; ++o) {
      std::copy_n(pv.begin() + o * row, row, out.begin() + o * out_row + offset);
    }
    offset += row;
  }
  return detail::make_result(std::move(out_shape), std::move(out), parts, "concat",
                             [offsets, outer, out_row](Node& o) {
                               for (std::size_t k = 0; k < o.inputs.size(); ++k) {
                                 Node& in = *o.inputs[k];
                                 if (!in.requires_grad) continue;
                                 auto gi = in.grad_buffer();
                                 const std::int64_t row =
                                     static_cast<std::int64_t>(gi.size()) / outer;
                                 for (std::int64_t r2 = 0; r2 < outer; ++r2) {
                                   for (std::int64_t j = 0; j < row; ++j) {
                                     gi[r2 * row + j] += o.grad[r2 * out_row + offsets[k] + j];
                                   }
                                 }
                               }
                             });
}

Tensor slice(const Tensor& a, int axis, std::int64_t start, std::int64_t length) {
  const int r = a.rank();
  axis = normalize_axis(axis, r, "slice");
  const auto extent = a.shape()[axis];
  if (start < 0 || length <= 0 || start + length > extent) {
    throw ShapeError("slice: range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                     ") out of bounds for axis " + std::to_string(axis) + " of " +
                     shape_str(a.shape()));
  }
  std::int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= a.shape()[d];
  for (int d = axis + 1; d < r; ++d) inner *= a.shape()[d];
  Shape out_shape = a.shape();
  out_shape[axis] = length;
  const std::int64_t in_row = extent * inner;
  const std::int64_t out_row = length * inner;
  const std::int64_t off = start * inner;
  const auto av = a.values();
  std::vector<Real> out(static_cast<std::size_t>(outer * out_row));
  for (std::int64_t o = 0; o < outer; ++o) {
    std::copy_n(av.begin() + o * in_row + off, out_row, out.begin() + o * out_row);
  }
  return detail::make_result(std::move(out_shape), std::move(out), {a}, "slice",
                             [outer, in_row, out_row, off](Node& o) {
                               auto gi = o.inputs[0]->grad_buffer();
                               for (std::int64_t r2 = 0; r2 < outer; ++r2) {
                                 for (std::int64_t j = 0; j < out_row; ++j) {
                                   gi[r2 * in_row + off + j] += o.grad[r2 * out_row + j];
                                 }
                               }
                             });
}

}  // namespace mmft
