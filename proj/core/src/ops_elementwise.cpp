#include <algorithm>
#include <cmath>
#include <string>

#include "mmft/errors.hpp"
#include "mmft/ops.hpp"

namespace mmft {

namespace {

using detail::Node;

// How an operand's flat index is derived from the output's flat index.
enum class Access { Full, Repeat, Stretch };

struct Operand {
  Access access = Access::Full;
  std::int64_t n = 0;       // operand numel
  std::int64_t block = 1;   // Stretch: output elements per operand element

  std::int64_t index(std::int64_t i) const {
    switch (access) {
      case Access::Full: return i;
      case Access::Repeat: return i % n;
      case Access::Stretch: return i / block;
    }
    return i;
  }
};

Shape strip_leading_ones(Shape s) {
  while (s.size() > 1 && s.front() == 1) s.erase(s.begin());
  return s;
}

Shape strip_trailing_ones(Shape s) {
  while (s.size() > 1 && s.back() == 1) s.pop_back();
  return s;
}

// Can `small` be broadcast into `big`? Fills `op` on success.
bool plan_into(const Shape& small, const Shape& big, Operand& op) {
  const auto n_small = shape_numel(small);
  const auto n_big = shape_numel(big);
  op.n = n_small;
  if (n_small == 1) {
    op.access = Access::Repeat;
    return true;
  }
  const Shape suffix = strip_leading_ones(small);
  if (suffix.size() <= big.size() &&
      std::equal(suffix.begin(), suffix.end(), big.end() - static_cast<std::ptrdiff_t>(suffix.size()))) {
    op.access = Access::Repeat;
    return true;
  }
  const Shape prefix = strip_trailing_ones(small);
  if (prefix.size() <= big.size() && std::equal(prefix.begin(), prefix.end(), big.begin())) {
    op.access = Access::Stretch;
    op.block = n_big / n_small;
    return true;
  }
  return false;
}

struct Plan {
  Shape out;
  Operand a, b;
};

Plan plan_binary(const Tensor& a, const Tensor& b, const char* op) {
  Plan p;
  if (a.shape() == b.shape()) {
    p.out = a.shape();
    p.a.n = p.b.n = a.numel();
    return p;
  }
  if (a.numel() >= b.numel() && plan_into(b.shape(), a.shape(), p.b)) {
    p.out = a.shape();
    p.a.n = a.numel();
    return p;
  }
  if (b.numel() >= a.numel() && plan_into(a.shape(), b.shape(), p.a)) {
    p.out = b.shape();
    p.b.n = b.numel();
    return p;
  }
  throw ShapeError(std::string(op) + ": cannot broadcast shapes " + shape_str(a.shape()) + " and " +
                   shape_str(b.shape()));
}

template <typename Fwd, typename DA, typename DB>
Tensor binary(const Tensor& a, const Tensor& b, const char* name, Fwd fwd, DA da, DB db) {
  const Plan plan = plan_binary(a, b, name);
  const auto n = shape_numel(plan.out);
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<Real> out(static_cast<std::size_t>(n));
  if (plan.a.access == Access::Full && plan.b.access == Access::Full) {
    for (std::int64_t i = 0; i < n; ++i) out[i] = fwd(av[i], bv[i]);
  } else {
    for (std::int64_t i = 0; i < n; ++i) out[i] = fwd(av[plan.a.index(i)], bv[plan.b.index(i)]);
  }
  return detail::make_result(plan.out, std::move(out), {a, b}, name, [plan, n, da, db](Node& o) {
    Node& na = *o.inputs[0];
    Node& nb = *o.inputs[1];
    const auto& g = o.grad;
    if (na.requires_grad) {
      auto ga = na.grad_buffer();
      for (std::int64_t i = 0; i < n; ++i) {
        const auto ia = plan.a.index(i);
        ga[ia] += g[i] * da(na.value[ia], nb.value[plan.b.index(i)]);
      }
    }
    if (nb.requires_grad) {
      auto gb = nb.grad_buffer();
      for (std::int64_t i = 0; i < n; ++i) {
        const auto ib = plan.b.index(i);
        gb[ib] += g[i] * db(na.value[plan.a.index(i)], nb.value[ib]);
      }
    }
  });
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& a, const char* name, Fwd fwd, Deriv deriv) {
  const auto av = a.values();
  std::vector<Real> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  return detail::make_result(a.shape(), std::move(out), {a}, name, [deriv](Node& o) {
    Node& in = *o.inputs[0];
    auto gi = in.grad_buffer();
    for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += o.grad[i] * deriv(in.value[i], o.value[i]);
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "add", [](Real x, Real y) { return x + y; }, [](Real, Real) { return 1.0; },
      [](Real, Real) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "sub", [](Real x, Real y) { return x - y; }, [](Real, Real) { return 1.0; },
      [](Real, Real) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "mul", [](Real x, Real y) { return x * y; }, [](Real, Real y) { return y; },
      [](Real x, Real) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "div", [](Real x, Real y) { return x / y; }, [](Real, Real y) { return 1.0 / y; },
      [](Real x, Real y) { return -x / (y * y); });
}

Tensor add_scalar(const Tensor& a, Real s) {
  return unary(
      a, "add_scalar", [s](Real x) { return x + s; }, [](Real, Real) { return 1.0; });
}

Tensor scale(const Tensor& a, Real s) {
  return unary(
      a, "scale", [s](Real x) { return x * s; }, [s](Real, Real) { return s; });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor rsub_scalar(Real s, const Tensor& a) {
  return unary(
      a, "rsub_scalar", [s](Real x) { return s - x; }, [](Real, Real) { return -1.0; });
}

Tensor relu(const Tensor& a) {
  return unary(
      a, "relu", [](Real x) { return x > 0 ? x : 0.0; },
      [](Real x, Real) { return x > 0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a, "sigmoid",
      [](Real x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const Real e = std::exp(x);
        return e / (1.0 + e);
      },
      [](Real, Real y) { return y * (1.0 - y); });
}

Tensor log(const Tensor& a) {
  return unary(
      a, "log", [](Real x) { return std::log(x); }, [](Real x, Real) { return 1.0 / x; });
}

Tensor exp(const Tensor& a) {
  return unary(
      a, "exp", [](Real x) { return std::exp(x); }, [](Real, Real y) { return y; });
}

Tensor abs(const Tensor& a) {
  return unary(
      a, "abs", [](Real x) { return std::abs(x); },
      [](Real x, Real) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Tensor square(const Tensor& a) {
  return unary(
      a, "square", [](Real x) { return x * x; }, [](Real x, Real) { return 2.0 * x; });
}

Tensor sqrt(const Tensor& a) {
  return unary(
      a, "sqrt", [](Real x) { return std::sqrt(x); }, [](Real, Real y) { return 0.5 / y; });
}

Tensor clamp(const Tensor& a, Real lo, Real hi) {
  if (lo > hi) throw ValidationError("clamp: lo > hi");
  return unary(
      a, "clamp", [lo, hi](Real x) { return std::clamp(x, lo, hi); },
      [lo, hi](Real x, Real) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor sum(const Tensor& a) {
  Real s = 0;
  for (Real v : a.values()) s += v;
  return detail::make_result(Shape{1}, {s}, {a}, "sum", [](Node& o) {
    const Real g = o.grad[0];
    for (auto& gi : o.inputs[0]->grad_buffer()) gi += g;
  });
}

Tensor mean(const Tensor& a) {
  Real s = 0;
  for (Real v : a.values()) s += v;
  const auto n = static_cast<Real>(a.numel());
  return detail::make_result(Shape{1}, {s / n}, {a}, "mean", [n](Node& o) {
    const Real g = o.grad[0] / n;
    for (auto& gi : o.inputs[0]->grad_buffer()) gi += g;
  });
}

}  // namespace mmft
