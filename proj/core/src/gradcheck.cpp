#include "mmft/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "mmft/errors.hpp"

namespace mmft {

Real gradient_rel_error(Real analytic, Real numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

namespace {

Real evaluate(const std::function<Tensor()>& f) {
  NoGradGuard guard;
  const Real v = f().item();
  if (!std::isfinite(v)) throw NumericError("grad_check: objective is not finite");
  return v;
}

}  // namespace

GradCheckReport grad_check(const std::function<Tensor()>& f, const NamedTensors& leaves,
                           const GradCheckOptions& options) {
  if (!(options.step > 0)) throw ValidationError("grad_check: step must be positive");
  for (const auto& [name, t] : leaves) {
    if (!t.requires_grad() || !t.is_leaf()) {
      throw ValidationError("grad_check: leaf '" + name + "' is not a requires_grad leaf");
    }
  }
  for (auto [name, t] : leaves) t.zero_grad();
  {
    const Tensor root = f();
    if (root.numel() != 1) throw GraphError("grad_check: objective must be scalar");
    if (!std::isfinite(root.item())) throw NumericError("grad_check: objective is not finite");
    root.backward();
  }

  GradCheckReport report;
  std::mt19937_64 rng(options.seed);
  for (auto [name, t] : leaves) {
    const std::vector<Real> analytic(t.grad().begin(), t.grad().end());
    for (Real g : analytic) {
      if (!std::isfinite(g)) throw NumericError("grad_check: non-finite gradient for " + name);
    }
    std::vector<std::int64_t> coords(static_cast<std::size_t>(t.numel()));
    std::iota(coords.begin(), coords.end(), 0);
    if (options.max_coords_per_leaf > 0 && t.numel() > options.max_coords_per_leaf) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(static_cast<std::size_t>(options.max_coords_per_leaf));
    }
    LeafGradReport leaf{name, 0.0, 0, 0, 0};
    auto values = t.mutable_values();
    const Real h = options.step;
    for (auto i : coords) {
      const Real saved = values[i];
      values[i] = saved + h;
      const Real up = evaluate(f);
      values[i] = saved - h;
      const Real down = evaluate(f);
      values[i] = saved;
      const Real numeric = (up - down) / (2.0 * h);
      ++leaf.coords_checked;
      const Real noise = options.roundoff_factor * std::numeric_limits<Real>::epsilon() *
                         (std::abs(up) + std::abs(down)) / (2.0 * h);
      const Real err = gradient_rel_error(analytic[i], numeric);
      if (err <= options.tolerance) {
        leaf.max_rel_error = std::max(leaf.max_rel_error, err);
        continue;
      }
      if (std::abs(analytic[i] - numeric) <= noise) {
        ++leaf.roundoff_limited;
        continue;
      }
      if (options.kink_aware) {
        const Real mid = evaluate(f);
        const Real forward = (up - mid) / h, backward = (mid - down) / h;
        const bool bent = gradient_rel_error(forward, backward) > options.tolerance;
        const Real one_sided = std::min(gradient_rel_error(analytic[i], forward),
                                        gradient_rel_error(analytic[i], backward));
        bool smooth_nearby = false;
        for (Real fine = h / 10; fine >= h / 100 && !smooth_nearby; fine /= 10) {
          values[i] = saved + fine;
          const Real fine_up = evaluate(f);
          values[i] = saved - fine;
          const Real fine_down = evaluate(f);
          values[i] = saved;
          smooth_nearby = gradient_rel_error(analytic[i], (fine_up - fine_down) / (2.0 * fine)) <= options.tolerance;
        }
        if ((bent && one_sided <= options.kink_tolerance) || smooth_nearby) {
          ++leaf.kinks;
          continue;
        }
      }
      leaf.max_rel_error = std::max(leaf.max_rel_error, err);
    }
    report.max_rel_error = std::max(report.max_rel_error, leaf.max_rel_error);
    report.coords_checked += leaf.coords_checked;
    report.roundoff_limited += leaf.roundoff_limited;
    report.kinks += leaf.kinks;
    report.leaves.push_back(std::move(leaf));
    t.zero_grad();
  }
  report.passed = report.max_rel_error <= options.tolerance;
  return report;
}

GradCheckReport grad_check(const std::function<Tensor()>& f, const std::vector<Tensor>& leaves,
                           const GradCheckOptions& options) {
  NamedTensors named;
  for (std::size_t i = 0; i < leaves.size(); ++i) named.emplace_back("leaf" + std::to_string(i), leaves[i]);
  return grad_check(f, named, options);
}

}  // namespace mmft
