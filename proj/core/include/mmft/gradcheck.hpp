#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mmft/tensor.hpp"

namespace mmft {

struct GradCheckOptions {
  Real step = 1e-5;
  Real tolerance = 1e-4;
  /// Coordinates probed per leaf; <= 0 probes all of them.
  std::int64_t max_coords_per_leaf = 0;
  std::uint64_t seed = 0;
  /// Differences below roundoff_factor * eps * (|f(x+h)| + |f(x-h)|) / (2h) are
  /// indistinguishable from rounding in the objective and count as zero error.
  Real roundoff_factor = 64;
  /// For piecewise-smooth functions (ReLU networks, L1 terms): a coordinate whose
  /// central difference disagrees is reported as a kink and not scored when
  /// either the one-sided differences disagree with each other and the analytic
  /// value matches one of them within kink_tolerance, or the central difference
  /// at step h/10 or h/100 matches within tolerance (a kink inside [x-h, x+h]).
  bool kink_aware = false;
  Real kink_tolerance = 1e-3;
};

struct LeafGradReport {
  std::string name;
  Real max_rel_error = 0;
  std::int64_t coords_checked = 0;
  std::int64_t roundoff_limited = 0;
  std::int64_t kinks = 0;
};

struct GradCheckReport {
  std::vector<LeafGradReport> leaves;
  Real max_rel_error = 0;
  std::int64_t coords_checked = 0;
  std::int64_t roundoff_limited = 0;
  std::int64_t kinks = 0;
  bool passed = false;
};

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

/// Relative error used by the harness: |a - n| / max(1e-8, |a| + |n|).
Real gradient_rel_error(Real analytic, Real numeric);

/// Compares reverse-mode gradients of a scalar-valued `f` against central
/// differences on every (or a random subset of) coordinate of each leaf.
/// `f` must be deterministic and rebuild its graph on every call. Leaves must
/// be requires_grad tensors; their accumulated gradients are reset.
GradCheckReport grad_check(const std::function<Tensor()>& f, const NamedTensors& leaves,
                           const GradCheckOptions& options = {});

GradCheckReport grad_check(const std::function<Tensor()>& f, const std::vector<Tensor>& leaves,
                           const GradCheckOptions& options = {});

}  // namespace mmft
