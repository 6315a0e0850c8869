#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mmft/layers.hpp"

namespace mmft {

struct AdamConfig {
  Real beta1 = 0.9;
  Real beta2 = 0.999;
  Real eps = 1e-8;
  void validate() const;
};

struct AdamMoments {
  std::vector<Real> m;
  std::vector<Real> v;
};

/// One bias-corrected Adam update of a single parameter array. `step` is the
/// 1-based count of updates including this one. Throws NumericError and leaves
/// everything untouched if any gradient is non-finite.
void adam_update(std::span<Real> param, std::span<const Real> grad, AdamMoments& moments, std::int64_t step,
                 Real lr, const AdamConfig& config);

/// Adam over a whole ParameterStore. Moments are indexed like store.entries().
class Adam {
 public:
  Adam(const ParameterStore& store, AdamConfig config);

  /// Applies one update using each parameter's accumulated gradient.
  /// When round_to_float is set, parameters and moments are rounded to the
  /// nearest 32-bit float afterwards so a checkpoint stores them exactly.
  void step(ParameterStore& store, Real lr, bool round_to_float = true);

  std::int64_t steps() const { return steps_; }
  void set_steps(std::int64_t s) { steps_ = s; }
  std::vector<AdamMoments>& moments() { return moments_; }
  const std::vector<AdamMoments>& moments() const { return moments_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::vector<AdamMoments> moments_;
  std::int64_t steps_ = 0;
};

/// lr0 * rate^(epoch / decay_step) with integer division.
Real lr_schedule(std::int64_t epoch, Real lr0, std::int64_t decay_step, Real decay_rate);

}  // namespace mmft
