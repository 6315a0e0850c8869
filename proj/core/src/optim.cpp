#include "mmft/optim.hpp"

#include <cmath>

#include "mmft/errors.hpp"

namespace mmft {

void AdamConfig::validate() const {
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) throw ValidationError("adam: betas must lie in [0,1)");
  if (!(eps > 0)) throw ValidationError("adam: eps must be positive");
}

void adam_update(std::span<Real> param, std::span<const Real> grad, AdamMoments& moments, std::int64_t step,
                 Real lr, const AdamConfig& config) {
  if (grad.size() != param.size()) throw ShapeError("adam: gradient length differs from parameter length");
  if (step < 1) throw ValidationError("adam: step count must start at 1");
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i])) {
      throw NumericError("adam: non-finite gradient at element " + std::to_string(i) + "; step aborted");
    }
  }
  if (moments.m.size() != param.size()) moments.m.assign(param.size(), 0.0);
  if (moments.v.size() != param.size()) moments.v.assign(param.size(), 0.0);
  const Real c1 = 1.0 - std::pow(config.beta1, static_cast<Real>(step));
  const Real c2 = 1.0 - std::pow(config.beta2, static_cast<Real>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    moments.m[i] = config.beta1 * moments.m[i] + (1 - config.beta1) * grad[i];
    moments.v[i] = config.beta2 * moments.v[i] + (1 - config.beta2) * grad[i] * grad[i];
    const Real mhat = moments.m[i] / c1;
    const Real vhat = moments.v[i] / c2;
    param[i] -= lr * mhat / (std::sqrt(vhat) + config.eps);
  }
}

Adam::Adam(const ParameterStore& store, AdamConfig config) : config_(config) {
  config_.validate();
  moments_.resize(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto n = static_cast<std::size_t>(store.entries()[i].second.numel());
    moments_[i].m.assign(n, 0.0);
    moments_[i].v.assign(n, 0.0);
  }
}

void Adam::step(ParameterStore& store, Real lr, bool round_to_float) {
  if (store.size() != moments_.size()) throw ValidationError("adam: parameter store changed size");
  // Validate every gradient first so a failure leaves all parameters untouched.
  for (const auto& [name, t] : store.entries()) {
    for (Real g : t.grad()) {
      if (!std::isfinite(g)) throw NumericError("adam: non-finite gradient in '" + name + "'; step aborted");
    }
  }
  ++steps_;
  for (std::size_t i = 0; i < store.size(); ++i) {
    Tensor t = store.entries()[i].second;
    const auto grad = t.grad();
    const auto values = t.mutable_values();
    adam_update(values, grad, moments_[i], steps_, lr, config_);
    if (round_to_float) {
      for (auto& v : values) v = static_cast<float>(v);
      for (auto& v : moments_[i].m) v = static_cast<float>(v);
      for (auto& v : moments_[i].v) v = static_cast<float>(v);
    }
  }
}

Real lr_schedule(std::int64_t epoch, Real lr0, std::int64_t decay_step, Real decay_rate) {
  if (epoch < 0) throw ValidationError("lr_schedule: epoch must be non-negative");
  if (decay_step < 1) throw ValidationError("lr_schedule: decay step must be positive");
  return lr0 * std::pow(decay_rate, static_cast<Real>(epoch / decay_step));
}

}  // namespace mmft
