#include "mmft/layers.hpp"

#include <cmath>

#include "mmft/errors.hpp"
#include "mmft/ops.hpp"

namespace mmft {

Tensor ParameterStore::add(const std::string& name, Shape shape, std::vector<Real> values) {
  if (contains(name)) throw ValidationError("duplicate parameter name: " + name);
  Tensor t = Tensor::parameter(std::move(shape), std::move(values));
  index_.emplace(name, entries_.size());
  entries_.emplace_back(name, t);
  return t;
}

Tensor ParameterStore::normal(const std::string& name, Shape shape, std::int64_t fan_in, Real gain,
                              Rng& rng) {
  std::normal_distribution<Real> dist(0.0, gain / std::sqrt(static_cast<Real>(fan_in)));
  std::vector<Real> v(static_cast<std::size_t>(shape_numel(shape)));
  // Stored at single precision so checkpoints round-trip exactly.
  for (auto& x : v) x = static_cast<float>(dist(rng));
  return add(name, std::move(shape), std::move(v));
}

Tensor ParameterStore::zeros(const std::string& name, Shape shape) {
  std::vector<Real> v(static_cast<std::size_t>(shape_numel(shape)), 0.0);
  return add(name, std::move(shape), std::move(v));
}

Tensor ParameterStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ValidationError("unknown parameter: " + name);
  return entries_[it->second].second;
}

std::int64_t ParameterStore::scalar_count() const {
  std::int64_t n = 0;
  for (const auto& [name, t] : entries_) n += t.numel();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& [name, t] : entries_) t.zero_grad();
}

Conv2d Conv2d::create(ParameterStore& store, const std::string& name, std::int64_t in_channels,
                      std::int64_t out_channels, int kernel, int stride, Rng& rng, Real gain) {
  if (kernel % 2 == 0) throw ValidationError("conv kernel must be odd: " + name);
  Conv2d c;
  c.weight = store.normal(name + ".weight", {out_channels, in_channels, kernel, kernel},
                          in_channels * kernel * kernel, gain, rng);
  c.bias = store.zeros(name + ".bias", {out_channels});
  c.stride = stride;
  c.pad = kernel / 2;
  return c;
}

Tensor Conv2d::operator()(const Tensor& x) const { return conv2d(x, weight, bias, stride, pad); }

Linear Linear::create(ParameterStore& store, const std::string& name, std::int64_t in_features,
                      std::int64_t out_features, Rng& rng, Real gain) {
  Linear l;
  l.weight = store.normal(name + ".weight", {in_features, out_features}, in_features, gain, rng);
  l.bias = store.zeros(name + ".bias", {out_features});
  return l;
}

Tensor Linear::operator()(const Tensor& x) const { return add(matmul(x, weight), bias); }

}  // namespace mmft
