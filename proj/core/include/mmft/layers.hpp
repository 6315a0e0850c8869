#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mmft/gradcheck.hpp"
#include "mmft/tensor.hpp"

namespace mmft {

using Rng = std::mt19937_64;

/// Ordered, named collection of trainable leaves. Insertion order is the
/// canonical order used by checkpoints and the optimizer.
class ParameterStore {
 public:
  Tensor add(const std::string& name, Shape shape, std::vector<Real> values);
  /// Normal(0, gain / sqrt(fan_in)) initialization.
  Tensor normal(const std::string& name, Shape shape, std::int64_t fan_in, Real gain, Rng& rng);
  Tensor zeros(const std::string& name, Shape shape);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  Tensor get(const std::string& name) const;
  const NamedTensors& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::int64_t scalar_count() const;

  void zero_grad();

 private:
  NamedTensors entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// 2-D convolution layer with bias over [C,H,W] maps.
struct Conv2d {
  Tensor weight;  // [Co,Ci,K,K]
  Tensor bias;    // [Co]
  int stride = 1;
  int pad = 0;

  /// He-style initialization; "same" padding K/2.
  static Conv2d create(ParameterStore& store, const std::string& name, std::int64_t in_channels,
                       std::int64_t out_channels, int kernel, int stride, Rng& rng, Real gain = std::sqrt(2.0));

  Tensor operator()(const Tensor& x) const;
  std::int64_t out_channels() const { return weight.dim(0); }
  std::int64_t in_channels() const { return weight.dim(1); }
};

/// Token-wise affine map: [N,in] -> [N,out].
struct Linear {
  Tensor weight;  // [in,out]
  Tensor bias;    // [out]

  static Linear create(ParameterStore& store, const std::string& name, std::int64_t in_features,
                       std::int64_t out_features, Rng& rng, Real gain = 1.0);

  Tensor operator()(const Tensor& x) const;
};

}  // namespace mmft
