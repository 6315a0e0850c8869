#pragma once

#include <random>
#include <vector>

#include "mmft/tensor.hpp"
#include "oracles.hpp"

namespace testing_util {

inline oracle::Vec vec(const mmft::Tensor& t) { return {t.values().begin(), t.values().end()}; }
inline oracle::Vec grad(const mmft::Tensor& t) { return {t.grad().begin(), t.grad().end()}; }

inline mmft::Tensor param(mmft::Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  const auto n = static_cast<std::size_t>(mmft::shape_numel(shape));
  return mmft::Tensor::parameter(std::move(shape), oracle::random_vec(n, rng, lo, hi));
}

inline mmft::Tensor constant(mmft::Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  const auto n = static_cast<std::size_t>(mmft::shape_numel(shape));
  return mmft::Tensor(std::move(shape), oracle::random_vec(n, rng, lo, hi));
}

inline mmft::Tensor mask(mmft::Shape shape, std::mt19937_64& rng, double p = 0.5) {
  const auto n = static_cast<std::size_t>(mmft::shape_numel(shape));
  return mmft::Tensor(std::move(shape), oracle::binary_vec(n, rng, p));
}

}  // namespace testing_util
