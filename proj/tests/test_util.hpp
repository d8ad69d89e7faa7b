#pragma once

#include <cstdint>
#include <random>

#include "mixnet/tensor/tensor.hpp"

namespace mixnet::testing {

template <typename T = double>
Tensor<T> random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor<T> t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<T>(dist(rng));
  return t;
}

/// Uniform values with |x| >= gap, for ops with a kink at zero.
inline Tensor<double> random_away_from_zero(Shape shape, std::uint64_t seed, double gap) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(gap, 1.0);
  std::bernoulli_distribution sign(0.5);
  Tensor<double> t(std::move(shape));
  for (auto& v : t.values()) v = sign(rng) ? dist(rng) : -dist(rng);
  return t;
}

}  // namespace mixnet::testing
