#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mixnet/tensor/graph.hpp"

namespace mixnet {

/// Builds the computation under test from one leaf per input tensor.
using GradCheckFn = std::function<Var<double>(Graph<double>&, const std::vector<Var<double>>&)>;

struct GradCheckOptions {
  double epsilon = 1e-6;
  /// Inputs larger than this are checked on a seeded random subset of elements.
  std::size_t max_elements_per_input = 256;
  /// Denominator floor of the relative error, so entries with near-zero
  /// gradients are judged on absolute error.
  double denominator_floor = 1e-4;
  std::uint64_t seed = 7;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t nan_count = 0;
  /// "input[i] element j" of the worst entry.
  std::string worst;
};

/// Central-difference check of reverse-mode gradients. A non-scalar output is
/// reduced with a fixed random projection so the full Jacobian participates.
GradCheckReport grad_check(const GradCheckFn& fn, const std::vector<Tensor<double>>& inputs,
                           const GradCheckOptions& options = {});

}  // namespace mixnet
