#pragma once

#include <vector>

#include "mixnet/tensor/graph.hpp"

namespace mixnet {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment buffers, one per parameter, plus the step counter.
template <typename T>
struct AdamState {
  long step = 0;
  std::vector<Tensor<T>> first;
  std::vector<Tensor<T>> second;
};

/// One bias-corrected Adam update of every parameter from its gradient.
/// State buffers are created on the first call; shapes must match thereafter.
template <typename T>
void adam_step(const std::vector<Parameter<T>*>& params, AdamState<T>& state, const AdamConfig& config);

extern template void adam_step<float>(const std::vector<Parameter<float>*>&, AdamState<float>&, const AdamConfig&);
extern template void adam_step<double>(const std::vector<Parameter<double>*>&, AdamState<double>&, const AdamConfig&);

}  // namespace mixnet
