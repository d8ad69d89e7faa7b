#include "mixnet/tensor/optim.hpp"

#include <cmath>

namespace mixnet {

template <typename T>
void adam_step(const std::vector<Parameter<T>*>& params, AdamState<T>& state, const AdamConfig& config) {
  if (state.first.empty()) {
    for (const auto* p : params) {
      state.first.emplace_back(p->value.shape());
      state.second.emplace_back(p->value.shape());
    }
  }
  if (state.first.size() != params.size()) {
    throw ShapeError("adam_step: optimizer state tracks " + std::to_string(state.first.size()) +
                     " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = *params[i];
    if (p.grad.shape() != p.value.shape() || state.first[i].shape() != p.value.shape()) {
      throw ShapeError("adam_step: shape mismatch for parameter " + p.name + ": value " + to_string(p.value.shape()) +
                       ", grad " + to_string(p.grad.shape()) + ", state " + to_string(state.first[i].shape()));
    }
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    auto& m = state.first[i];
    auto& v = state.second[i];
    for (std::size_t k = 0; k < p.value.numel(); ++k) {
      const double g = p.grad[k];
      const double mk = config.beta1 * m[k] + (1.0 - config.beta1) * g;
      const double vk = config.beta2 * v[k] + (1.0 - config.beta2) * g * g;
      m[k] = static_cast<T>(mk);
      v[k] = static_cast<T>(vk);
      const double update = config.lr * (mk / bc1) / (std::sqrt(vk / bc2) + config.eps);
      p.value[k] = static_cast<T>(p.value[k] - update);
    }
  }
}

template void adam_step<float>(const std::vector<Parameter<float>*>&, AdamState<float>&, const AdamConfig&);
template void adam_step<double>(const std::vector<Parameter<double>*>&, AdamState<double>&, const AdamConfig&);

}  // namespace mixnet
