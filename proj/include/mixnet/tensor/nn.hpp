#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "mixnet/tensor/ops.hpp"

namespace mixnet::nn {

using Rng = std::mt19937_64;

enum class Init { kZero, kHeNormal, kXavierUniform, kOne };

/// Fills a fresh tensor; fan_in/fan_out drive the He and Xavier scales.
template <typename T>
Tensor<T> init_tensor(Shape shape, Init init, int fan_in, int fan_out, Rng& rng);

template <typename T>
struct Linear {
  Parameter<T>* weight = nullptr;  // [out, in]
  Parameter<T>* bias = nullptr;    // [out]
  Var<T> operator()(Graph<T>& g, Var<T> x) const;
  int in_features() const { return weight->value.shape()[1]; }
  int out_features() const { return weight->value.shape()[0]; }
};

template <typename T>
Linear<T> make_linear(ParameterSet<T>& ps, const std::string& name, int in, int out, Rng& rng,
                      Init init = Init::kXavierUniform);

template <typename T>
struct LayerNorm {
  Parameter<T>* gamma = nullptr;
  Parameter<T>* beta = nullptr;
  Var<T> operator()(Graph<T>& g, Var<T> x) const;
};

template <typename T>
LayerNorm<T> make_layer_norm(ParameterSet<T>& ps, const std::string& name, int dim);

/// Projections of a multi-head self-attention layer.
template <typename T>
struct MhsaWeights {
  Linear<T> query, key, value, output;
  int heads = 1;
};

template <typename T>
MhsaWeights<T> make_mhsa(ParameterSet<T>& ps, const std::string& name, int dim, int heads, Rng& rng);

/// Scaled dot-product self-attention over [B, T, D] tokens. D must divide by heads.
template <typename T>
Var<T> mhsa(Graph<T>& g, Var<T> tokens, const MhsaWeights<T>& w);

/// Pre-norm encoder block: x + MHSA(LN(x)), then + MLP(LN(.)) with a GELU hidden layer.
template <typename T>
struct TransformerBlock {
  LayerNorm<T> norm1;
  MhsaWeights<T> attention;
  LayerNorm<T> norm2;
  Linear<T> fc1, fc2;
  Var<T> operator()(Graph<T>& g, Var<T> tokens) const;
};

template <typename T>
TransformerBlock<T> make_transformer_block(ParameterSet<T>& ps, const std::string& name, int dim, int heads,
                                           int hidden, Rng& rng);

}  // namespace mixnet::nn
