#include "mixnet/tensor/nn.hpp"

#include <cmath>

namespace mixnet::nn {

template <typename T>
Tensor<T> init_tensor(Shape shape, Init init, int fan_in, int fan_out, Rng& rng) {
  Tensor<T> t(std::move(shape));
  switch (init) {
    case Init::kZero:
      break;
    case Init::kOne:
      t.fill(T(1));
      break;
    case Init::kHeNormal: {
      std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / std::max(fan_in, 1)));
      for (auto& v : t.values()) v = static_cast<T>(dist(rng));
      break;
    }
    case Init::kXavierUniform: {
      const double a = std::sqrt(6.0 / std::max(fan_in + fan_out, 1));
      std::uniform_real_distribution<double> dist(-a, a);
      for (auto& v : t.values()) v = static_cast<T>(dist(rng));
      break;
    }
  }
  return t;
}

template <typename T>
Var<T> Linear<T>::operator()(Graph<T>& g, Var<T> x) const {
  return ops::linear(x, g.parameter(*weight), g.parameter(*bias));
}

template <typename T>
Linear<T> make_linear(ParameterSet<T>& ps, const std::string& name, int in, int out, Rng& rng, Init init) {
  Linear<T> l;
  l.weight = &ps.add(name + ".weight", init_tensor<T>({out, in}, init, in, out, rng));
  l.bias = &ps.add(name + ".bias", Tensor<T>({out}));
  return l;
}

template <typename T>
Var<T> LayerNorm<T>::operator()(Graph<T>& g, Var<T> x) const {
  return ops::layer_norm(x, g.parameter(*gamma), g.parameter(*beta));
}

template <typename T>
LayerNorm<T> make_layer_norm(ParameterSet<T>& ps, const std::string& name, int dim) {
  LayerNorm<T> n;
  n.gamma = &ps.add(name + ".gamma", Tensor<T>({dim}, T(1)));
  n.beta = &ps.add(name + ".beta", Tensor<T>({dim}));
  return n;
}

template <typename T>
MhsaWeights<T> make_mhsa(ParameterSet<T>& ps, const std::string& name, int dim, int heads, Rng& rng) {
  if (heads <= 0 || dim % heads != 0) {
    throw ShapeError("mhsa: model width " + std::to_string(dim) + " not divisible by heads " + std::to_string(heads));
  }
  MhsaWeights<T> w;
  w.query = make_linear(ps, name + ".query", dim, dim, rng);
  w.key = make_linear(ps, name + ".key", dim, dim, rng);
  w.value = make_linear(ps, name + ".value", dim, dim, rng);
  w.output = make_linear(ps, name + ".output", dim, dim, rng);
  w.heads = heads;
  return w;
}

template <typename T>
Var<T> mhsa(Graph<T>& g, Var<T> tokens, const MhsaWeights<T>& w) {
  if (tokens.value().rank() != 3) throw ShapeError("mhsa: tokens must be [B,T,D], got " + to_string(tokens.shape()));
  const int B = tokens.shape()[0], Tn = tokens.shape()[1], D = tokens.shape()[2];
  const int H = w.heads;
  if (H <= 0 || D % H != 0) {
    throw ShapeError("mhsa: model width " + std::to_string(D) + " not divisible by heads " + std::to_string(H));
  }
  const int dh = D / H;
  auto heads_first = [&](Var<T> x) {
    // [B,T,D] -> [B,T,H,dh] -> [B,H,T,dh] -> [B*H,T,dh]
    return ops::reshape(ops::permute(ops::reshape(x, {B, Tn, H, dh}), {0, 2, 1, 3}), {B * H, Tn, dh});
  };
  Var<T> q = heads_first(w.query(g, tokens));
  Var<T> k = heads_first(w.key(g, tokens));
  Var<T> v = heads_first(w.value(g, tokens));
  Var<T> scores = ops::scale(ops::matmul(q, k, false, true), T(1) / std::sqrt(static_cast<T>(dh)));
  Var<T> attn = ops::softmax(scores);
  Var<T> ctx = ops::matmul(attn, v);
  ctx = ops::reshape(ops::permute(ops::reshape(ctx, {B, H, Tn, dh}), {0, 2, 1, 3}), {B, Tn, D});
  return w.output(g, ctx);
}

template <typename T>
Var<T> TransformerBlock<T>::operator()(Graph<T>& g, Var<T> tokens) const {
  Var<T> x = ops::add(tokens, mhsa(g, norm1(g, tokens), attention));
  Var<T> h = fc2(g, ops::gelu(fc1(g, norm2(g, x))));
  return ops::add(x, h);
}

template <typename T>
TransformerBlock<T> make_transformer_block(ParameterSet<T>& ps, const std::string& name, int dim, int heads,
                                           int hidden, Rng& rng) {
  TransformerBlock<T> b;
  b.norm1 = make_layer_norm(ps, name + ".norm1", dim);
  b.attention = make_mhsa(ps, name + ".attn", dim, heads, rng);
  b.norm2 = make_layer_norm(ps, name + ".norm2", dim);
  b.fc1 = make_linear(ps, name + ".fc1", dim, hidden, rng);
  b.fc2 = make_linear(ps, name + ".fc2", hidden, dim, rng);
  return b;
}

#define MIXNET_INSTANTIATE(T)                                                                              \
  template Tensor<T> init_tensor<T>(Shape, Init, int, int, Rng&);                                         \
  template struct Linear<T>;                                                                               \
  template struct LayerNorm<T>;                                                                            \
  template struct TransformerBlock<T>;                                                                     \
  template Linear<T> make_linear(ParameterSet<T>&, const std::string&, int, int, Rng&, Init);              \
  template LayerNorm<T> make_layer_norm(ParameterSet<T>&, const std::string&, int);                        \
  template MhsaWeights<T> make_mhsa(ParameterSet<T>&, const std::string&, int, int, Rng&);                 \
  template Var<T> mhsa(Graph<T>&, Var<T>, const MhsaWeights<T>&);                                          \
  template TransformerBlock<T> make_transformer_block(ParameterSet<T>&, const std::string&, int, int, int, \
                                                      Rng&);

MIXNET_INSTANTIATE(float)
MIXNET_INSTANTIATE(double)
#undef MIXNET_INSTANTIATE

}  // namespace mixnet::nn
