#include "mixnet/fsnet/fsnet.hpp"

#include <cmath>

namespace mixnet {

long conv_param_count(int in_channels, int out_channels, int kernel, bool bias) {
  return static_cast<long>(in_channels) * out_channels * kernel * kernel + (bias ? out_channels : 0);
}

template <typename T>
std::vector<Var<T>> shuffle_layer(const std::vector<Var<T>>& features, ops::ResampleMode up_mode) {
  const int n = static_cast<int>(features.size());
  if (n == 0) throw ShapeError("shuffle_layer: no inputs");
  if (n == 1) return features;
  std::vector<std::vector<Var<T>>> slices;
  for (int i = 0; i < n; ++i) {
    const int c = features[static_cast<std::size_t>(i)].dim(1);
    if (c % n != 0) {
      throw ShapeError("shuffle_layer: scale " + std::to_string(i + 1) + " has " + std::to_string(c) +
                       " channels, not divisible by the " + std::to_string(n) + " inputs");
    }
    slices.push_back(ops::split_channels(features[static_cast<std::size_t>(i)], n));
  }
  std::vector<Var<T>> out;
  for (int j = 0; j < n; ++j) {
    std::vector<Var<T>> parts;
    for (int i = 0; i < n; ++i) {
      const double factor = std::ldexp(1.0, i - j);
      const auto mode = i < j ? ops::ResampleMode::kNearest : up_mode;
      parts.push_back(ops::resample(slices[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)], factor, mode));
    }
    out.push_back(ops::concat_channels(parts));
  }
  return out;
}

template <typename T>
Fsnet<T>::Fsnet(const FsnetConfig& config, ParameterSet<T>& params, nn::Rng& rng)
    : config_(config), params_(&params), rng_(&rng) {
  config_.validate();
  const auto& C = config_.widths;
  const auto& d = config_.depths;
  const int n_fuse1 = 2, n_fuse2 = 3;
  const bool exchange = config_.fusion != FusionMode::kNone;

  stem1_ = make_unit("stem.conv1", "stem", 3, config_.stem_channels, 3, 2, 2, true);
  stem2_ = make_unit("stem.conv2", "stem", config_.stem_channels, config_.stem_channels, 3, 2, 4, true);
  stage1_ = make_stack("stage1.s1", config_.stem_channels, C[0], d[0], 4);
  down1_ = make_unit("down1", "down", C[0], C[1], 3, 2, 8, true);
  for (int s = 0; s < 2; ++s) stage2_[static_cast<std::size_t>(s)] = make_stack("stage2.s" + std::to_string(s + 1), C[static_cast<std::size_t>(s)], C[static_cast<std::size_t>(s)], d[static_cast<std::size_t>(1 + s)], 4 << s);

  // Channels leaving each fusion layer.
  std::array<int, 2> e1{C[0], C[1]};
  std::array<int, 3> e2{C[0], C[1], C[2]};
  if (exchange) {
    e1.fill((C[0] + C[1]) / n_fuse1);
    e2.fill((C[0] + C[1] + C[2]) / n_fuse2);
  }
  auto add_fusion = [&](int layer, int inputs, int out_channels) {
    const std::string name = "fusion" + std::to_string(layer + 1);
    if (config_.fusion == FusionMode::kShuffle) {
      layers_.push_back({name, "shuffle", 0, 0, 0, 4, 0, 0});
      return;
    }
    if (config_.fusion == FusionMode::kNone) return;
    for (int i = 0; i < inputs; ++i) {
      for (int j = 0; j < inputs; ++j) {
        const int in = C[static_cast<std::size_t>(i)];
        const std::string pname = name + ".x" + std::to_string(i + 1) + "to" + std::to_string(j + 1) + ".weight";
        auto& p = params_->add(pname, nn::init_tensor<T>({out_channels, in, 1, 1}, nn::Init::kHeNormal, in, out_channels, *rng_));
        exchange_[static_cast<std::size_t>(layer)].push_back(&p);
        layers_.push_back({pname, "fusion", in, out_channels, 1, 4 << i, static_cast<long>(p.value.numel()),
                           static_cast<long>(in) * out_channels});
      }
    }
  };
  add_fusion(0, 2, e1[0]);
  down2_ = make_unit("down2", "down", e1[1], C[2], 3, 2, 16, true);
  for (int s = 0; s < 3; ++s) {
    const int in = s < 2 ? e1[static_cast<std::size_t>(s)] : C[2];
    stage3_[static_cast<std::size_t>(s)] = make_stack("stage3.s" + std::to_string(s + 1), in, C[static_cast<std::size_t>(s)], d[static_cast<std::size_t>(3 + s)], 4 << s);
  }
  add_fusion(1, 3, e2[0]);
  down3_ = make_unit("down3", "down", e2[2], C[3], 3, 2, 32, true);
  for (int s = 0; s < 4; ++s) {
    const int in = s < 3 ? e2[static_cast<std::size_t>(s)] : C[3];
    stage4_[static_cast<std::size_t>(s)] = make_stack("stage4.s" + std::to_string(s + 1), in, C[static_cast<std::size_t>(s)], d[static_cast<std::size_t>(6 + s)], 4 << s);
  }
  const int hidden = config_.head_hidden;
  head_conv_ = make_unit("head.conv", "head", config_.fused_channels(), 4 * hidden, 3, 1, 4, true);
  const std::array<std::string, 4> names = {"classification", "distance", "orientation", "embedding"};
  const std::array<int, 4> outs = {1, 1, 2, config_.embedding_dim};
  for (int h = 0; h < 4; ++h) {
    head_out_[static_cast<std::size_t>(h)] = make_unit("head." + names[static_cast<std::size_t>(h)], "head", hidden, outs[static_cast<std::size_t>(h)], 1, 1, 4, false);
  }
  // Start the text prior low so early training is not swamped by positives.
  head_out_[0].bias->value.fill(T(-2));
}

template <typename T>
typename Fsnet<T>::ConvUnit Fsnet<T>::make_unit(const std::string& name, const std::string& kind, int in, int out,
                                                 int kernel, int stride, int out_stride, bool norm) {
  ConvUnit u;
  u.stride = stride;
  u.weight = &params_->add(name + ".weight", nn::init_tensor<T>({out, in, kernel, kernel}, nn::Init::kHeNormal,
                                                                in * kernel * kernel, out, *rng_));
  long count = static_cast<long>(u.weight->value.numel());
  if (norm) {
    u.groups = group_count(out);
    u.gamma = &params_->add(name + ".gn.gamma", Tensor<T>({out}, T(1)));
    u.beta = &params_->add(name + ".gn.beta", Tensor<T>({out}));
    count += 2L * out;
  } else {
    u.bias = &params_->add(name + ".bias", Tensor<T>({out}));
    count += out;
  }
  layers_.push_back({name, kind, in, out, kernel, out_stride, count, static_cast<long>(in) * out * kernel * kernel});
  return u;
}

template <typename T>
typename Fsnet<T>::Stack Fsnet<T>::make_stack(const std::string& name, int in, int out, int depth, int out_stride) {
  Stack s;
  for (int k = 0; k < depth; ++k) {
    const int cin = k == 0 ? in : out;
    ConvUnit u = make_unit(name + ".block" + std::to_string(k + 1), "conv", cin, out, 3, 1, out_stride, true);
    u.residual = cin == out;
    s.push_back(u);
  }
  return s;
}

template <typename T>
Var<T> Fsnet<T>::run(Graph<T>& g, const ConvUnit& u, Var<T> x) const {
  const int pad = (u.weight->value.dim(2) - 1) / 2;
  Var<T> bias = u.bias ? g.parameter(*u.bias) : Var<T>{};
  Var<T> y = ops::conv2d(x, g.parameter(*u.weight), bias, u.stride, pad);
  if (u.gamma) y = ops::group_norm(y, g.parameter(*u.gamma), g.parameter(*u.beta), u.groups);
  if (u.residual) y = ops::add(y, x);
  return y;
}

template <typename T>
Var<T> Fsnet<T>::run(Graph<T>& g, const Stack& s, Var<T> x) const {
  for (const auto& u : s) x = ops::relu(run(g, u, x));
  return x;
}

template <typename T>
ops::ResampleMode Fsnet<T>::up_mode() const {
  return config_.nearest_upsampling ? ops::ResampleMode::kNearest : ops::ResampleMode::kBilinear;
}

template <typename T>
std::vector<Var<T>> Fsnet<T>::fuse(Graph<T>& g, const std::vector<Var<T>>& xs, int layer) const {
  switch (config_.fusion) {
    case FusionMode::kNone:
      return xs;
    case FusionMode::kShuffle:
      return shuffle_layer(xs, up_mode());
    case FusionMode::kAdditive: {
      const int n = static_cast<int>(xs.size());
      const auto& w = exchange_[static_cast<std::size_t>(layer)];
      std::vector<Var<T>> out;
      for (int j = 0; j < n; ++j) {
        Var<T> acc;
        for (int i = 0; i < n; ++i) {
          Var<T> y = ops::conv2d(xs[static_cast<std::size_t>(i)], g.parameter(*w[static_cast<std::size_t>(i * n + j)]), Var<T>{}, 1, 0);
          const auto mode = i < j ? ops::ResampleMode::kNearest : up_mode();
          y = ops::resample(y, std::ldexp(1.0, i - j), mode);
          acc = acc.valid() ? ops::add(acc, y) : y;
        }
        out.push_back(ops::relu(acc));
      }
      return out;
    }
  }
  return xs;
}

template <typename T>
FeaturePyramid<T> Fsnet<T>::backbone(Graph<T>& g, Var<T> image) const {
  const auto& s = image.shape();
  if (s.size() != 4 || s[1] != 3) throw ShapeError("fsnet: image must be [B,3,H,W], got " + to_string(s));
  if (s[2] % 32 != 0 || s[3] % 32 != 0) {
    throw ShapeError("fsnet: input extents " + std::to_string(s[2]) + "x" + std::to_string(s[3]) +
                     " must be divisible by 32 (pad the image)");
  }
  Var<T> x = ops::relu(run(g, stem1_, image));
  x = ops::relu(run(g, stem2_, x));
  Var<T> f1 = run(g, stage1_, x);
  Var<T> f2 = ops::relu(run(g, down1_, f1));
  f1 = run(g, stage2_[0], f1);
  f2 = run(g, stage2_[1], f2);
  auto m = fuse(g, {f1, f2}, 0);
  Var<T> f3 = ops::relu(run(g, down2_, m[1]));
  f1 = run(g, stage3_[0], m[0]);
  f2 = run(g, stage3_[1], m[1]);
  f3 = run(g, stage3_[2], f3);
  m = fuse(g, {f1, f2, f3}, 1);
  Var<T> f4 = ops::relu(run(g, down3_, m[2]));
  FeaturePyramid<T> out;
  out.maps[0] = run(g, stage4_[0], m[0]);
  out.maps[1] = run(g, stage4_[1], m[1]);
  out.maps[2] = run(g, stage4_[2], m[2]);
  out.maps[3] = run(g, stage4_[3], f4);
  std::vector<Var<T>> up;
  for (int k = 0; k < 4; ++k) up.push_back(ops::resample(out.maps[static_cast<std::size_t>(k)], std::ldexp(1.0, k), up_mode()));
  out.fused = ops::concat_channels(up);
  return out;
}

template <typename T>
HeadOutput<T> Fsnet<T>::heads(Graph<T>& g, Var<T> fused) const {
  Var<T> h = ops::relu(run(g, head_conv_, fused));
  auto parts = ops::split_channels(h, 4);
  std::array<Var<T>, 4> raw;
  for (int k = 0; k < 4; ++k) {
    raw[static_cast<std::size_t>(k)] = ops::resample(run(g, head_out_[static_cast<std::size_t>(k)], parts[static_cast<std::size_t>(k)]), 4.0, ops::ResampleMode::kBilinear);
  }
  HeadOutput<T> out;
  out.class_logits = raw[0];
  out.classification = ops::sigmoid(raw[0]);
  out.distance = ops::sigmoid(raw[1]);
  out.orientation = ops::radial_squash(raw[2]);
  out.embedding = raw[3];
  return out;
}

template std::vector<Var<float>> shuffle_layer(const std::vector<Var<float>>&, ops::ResampleMode);
template std::vector<Var<double>> shuffle_layer(const std::vector<Var<double>>&, ops::ResampleMode);
template class Fsnet<float>;
template class Fsnet<double>;

}  // namespace mixnet
