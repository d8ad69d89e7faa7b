#pragma once

#include <array>
#include <string>
#include <vector>

#include "mixnet/fsnet/config.hpp"
#include "mixnet/tensor/nn.hpp"
#include "mixnet/tensor/ops.hpp"

namespace mixnet {

/// Per-scale maps at strides 4, 8, 16, 32 plus their stride-4 concat.
template <typename T>
struct FeaturePyramid {
  std::array<Var<T>, 4> maps;
  Var<T> fused;
};

/// Head outputs at input resolution. `class_logits` feeds the loss.
template <typename T>
struct HeadOutput {
  Var<T> class_logits;
  Var<T> classification;
  Var<T> distance;
  Var<T> orientation;
  Var<T> embedding;
};

/// One row of the architecture inventory.
struct LayerRecord {
  std::string name;
  std::string kind;  // stem, conv, down, fusion, shuffle, head
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 0;
  /// Output stride relative to the input image.
  int stride = 1;
  long params = 0;
  /// Multiply-accumulates per output pixel (conv weights only).
  long macs_per_pixel = 0;
};

/// Parameter-free cross-scale exchange. `features[i]` sits at stride 4 * 2^i and
/// has C_i channels, C_i divisible by N = features.size(). Output j is the
/// channel concat over i of slice j of features[i], resampled to scale j:
/// nearest when shrinking, `up_mode` when enlarging.
template <typename T>
std::vector<Var<T>> shuffle_layer(const std::vector<Var<T>>& features, ops::ResampleMode up_mode);

/// Weight count of a k x k convolution.
long conv_param_count(int in_channels, int out_channels, int kernel, bool bias);

template <typename T>
class Fsnet {
 public:
  Fsnet(const FsnetConfig& config, ParameterSet<T>& params, nn::Rng& rng);

  /// Image [B,3,H,W] with H, W divisible by 32.
  FeaturePyramid<T> backbone(Graph<T>& g, Var<T> image) const;
  /// Heads on the fused map, up-sampled by 4 to the input resolution.
  HeadOutput<T> heads(Graph<T>& g, Var<T> fused) const;

  const FsnetConfig& config() const { return config_; }
  const std::vector<LayerRecord>& layers() const { return layers_; }

 private:
  struct ConvUnit {
    Parameter<T>* weight = nullptr;
    Parameter<T>* bias = nullptr;
    Parameter<T>* gamma = nullptr;
    Parameter<T>* beta = nullptr;
    int stride = 1;
    int groups = 1;
    bool residual = false;
  };
  using Stack = std::vector<ConvUnit>;

  ConvUnit make_unit(const std::string& name, const std::string& kind, int in, int out, int kernel, int stride,
                     int out_stride, bool norm);
  Stack make_stack(const std::string& name, int in, int out, int depth, int out_stride);
  Var<T> run(Graph<T>& g, const ConvUnit& u, Var<T> x) const;
  Var<T> run(Graph<T>& g, const Stack& s, Var<T> x) const;
  std::vector<Var<T>> fuse(Graph<T>& g, const std::vector<Var<T>>& xs, int layer) const;
  ops::ResampleMode up_mode() const;

  FsnetConfig config_;
  ParameterSet<T>* params_;
  nn::Rng* rng_;
  std::vector<LayerRecord> layers_;

  ConvUnit stem1_, stem2_;
  Stack stage1_;
  ConvUnit down1_, down2_, down3_;
  std::array<Stack, 2> stage2_;
  std::array<Stack, 3> stage3_;
  std::array<Stack, 4> stage4_;
  /// Additive fusion: one 1x1 convolution per (input scale, output scale) pair.
  std::array<std::vector<Parameter<T>*>, 2> exchange_;
  ConvUnit head_conv_;
  std::array<ConvUnit, 4> head_out_;
};

extern template class Fsnet<float>;
extern template class Fsnet<double>;

}  // namespace mixnet
