#pragma once

#include <vector>

#include "mixnet/tensor/graph.hpp"

// Differentiable operations recorded on a Graph. Every op validates its input
// extents and throws ShapeError with the offending dimensions on mismatch.
namespace mixnet::ops {

// ---- elementwise -------------------------------------------------------------

template <typename T> Var<T> add(Var<T> a, Var<T> b);
template <typename T> Var<T> sub(Var<T> a, Var<T> b);
template <typename T> Var<T> mul(Var<T> a, Var<T> b);
template <typename T> Var<T> scale(Var<T> a, T factor);
template <typename T> Var<T> add_scalar(Var<T> a, T offset);
template <typename T> Var<T> relu(Var<T> x);
/// tanh approximation of GELU.
template <typename T> Var<T> gelu(Var<T> x);
template <typename T> Var<T> sigmoid(Var<T> x);
/// v / sqrt(1 + |v|^2) over axis 1 of a [B,C,H,W] map; output vectors have norm < 1.
template <typename T> Var<T> radial_squash(Var<T> x);

// ---- reductions --------------------------------------------------------------

template <typename T> Var<T> sum(Var<T> x);
template <typename T> Var<T> mean(Var<T> x);

// ---- layout ------------------------------------------------------------------

template <typename T> Var<T> reshape(Var<T> x, Shape shape);
/// Generic axis permutation; out.shape[i] == in.shape[perm[i]].
template <typename T> Var<T> permute(Var<T> x, const std::vector<int>& perm);
/// Concatenation along `axis`; all other extents must agree.
template <typename T> Var<T> concat(const std::vector<Var<T>>& xs, int axis);
template <typename T> Var<T> slice(Var<T> x, int axis, int start, int length);
/// Splits `axis` into `parts` equal contiguous slices, in ascending order.
template <typename T> std::vector<Var<T>> split(Var<T> x, int axis, int parts);
template <typename T> std::vector<Var<T>> split_channels(Var<T> x, int parts);
template <typename T> Var<T> concat_channels(const std::vector<Var<T>>& xs);

// ---- convolution / normalization --------------------------------------------

/// 2-D cross-correlation. `bias` may be an unbound Var for a bias-free conv.
template <typename T> Var<T> conv2d(Var<T> x, Var<T> weight, Var<T> bias, int stride, int padding);
/// Per-sample group normalization over (C/groups, H, W) with per-channel affine.
template <typename T> Var<T> group_norm(Var<T> x, Var<T> gamma, Var<T> beta, int groups, T eps = T(1e-5));
/// Normalization over the last axis with per-feature affine.
template <typename T> Var<T> layer_norm(Var<T> x, Var<T> gamma, Var<T> beta, T eps = T(1e-5));

// ---- dense -------------------------------------------------------------------

/// y = x W^T + b over the last axis; weight is [Dout, Din].
template <typename T> Var<T> linear(Var<T> x, Var<T> weight, Var<T> bias);
/// Batched product of [B,M,K] and [B,K,N] (either operand optionally transposed in its last two axes).
template <typename T> Var<T> matmul(Var<T> a, Var<T> b, bool transpose_a = false, bool transpose_b = false);
template <typename T> Var<T> softmax(Var<T> x);

// ---- resampling --------------------------------------------------------------

enum class ResampleMode { kNearest, kBilinear };

/// Power-of-two spatial rescale, factor in {1/8, .., 8}. Bilinear uses
/// half-pixel centers (align_corners = false); a bilinear 1/2 is a 2x2 average.
template <typename T> Var<T> resample(Var<T> x, double factor, ResampleMode mode);
/// Bilinear resize to explicit extents (half-pixel centers).
template <typename T> Var<T> resize_bilinear(Var<T> x, int out_h, int out_w);
template <typename T> Var<T> avg_pool(Var<T> x, int kernel);

/// One bilinear read location: batch index plus image-space coordinates.
struct PointSample {
  int batch = 0;
  double x = 0.0;
  double y = 0.0;
};

/// Reads a [B,C,H,W] map at sub-pixel image coordinates. The map has stride
/// `stride` relative to the image, so image point (x, y) maps to map location
/// (x / stride - 0.5, y / stride - 0.5). Coordinates are clamped into the map.
/// Output is [P, C]. Gradients reach the map only.
template <typename T> Var<T> sample_points(Var<T> map, const std::vector<PointSample>& points, double stride);

/// Equal arc-length resampling of open polylines [B, N, 2] to [B, count, 2],
/// endpoints included. Differentiable with respect to the vertices.
template <typename T> Var<T> arclength_resample(Var<T> polylines, int count);

// ---- losses (all return scalars) ----------------------------------------------

/// Mean binary cross-entropy on logits; `weight` may be empty for uniform weights.
template <typename T> Var<T> bce_with_logits(Var<T> logits, const Tensor<T>& target, const Tensor<T>& weight = {});
/// Mean squared error over elements where `mask` is non-zero. Zero if the mask is empty.
template <typename T> Var<T> masked_mse(Var<T> pred, const Tensor<T>& target, const Tensor<T>& mask);
/// Mean smooth-L1 (Huber with transition `beta`).
template <typename T> Var<T> smooth_l1(Var<T> pred, const Tensor<T>& target, T beta);
/// Margin-based instance discrimination on a [B,E,H,W] embedding. `instance_ids`
/// holds B*H*W labels, 0 for background. Pull term: hinge at `delta_pull` around
/// each instance mean; push term: hinge at 2*`delta_push` between instance means.
template <typename T>
Var<T> discriminative_loss(Var<T> embedding, const std::vector<int>& instance_ids, T delta_pull, T delta_push);

}  // namespace mixnet::ops
