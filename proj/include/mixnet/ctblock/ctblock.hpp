#pragma once

#include <string>
#include <vector>

#include "mixnet/geometry/polygon.hpp"
#include "mixnet/tensor/nn.hpp"
#include "mixnet/util/kvconfig.hpp"

namespace mixnet {

struct CtblockConfig {
  int contour_points = 20;
  int center_points = 10;
  int dim = 128;
  int heads = 4;
  int mlp_hidden = 256;
  int blocks = 3;
  /// Octaves of the sinusoidal coordinate encoding (4 values each).
  int coord_frequencies = 6;
  /// Harmonics of the contour-index encoding (2 values each).
  int index_frequencies = 4;
  /// Pixels per unit of the relative-coordinate encoding and of decoder output.
  double coord_scale = 128.0;
  double smooth_l1_beta = 0.01;
  double center_weight = 1.0;
  double refine_weight = 1.0;

  void validate() const;
  static CtblockConfig from_kv(const KeyValueConfig& kv);
  std::string to_text() const;
  int encoding_width() const { return 4 * coord_frequencies + 2 * index_frequencies + 2; }
};

/// One rough contour to refine; `batch` indexes the feature maps.
struct ContourInstance {
  int batch = 0;
  std::vector<geom::Point> rough;
};

template <typename T>
struct CtblockOutput {
  /// [I, C, 2] image coordinates.
  Var<T> center;
  /// [I, N, 2] pixel offsets from the second module.
  Var<T> offsets;
  /// [I, N, 2] rough + offsets, unclamped.
  Var<T> refined;
  /// [I, N, 2] first-module displaced contour, resampled into `center`.
  Var<T> displaced;
  /// [I, N, 2] rough points.
  Tensor<T> rough;
  /// Rough points at full precision, the base for refined_polygons.
  std::vector<std::vector<geom::Point>> rough_points;
};

/// Regression targets for one instance.
struct CtblockTarget {
  std::vector<geom::Point> center;
  std::vector<geom::Point> contour;
};

/// GT contour resampled to `n` points starting at the boundary point nearest
/// rough[0], and the GT center line oriented to start nearer rough[0].
CtblockTarget make_ctblock_target(const geom::Polygon& gt, const std::vector<geom::Point>& rough, int n, int c);

template <typename T>
struct CtblockLoss {
  Var<T> total;
  Var<T> center;
  Var<T> refine;
};

template <typename T>
class Ctblock {
 public:
  /// `feature_channels`: fused stride-4 map; `heatmap_channels`: full-resolution head outputs.
  Ctblock(const CtblockConfig& config, int feature_channels, int heatmap_channels, ParameterSet<T>& params,
          nn::Rng& rng);

  /// All instances must share one contour point count. Instances never attend
  /// to each other. Points outside the image are clamped for sampling with a warning.
  CtblockOutput<T> forward(Graph<T>& g, Var<T> fused, Var<T> heatmaps,
                           const std::vector<ContourInstance>& instances) const;

  /// Token inputs [I, P, D]: fused features, heatmap values and the encoding of
  /// each point relative to its instance's rough-contour mean.
  Var<T> tokens(Graph<T>& g, Var<T> fused, Var<T> heatmaps, const std::vector<ContourInstance>& instances,
                const std::vector<std::vector<geom::Point>>& points, bool contour_kind) const;

  /// Second module alone: [I, N, 2] offsets for the rough contours given
  /// center points. Center tokens carry no index encoding, so their order
  /// does not matter.
  Var<T> refine_offsets(Graph<T>& g, Var<T> fused, Var<T> heatmaps, const std::vector<ContourInstance>& instances,
                        const std::vector<std::vector<geom::Point>>& center_points) const;

  CtblockLoss<T> loss(Graph<T>& g, const CtblockOutput<T>& out, const std::vector<CtblockTarget>& targets,
                      double width, double height) const;

  const CtblockConfig& config() const { return config_; }

 private:
  struct Module {
    nn::Linear<T> proj;
    std::vector<nn::TransformerBlock<T>> blocks;
    nn::LayerNorm<T> norm;
    nn::Linear<T> dec1, dec2;
  };
  Module make_module(const std::string& name, ParameterSet<T>& params, nn::Rng& rng) const;
  Var<T> encode(Graph<T>& g, const Module& m, Var<T> tokens) const;
  Var<T> decode(Graph<T>& g, const Module& m, Var<T> states) const;
  Var<T> refine_offsets(Graph<T>& g, Var<T> fused, Var<T> heatmaps, const std::vector<ContourInstance>& instances,
                        const std::vector<std::vector<geom::Point>>& center_points, Var<T> contour_tokens) const;

  CtblockConfig config_;
  int feature_channels_;
  int heatmap_channels_;
  Module centerline_;
  Module refiner_;
};

extern template class Ctblock<float>;
extern template class Ctblock<double>;

/// Refined polygons: offsets applied with clamping to the image, then rotated
/// to the canonical start and orientation. Vertex count stays N.
template <typename T>
std::vector<geom::Polygon> refined_polygons(const CtblockOutput<T>& out, double width, double height);

/// Predicted center lines; a zero-length displaced polyline falls back to the
/// contour centroid replicated C times.
template <typename T>
std::vector<geom::Polyline> center_lines(const CtblockOutput<T>& out);

/// Orientation and start rotation of canonicalize without dropping vertices.
geom::Polygon orient_canonical(const geom::Polygon& poly);

}  // namespace mixnet
