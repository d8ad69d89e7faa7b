#pragma once

#include <string>
#include <vector>

#include "mixnet/eval/records.hpp"
#include "mixnet/geometry/raster.hpp"
#include "mixnet/pipeline/model.hpp"
#include "mixnet/util/image.hpp"

namespace mixnet {

struct InferConfig {
  double threshold = 0.5;
  int min_area = 16;
  double simplify_epsilon = 0.5;
  /// Contour points per instance; 0 uses the model's configured N.
  int contour_points = 0;
  /// Detections whose mean text probability falls below this are dropped.
  double min_score = 0.5;

  static InferConfig from_kv(const KeyValueConfig& kv);
};

struct InstanceResult {
  geom::Polygon rough;
  geom::Polyline center;
  geom::Polygon refined;
  double score = 0;
};

struct InferResult {
  int width = 0;
  int height = 0;
  geom::Grid<float> probability;
  std::vector<InstanceResult> instances;
};

/// Classification map of one head pass as a grid.
geom::Grid<float> probability_grid(const Var<float>& classification, int batch = 0);

/// Rough contours of a probability map, resampled to `n` points from the
/// canonical start.
std::vector<std::vector<geom::Point>> rough_contours(const geom::Grid<float>& probability, const InferConfig& config,
                                                     int n);

/// Mean of `probability` over pixels inside `poly`; 0 for empty masks.
double region_score(const geom::Grid<float>& probability, const geom::Polygon& poly);

/// Backbone, rough contours, CTBlock, refined polygons and scores for one image.
InferResult infer_image(const MixNet& model, const Image& image, const InferConfig& config);

eval::ImageRecord to_record(const std::string& image_id, const InferResult& result);

/// Layers: embedded image, rough contours, center lines, refined contours.
std::string render_svg(const Image& image, const InferResult& result);

}  // namespace mixnet
