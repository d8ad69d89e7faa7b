#pragma once

#include <random>
#include <vector>

#include "mixnet/geometry/polygon.hpp"
#include "mixnet/util/image.hpp"
#include "mixnet/util/kvconfig.hpp"

namespace mixnet {

struct AugmentConfig {
  bool rotate = true;
  double max_rotation_deg = 30;
  bool crop = true;
  /// Smallest kept side fraction of a crop; the crop is scaled back to full size.
  double min_crop = 0.7;
  bool flip = true;
  bool color_jitter = true;
  double jitter = 0.2;
  /// Instances left with less than this share of their area are dropped.
  double min_visible = 0.5;

  static AugmentConfig none();
  static AugmentConfig from_kv(const KeyValueConfig& kv);
  std::string to_text() const;
};

struct Sample {
  std::string id;
  Image image;
  std::vector<geom::Polygon> polygons;
};

/// Random flip, rotation about the image center and crop, applied as one
/// bilinear warp to the image and exactly to the polygons, then colour jitter.
/// Polygons are clipped to the image and canonicalized.
Sample augment(const Sample& in, const AugmentConfig& config, std::mt19937_64& rng);

}  // namespace mixnet
