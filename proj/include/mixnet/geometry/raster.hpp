#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mixnet/geometry/polygon.hpp"

namespace mixnet::geom {

/// Row-major 2-D array.
template <typename T>
struct Grid {
  int height = 0;
  int width = 0;
  std::vector<T> data;

  Grid() = default;
  Grid(int h, int w, T fill = T{}) : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {}

  T& at(int i, int j) { return data[static_cast<std::size_t>(i) * width + j]; }
  const T& at(int i, int j) const { return data[static_cast<std::size_t>(i) * width + j]; }
  bool inside(int i, int j) const { return i >= 0 && j >= 0 && i < height && j < width; }
};

using Mask = Grid<std::uint8_t>;

/// Even-odd point-in-polygon test.
bool contains_even_odd(const Polygon& poly, Point p);

/// Even-odd scanline fill sampled at pixel centers.
Mask rasterize_mask(const Polygon& poly, int height, int width);

/// Threshold, 8-connected labeling, Moore boundary tracing, Douglas-Peucker.
/// Boundary pixel centers are moved half a pixel outward so the outline follows
/// the pixel edges rather than the centers. Components smaller than `min_area`
/// pixels are dropped. Polygons are canonical.
std::vector<Polygon> extract_rough_contours(const Grid<float>& probability, double threshold = 0.5,
                                            int min_area = 16, double simplify_epsilon = 0.5);

/// Pixel targets for the four heads.
struct LabelSet {
  Grid<float> classification;
  /// Distance to the instance boundary divided by the instance maximum; zero outside.
  Grid<float> distance;
  /// Unit vector from the pixel toward its nearest boundary point; zero outside.
  Grid<float> orientation_x;
  Grid<float> orientation_y;
  /// 1-based instance index, 0 for background.
  Grid<int> instance;
};

/// Overlapping instances resolve to the later polygon with a logged warning.
LabelSet label_fields(const std::vector<Polygon>& polygons, int height, int width);

/// Binary PGM (P5), 8-bit.
void write_pgm(const std::string& path, const Mask& mask);

}  // namespace mixnet::geom
