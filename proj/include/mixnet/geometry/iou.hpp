#pragma once

#include <array>
#include <vector>

#include "mixnet/geometry/polygon.hpp"

namespace mixnet::geom {

using Triangle = std::array<Point, 3>;

/// Ear-clipping triangulation of a simple polygon (either orientation).
std::vector<Triangle> triangulate(const Polygon& poly);

/// Sutherland-Hodgman clip of `subject` against a convex, positively oriented `clip`.
Polygon clip_convex(const Polygon& subject, const Polygon& clip);

/// Intersection area of two simple polygons, summed over triangle pairs.
double intersection_area(const Polygon& a, const Polygon& b);

/// Area-based intersection over union. Self-intersecting inputs are measured by
/// even-odd point sampling on a 512 x 512 grid over the joint bounding box.
/// Degenerate inputs give 0 and log a warning.
double polygon_iou(const Polygon& a, const Polygon& b);

/// Even-odd sampled IoU over the joint bounding box at `resolution`^2 points.
double raster_iou(const Polygon& a, const Polygon& b, int resolution);

}  // namespace mixnet::geom
