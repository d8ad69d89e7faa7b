#pragma once

#include <stdexcept>
#include <vector>

namespace mixnet::geom {

/// Image-plane point. x grows right, y grows down; pixel (col j, row i) covers
/// [j, j+1) x [i, i+1) and has its center at (j + 0.5, i + 0.5).
struct Point {
  double x = 0.0;
  double y = 0.0;

  friend Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
  friend Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
  friend Point operator*(Point a, double s) { return {a.x * s, a.y * s}; }
  friend Point operator*(double s, Point a) { return {a.x * s, a.y * s}; }
  friend bool operator==(Point a, Point b) { return a.x == b.x && a.y == b.y; }
};

/// Closed ring, last vertex connects back to the first.
using Polygon = std::vector<Point>;
/// Open chain.
using Polyline = std::vector<Point>;

class GeometryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

double dot(Point a, Point b);
double cross(Point a, Point b);
double norm(Point a);
double distance(Point a, Point b);

/// Shoelace area; positive for the canonical orientation (see canonicalize).
double signed_area(const Polygon& poly);
double area(const Polygon& poly);
double perimeter(const Polygon& poly);
double polyline_length(const Polyline& line);
Point centroid(const Polygon& poly);

/// Closest point to `p` on segment [a, b].
Point closest_on_segment(Point p, Point a, Point b);
/// Distance from `p` to the polygon boundary; `nearest` receives the boundary point.
double boundary_distance(Point p, const Polygon& poly, Point* nearest = nullptr);

/// True if no two non-adjacent edges touch.
bool is_simple(const Polygon& poly);

/// Removes repeated and collinear vertices, orients the ring to positive
/// signed area and rotates it to start at the topmost-then-leftmost vertex.
/// With y pointing down, this is clockwise on screen.
/// Throws GeometryError if fewer than 3 distinct vertices or zero area remain.
Polygon canonicalize(const Polygon& poly);

/// N points at arc-length positions 0, T, ..., (N-1)T with T = perimeter / N,
/// starting at the canonical start vertex and following canonical orientation.
std::vector<Point> resample_contour(const Polygon& poly, int count);

/// `count` points evenly spaced by arc length, both endpoints included.
Polyline resample_polyline(const Polyline& line, int count);

/// Splits the polygon into two long chains separated by two short "cap" edges,
/// resamples each chain to `count` points, and returns the pairwise midpoints.
/// The chain holding the canonical start vertex runs first.
Polyline centerline_gt(const Polygon& poly, int count);

/// Pointwise sum, clamped into [0, width] x [0, height].
std::vector<Point> apply_offsets(const std::vector<Point>& points, const std::vector<Point>& offsets, double width,
                                 double height);

/// Douglas-Peucker simplification of a closed ring.
Polygon simplify_closed(const Polygon& poly, double epsilon);

}  // namespace mixnet::geom
