#include "mixnet/geometry/polygon.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace mixnet::geom {

double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }
double norm(Point a) { return std::hypot(a.x, a.y); }
double distance(Point a, Point b) { return norm(a - b); }

double signed_area(const Polygon& poly) {
  const std::size_t n = poly.size();
  if (n < 3) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += cross(poly[i], poly[(i + 1) % n]);
  return 0.5 * s;
}

double area(const Polygon& poly) { return std::abs(signed_area(poly)); }

double perimeter(const Polygon& poly) {
  double s = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) s += distance(poly[i], poly[(i + 1) % poly.size()]);
  return s;
}

double polyline_length(const Polyline& line) {
  double s = 0.0;
  for (std::size_t i = 1; i < line.size(); ++i) s += distance(line[i - 1], line[i]);
  return s;
}

Point centroid(const Polygon& poly) {
  const double a = signed_area(poly);
  if (poly.empty()) return {};
  if (std::abs(a) < 1e-12) {
    Point m;
    for (const auto& p : poly) m = m + p;
    return m * (1.0 / static_cast<double>(poly.size()));
  }
  Point c;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point p = poly[i], q = poly[(i + 1) % poly.size()];
    const double w = cross(p, q);
    c = c + (p + q) * w;
  }
  return c * (1.0 / (6.0 * a));
}

Point closest_on_segment(Point p, Point a, Point b) {
  const Point ab = b - a;
  const double len2 = dot(ab, ab);
  if (len2 == 0.0) return a;
  const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
  return a + ab * t;
}

double boundary_distance(Point p, const Polygon& poly, Point* nearest) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point q = closest_on_segment(p, poly[i], poly[(i + 1) % poly.size()]);
    const double d = distance(p, q);
    if (d < best) {
      best = d;
      if (nearest) *nearest = q;
    }
  }
  return best;
}

namespace {

bool on_segment(Point p, Point a, Point b) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

int orientation(Point a, Point b, Point c) {
  const double v = cross(b - a, c - a);
  return (v > 0) - (v < 0);
}

bool segments_touch(Point a, Point b, Point c, Point d) {
  const int o1 = orientation(a, b, c), o2 = orientation(a, b, d);
  const int o3 = orientation(c, d, a), o4 = orientation(c, d, b);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(c, a, b)) return true;
  if (o2 == 0 && on_segment(d, a, b)) return true;
  if (o3 == 0 && on_segment(a, c, d)) return true;
  if (o4 == 0 && on_segment(b, c, d)) return true;
  return false;
}

}  // namespace

bool is_simple(const Polygon& poly) {
  const std::size_t n = poly.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
      if (adjacent) continue;
      if (segments_touch(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n])) return false;
    }
  }
  return true;
}

Polygon canonicalize(const Polygon& poly) {
  Polygon ring;
  for (const auto& p : poly) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw GeometryError("canonicalize: non-finite vertex");
    if (ring.empty() || !(ring.back() == p)) ring.push_back(p);
  }
  while (ring.size() > 1 && ring.front() == ring.back()) ring.pop_back();
  // Drop exactly collinear vertices until none remain.
  bool changed = true;
  while (changed && ring.size() >= 3) {
    changed = false;
    for (std::size_t i = 0; i < ring.size() && ring.size() >= 3; ++i) {
      const Point prev = ring[(i + ring.size() - 1) % ring.size()];
      const Point next = ring[(i + 1) % ring.size()];
      const Point a = ring[i] - prev, b = next - ring[i];
      if (cross(a, b) == 0.0 && dot(a, b) >= 0.0) {
        ring.erase(ring.begin() + static_cast<std::ptrdiff_t>(i));
        changed = true;
        --i;
      }
    }
  }
  if (ring.size() < 3) throw GeometryError("canonicalize: polygon has fewer than 3 distinct vertices");
  const double a = signed_area(ring);
  if (a == 0.0) throw GeometryError("canonicalize: polygon has zero area");
  if (a < 0.0) std::reverse(ring.begin(), ring.end());
  const auto start = std::min_element(ring.begin(), ring.end(), [](Point p, Point q) {
    return p.y < q.y || (p.y == q.y && p.x < q.x);
  });
  std::rotate(ring.begin(), start, ring.end());
  return ring;
}

namespace {

/// Point at arc length `t` along the chain `pts` (closed if `closed`), given cumulative lengths.
Point point_at(const std::vector<Point>& pts, const std::vector<double>& cum, double t, bool closed) {
  const std::size_t segs = closed ? pts.size() : pts.size() - 1;
  auto it = std::upper_bound(cum.begin(), cum.begin() + static_cast<std::ptrdiff_t>(segs) + 1, t);
  std::size_t seg = it == cum.begin() ? 0 : static_cast<std::size_t>(it - cum.begin()) - 1;
  if (seg >= segs) seg = segs - 1;
  const Point a = pts[seg], b = pts[(seg + 1) % pts.size()];
  const double len = cum[seg + 1] - cum[seg];
  if (len <= 0.0) return a;
  const double u = std::clamp((t - cum[seg]) / len, 0.0, 1.0);
  return a + (b - a) * u;
}

std::vector<double> cumulative(const std::vector<Point>& pts, bool closed) {
  const std::size_t segs = closed ? pts.size() : pts.size() - 1;
  std::vector<double> cum(segs + 1, 0.0);
  for (std::size_t i = 0; i < segs; ++i) cum[i + 1] = cum[i] + distance(pts[i], pts[(i + 1) % pts.size()]);
  return cum;
}

}  // namespace

std::vector<Point> resample_contour(const Polygon& poly, int count) {
  if (count < 3) throw GeometryError("resample_contour: need at least 3 samples, got " + std::to_string(count));
  const Polygon ring = canonicalize(poly);
  const auto cum = cumulative(ring, true);
  const double total = cum.back();
  if (!(total > 0.0)) throw GeometryError("resample_contour: zero perimeter");
  std::vector<Point> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) out.push_back(point_at(ring, cum, total * k / count, true));
  return out;
}

Polyline resample_polyline(const Polyline& line, int count) {
  if (line.empty()) throw GeometryError("resample_polyline: empty polyline");
  if (count < 2) throw GeometryError("resample_polyline: need at least 2 samples");
  if (line.size() == 1) return Polyline(static_cast<std::size_t>(count), line.front());
  const auto cum = cumulative(line, false);
  const double total = cum.back();
  Polyline out;
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    if (k == count - 1) {
      out.push_back(line.back());
    } else {
      out.push_back(point_at(line, cum, total * k / (count - 1), false));
    }
  }
  return out;
}

Polyline centerline_gt(const Polygon& poly, int count) {
  Polygon ring = canonicalize(poly);
  if (ring.size() < 4) {
    Polygon dense;
    for (std::size_t i = 0; i < ring.size(); ++i) {
      dense.push_back(ring[i]);
      dense.push_back((ring[i] + ring[(i + 1) % ring.size()]) * 0.5);
    }
    ring = dense;
  }
  const std::size_t n = ring.size();
  std::vector<Point> dir(n);
  std::vector<double> len(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Point e = ring[(i + 1) % n] - ring[i];
    len[i] = norm(e);
    dir[i] = e * (1.0 / len[i]);
  }
  // Cap-ness of edge i: previous and next edges pointing in opposite directions.
  std::vector<double> cap(n);
  for (std::size_t i = 0; i < n; ++i) cap[i] = -dot(dir[(i + n - 1) % n], dir[(i + 1) % n]);
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + len[i];
  const double total = prefix[n];

  double best = -std::numeric_limits<double>::infinity();
  std::size_t bi = 0, bj = 2;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;
      const double inner = prefix[j] - prefix[i + 1];  // edges i+1 .. j-1
      const double outer = total - inner - len[i] - len[j];
      const double score = cap[i] + cap[j] - (len[i] + len[j]) / total - std::abs(inner - outer) / total;
      if (score > best) {
        best = score;
        bi = i;
        bj = j;
      }
    }
  }
  // Chain through vertex 0 (the canonical start) is v_{j+1} .. v_i; the other is v_{i+1} .. v_j.
  Polyline upper, lower;
  for (std::size_t k = bj + 1; k != bi + 1 + n; ++k) upper.push_back(ring[k % n]);
  for (std::size_t k = bi + 1; k <= bj; ++k) lower.push_back(ring[k]);
  const Polyline u = resample_polyline(upper, count);
  const Polyline l = resample_polyline(lower, count);
  Polyline center(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    center[static_cast<std::size_t>(k)] = (u[static_cast<std::size_t>(k)] + l[static_cast<std::size_t>(count - 1 - k)]) * 0.5;
  }
  return center;
}

std::vector<Point> apply_offsets(const std::vector<Point>& points, const std::vector<Point>& offsets, double width,
                                 double height) {
  if (points.size() != offsets.size()) {
    throw GeometryError("apply_offsets: " + std::to_string(points.size()) + " points but " +
                        std::to_string(offsets.size()) + " offsets");
  }
  std::vector<Point> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Point p = points[i] + offsets[i];
    out[i] = {std::clamp(p.x, 0.0, width), std::clamp(p.y, 0.0, height)};
  }
  return out;
}

namespace {

void douglas_peucker(const Polygon& pts, std::size_t first, std::size_t last, double eps, std::vector<bool>& keep) {
  std::vector<std::pair<std::size_t, std::size_t>> stack{{first, last}};
  const std::size_t n = pts.size();
  while (!stack.empty()) {
    const auto [a, b] = stack.back();
    stack.pop_back();
    if (b <= a + 1) continue;
    double worst = -1.0;
    std::size_t idx = a;
    for (std::size_t k = a + 1; k < b; ++k) {
      const double d = distance(pts[k % n], closest_on_segment(pts[k % n], pts[a % n], pts[b % n]));
      if (d > worst) {
        worst = d;
        idx = k;
      }
    }
    if (worst > eps) {
      keep[idx % n] = true;
      stack.push_back({a, idx});
      stack.push_back({idx, b});
    }
  }
}

}  // namespace

Polygon simplify_closed(const Polygon& poly, double epsilon) {
  const std::size_t n = poly.size();
  if (n <= 3) return poly;
  std::size_t far = 0;
  double far_d = -1.0;
  for (std::size_t k = 1; k < n; ++k) {
    const double d = distance(poly[0], poly[k]);
    if (d > far_d) {
      far_d = d;
      far = k;
    }
  }
  std::vector<bool> keep(n, false);
  keep[0] = keep[far] = true;
  douglas_peucker(poly, 0, far, epsilon, keep);
  douglas_peucker(poly, far, n, epsilon, keep);
  Polygon out;
  for (std::size_t k = 0; k < n; ++k)
    if (keep[k]) out.push_back(poly[k]);
  if (out.size() < 3) return poly;
  return out;
}

}  // namespace mixnet::geom
