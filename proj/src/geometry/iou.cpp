#include "mixnet/geometry/iou.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mixnet/geometry/raster.hpp"

namespace mixnet::geom {

namespace {

bool inside_triangle(Point p, Point a, Point b, Point c) {
  // Positive orientation assumed; boundary counts as inside so ears never swallow a vertex.
  return cross(b - a, p - a) >= 0 && cross(c - b, p - b) >= 0 && cross(a - c, p - c) >= 0;
}

struct Box {
  double x0, y0, x1, y1;
};

Box bounds(const Polygon& p) {
  Box b{p[0].x, p[0].y, p[0].x, p[0].y};
  for (const auto& q : p) {
    b.x0 = std::min(b.x0, q.x);
    b.y0 = std::min(b.y0, q.y);
    b.x1 = std::max(b.x1, q.x);
    b.y1 = std::max(b.y1, q.y);
  }
  return b;
}

bool overlaps(const Box& a, const Box& b) { return a.x0 < b.x1 && b.x0 < a.x1 && a.y0 < b.y1 && b.y0 < a.y1; }

}  // namespace

std::vector<Triangle> triangulate(const Polygon& poly) {
  Polygon ring = poly;
  if (signed_area(ring) < 0) std::reverse(ring.begin(), ring.end());
  std::vector<std::size_t> idx(ring.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::vector<Triangle> out;
  std::size_t guard = 0;
  while (idx.size() > 3 && guard < 4 * ring.size() * ring.size()) {
    bool clipped = false;
    const std::size_t m = idx.size();
    for (std::size_t k = 0; k < m; ++k) {
      const Point a = ring[idx[(k + m - 1) % m]], b = ring[idx[k]], c = ring[idx[(k + 1) % m]];
      const double turn = cross(b - a, c - b);
      if (turn <= 0) continue;
      bool ear = true;
      for (std::size_t q = 0; q < m && ear; ++q) {
        if (q == k || q == (k + 1) % m || q == (k + m - 1) % m) continue;
        const Point p = ring[idx[q]];
        if (p == a || p == b || p == c) continue;
        if (inside_triangle(p, a, b, c)) ear = false;
      }
      if (!ear) continue;
      out.push_back({a, b, c});
      idx.erase(idx.begin() + static_cast<std::ptrdiff_t>(k));
      clipped = true;
      break;
    }
    if (!clipped) {
      // Only collinear or degenerate corners remain; drop one to make progress.
      std::size_t drop = 0;
      double smallest = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < m; ++k) {
        const Point a = ring[idx[(k + m - 1) % m]], b = ring[idx[k]], c = ring[idx[(k + 1) % m]];
        const double t = std::abs(cross(b - a, c - b));
        if (t < smallest) {
          smallest = t;
          drop = k;
        }
      }
      idx.erase(idx.begin() + static_cast<std::ptrdiff_t>(drop));
    }
    ++guard;
  }
  if (idx.size() == 3) {
    const Triangle t{ring[idx[0]], ring[idx[1]], ring[idx[2]]};
    if (cross(t[1] - t[0], t[2] - t[1]) > 0) out.push_back(t);
  }
  return out;
}

Polygon clip_convex(const Polygon& subject, const Polygon& clip) {
  Polygon out = subject;
  for (std::size_t e = 0; e < clip.size() && !out.empty(); ++e) {
    const Point a = clip[e], b = clip[(e + 1) % clip.size()];
    const Point ab = b - a;
    Polygon in = std::move(out);
    out.clear();
    for (std::size_t i = 0; i < in.size(); ++i) {
      const Point p = in[i], q = in[(i + 1) % in.size()];
      const double sp = cross(ab, p - a), sq = cross(ab, q - a);
      if (sp >= 0) out.push_back(p);
      if ((sp >= 0) != (sq >= 0)) {
        const double t = sp / (sp - sq);
        out.push_back(p + (q - p) * t);
      }
    }
  }
  return out;
}

double intersection_area(const Polygon& a, const Polygon& b) {
  if (!overlaps(bounds(a), bounds(b))) return 0.0;
  const auto ta = triangulate(a);
  const auto tb = triangulate(b);
  std::vector<Box> bb;
  bb.reserve(tb.size());
  for (const auto& t : tb) bb.push_back(bounds(Polygon(t.begin(), t.end())));
  double total = 0.0;
  for (const auto& t : ta) {
    const Polygon pt(t.begin(), t.end());
    const Box box = bounds(pt);
    for (std::size_t j = 0; j < tb.size(); ++j) {
      if (!overlaps(box, bb[j])) continue;
      total += area(clip_convex(pt, Polygon(tb[j].begin(), tb[j].end())));
    }
  }
  return total;
}

double raster_iou(const Polygon& a, const Polygon& b, int resolution) {
  const Box ba = bounds(a), bbx = bounds(b);
  const Box u{std::min(ba.x0, bbx.x0), std::min(ba.y0, bbx.y0), std::max(ba.x1, bbx.x1), std::max(ba.y1, bbx.y1)};
  const double sx = (u.x1 - u.x0) / resolution, sy = (u.y1 - u.y0) / resolution;
  long inter = 0, uni = 0;
  for (int i = 0; i < resolution; ++i) {
    for (int j = 0; j < resolution; ++j) {
      const Point p{u.x0 + (j + 0.5) * sx, u.y0 + (i + 0.5) * sy};
      const bool ia = contains_even_odd(a, p), ib = contains_even_odd(b, p);
      inter += ia && ib;
      uni += ia || ib;
    }
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double polygon_iou(const Polygon& a, const Polygon& b) {
  if (a.size() < 3 || b.size() < 3) {
    spdlog::warn("polygon_iou: degenerate polygon ({} and {} vertices), IoU set to 0", a.size(), b.size());
    return 0.0;
  }
  if (!is_simple(a) || !is_simple(b)) return raster_iou(a, b, 512);
  const double area_a = area(a), area_b = area(b);
  if (!(area_a > 1e-12) || !(area_b > 1e-12)) {
    spdlog::warn("polygon_iou: zero-area polygon, IoU set to 0");
    return 0.0;
  }
  const double inter = intersection_area(a, b);
  const double uni = area_a + area_b - inter;
  if (!(uni > 0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

}  // namespace mixnet::geom
