#include "mixnet/geometry/raster.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace mixnet::geom {

bool contains_even_odd(const Polygon& poly, Point p) {
  bool in = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point a = poly[i], b = poly[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x) in = !in;
    }
  }
  return in;
}

Mask rasterize_mask(const Polygon& poly, int height, int width) {
  Mask mask(height, width, 0);
  const std::size_t n = poly.size();
  if (n < 3) return mask;
  std::vector<double> xs;
  for (int i = 0; i < height; ++i) {
    const double y = i + 0.5;
    xs.clear();
    for (std::size_t e = 0; e < n; ++e) {
      const Point a = poly[e], b = poly[(e + 1) % n];
      if ((a.y > y) != (b.y > y)) xs.push_back(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      // Pixel j is inside when its center j + 0.5 lies in [x0, x1).
      const int j0 = std::max(0, static_cast<int>(std::ceil(xs[k] - 0.5)));
      const int j1 = std::min(width, static_cast<int>(std::ceil(xs[k + 1] - 0.5)));
      for (int j = j0; j < j1; ++j) mask.at(i, j) = 1;
    }
  }
  return mask;
}

namespace {

// Clockwise on screen (y down): E, SE, S, SW, W, NW, N, NE.
constexpr std::array<int, 8> kDi = {0, 1, 1, 1, 0, -1, -1, -1};
constexpr std::array<int, 8> kDj = {1, 1, 0, -1, -1, -1, 0, 1};

struct Pixel {
  int i, j;
  friend bool operator==(Pixel a, Pixel b) { return a.i == b.i && a.j == b.j; }
};

std::vector<Pixel> moore_trace(const Grid<int>& labels, int label, Pixel start) {
  auto is_fg = [&](int i, int j) { return labels.inside(i, j) && labels.at(i, j) == label; };
  std::vector<Pixel> out{start};
  Pixel cur = start;
  int back = 4;  // the west neighbor of the raster-first pixel is background
  const std::size_t limit = 4 * labels.data.size() + 8;
  while (out.size() < limit) {
    int found = -1;
    for (int k = 1; k <= 8; ++k) {
      const int d = (back + k) % 8;
      if (is_fg(cur.i + kDi[d], cur.j + kDj[d])) {
        found = d;
        break;
      }
    }
    if (found < 0) break;  // isolated pixel
    const Pixel next{cur.i + kDi[found], cur.j + kDj[found]};
    // Stop when the first move is about to repeat.
    if (cur == start && out.size() > 1 && next == out[1]) {
      out.pop_back();
      break;
    }
    back = found % 2 == 0 ? (found + 6) % 8 : (found + 5) % 8;
    cur = next;
    out.push_back(cur);
  }
  return out;
}

}  // namespace

std::vector<Polygon> extract_rough_contours(const Grid<float>& probability, double threshold, int min_area,
                                            double simplify_epsilon) {
  const int H = probability.height, W = probability.width;
  Grid<int> labels(H, W, 0);
  std::vector<Polygon> out;
  int next_label = 0;
  std::vector<Pixel> queue;
  for (int i = 0; i < H; ++i) {
    for (int j = 0; j < W; ++j) {
      if (labels.at(i, j) != 0 || !(probability.at(i, j) > threshold)) continue;
      const int label = ++next_label;
      queue.assign(1, {i, j});
      labels.at(i, j) = label;
      std::size_t head = 0;
      while (head < queue.size()) {
        const Pixel p = queue[head++];
        for (int d = 0; d < 8; ++d) {
          const int ni = p.i + kDi[d], nj = p.j + kDj[d];
          if (!labels.inside(ni, nj) || labels.at(ni, nj) != 0 || !(probability.at(ni, nj) > threshold)) continue;
          labels.at(ni, nj) = label;
          queue.push_back({ni, nj});
        }
      }
      if (static_cast<int>(queue.size()) < min_area) continue;
      const auto boundary = moore_trace(labels, label, {i, j});
      if (boundary.size() < 2) continue;
      const std::size_t n = boundary.size();
      Polygon ring;
      ring.reserve(n);
      for (std::size_t k = 0; k < n; ++k) {
        const Pixel prev = boundary[(k + n - 1) % n], cur = boundary[k], next = boundary[(k + 1) % n];
        const Point c{cur.j + 0.5, cur.i + 0.5};
        Point t{static_cast<double>(next.j - prev.j), static_cast<double>(next.i - prev.i)};
        Point normal{t.y, -t.x};
        if (norm(t) == 0.0) normal = Point{static_cast<double>(cur.j - prev.j), static_cast<double>(cur.i - prev.i)};
        const double len = norm(normal);
        ring.push_back(len > 0 ? c + normal * (0.5 / len) : c);
      }
      try {
        out.push_back(canonicalize(simplify_closed(canonicalize(ring), simplify_epsilon)));
      } catch (const GeometryError&) {
        continue;
      }
    }
  }
  return out;
}

LabelSet label_fields(const std::vector<Polygon>& polygons, int height, int width) {
  LabelSet labels{Grid<float>(height, width), Grid<float>(height, width), Grid<float>(height, width),
                  Grid<float>(height, width), Grid<int>(height, width)};
  std::vector<double> raw(static_cast<std::size_t>(height) * width, 0.0);
  bool warned = false;
  for (std::size_t k = 0; k < polygons.size(); ++k) {
    Polygon poly;
    try {
      poly = canonicalize(polygons[k]);
    } catch (const GeometryError&) {
      spdlog::warn("label_fields: skipping degenerate polygon {}", k);
      continue;
    }
    const Mask mask = rasterize_mask(poly, height, width);
    for (int i = 0; i < height; ++i) {
      for (int j = 0; j < width; ++j) {
        if (!mask.at(i, j)) continue;
        if (labels.instance.at(i, j) != 0 && !warned) {
          spdlog::warn("label_fields: ground-truth polygons overlap; later instance wins");
          warned = true;
        }
        const Point p{j + 0.5, i + 0.5};
        double best = std::numeric_limits<double>::infinity();
        Point dir;
        for (std::size_t e = 0; e < poly.size(); ++e) {
          const Point a = poly[e], b = poly[(e + 1) % poly.size()];
          const Point q = closest_on_segment(p, a, b);
          const double d = distance(p, q);
          if (d < best) {
            best = d;
            if (d > 1e-12) {
              dir = (q - p) * (1.0 / d);
            } else {
              const Point edge = b - a;
              dir = Point{edge.y, -edge.x} * (1.0 / norm(edge));
            }
          }
        }
        labels.classification.at(i, j) = 1.0f;
        labels.instance.at(i, j) = static_cast<int>(k) + 1;
        labels.orientation_x.at(i, j) = static_cast<float>(dir.x);
        labels.orientation_y.at(i, j) = static_cast<float>(dir.y);
        raw[static_cast<std::size_t>(i) * width + j] = best;
      }
    }
  }
  std::vector<double> peak(polygons.size() + 1, 0.0);
  for (std::size_t n = 0; n < raw.size(); ++n) {
    const int id = labels.instance.data[n];
    peak[static_cast<std::size_t>(id)] = std::max(peak[static_cast<std::size_t>(id)], raw[n]);
  }
  for (std::size_t n = 0; n < raw.size(); ++n) {
    const int id = labels.instance.data[n];
    if (id == 0) continue;
    const double m = peak[static_cast<std::size_t>(id)];
    labels.distance.data[n] = m > 0 ? static_cast<float>(raw[n] / m) : 0.0f;
  }
  return labels;
}

void write_pgm(const std::string& path, const Mask& mask) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_pgm: cannot open " + path);
  out << "P5\n" << mask.width << " " << mask.height << "\n255\n";
  for (auto v : mask.data) out.put(static_cast<char>(v ? 255 : 0));
}

}  // namespace mixnet::geom
