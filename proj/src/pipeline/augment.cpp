#include "mixnet/pipeline/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "mixnet/geometry/iou.hpp"

namespace mixnet {

using geom::Point;
using geom::Polygon;

AugmentConfig AugmentConfig::none() {
  AugmentConfig c;
  c.rotate = c.crop = c.flip = c.color_jitter = false;
  return c;
}

AugmentConfig AugmentConfig::from_kv(const KeyValueConfig& kv) {
  AugmentConfig c;
  c.rotate = kv.get_bool("rotate", c.rotate);
  c.max_rotation_deg = kv.get_double("max_rotation_deg", c.max_rotation_deg);
  c.crop = kv.get_bool("crop", c.crop);
  c.min_crop = kv.get_double("min_crop", c.min_crop);
  c.flip = kv.get_bool("flip", c.flip);
  c.color_jitter = kv.get_bool("color_jitter", c.color_jitter);
  c.jitter = kv.get_double("jitter", c.jitter);
  c.min_visible = kv.get_double("min_visible", c.min_visible);
  if (!(c.min_crop > 0 && c.min_crop <= 1)) throw ConfigError("augment.min_crop must lie in (0, 1]");
  if (c.jitter < 0 || c.jitter >= 1) throw ConfigError("augment.jitter must lie in [0, 1)");
  return c;
}

std::string AugmentConfig::to_text() const {
  std::ostringstream out;
  out << std::boolalpha << "rotate = " << rotate << "\nmax_rotation_deg = " << max_rotation_deg << "\ncrop = " << crop
      << "\nmin_crop = " << min_crop << "\nflip = " << flip << "\ncolor_jitter = " << color_jitter
      << "\njitter = " << jitter << "\nmin_visible = " << min_visible << "\n";
  return out.str();
}

namespace {

/// p' = m * p + t
struct Affine {
  double a = 1, b = 0, c = 0, d = 1;
  Point t{0, 0};

  Point apply(Point p) const { return {a * p.x + b * p.y + t.x, c * p.x + d * p.y + t.y}; }
  Affine inverse() const {
    const double det = a * d - b * c;
    Affine inv{d / det, -b / det, -c / det, a / det, {0, 0}};
    const Point shifted = inv.apply(t);
    inv.t = {-shifted.x, -shifted.y};
    return inv;
  }
};

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Image warp(const Image& src, const Affine& forward) {
  const Affine inv = forward.inverse();
  Image out(src.width, src.height);
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x) {
      const Point s = inv.apply({x + 0.5, y + 0.5});
      const double fx = s.x - 0.5, fy = s.y - 0.5;
      const int x0 = static_cast<int>(std::floor(fx)), y0 = static_cast<int>(std::floor(fy));
      const double wx = fx - x0, wy = fy - y0;
      for (int c = 0; c < 3; ++c) {
        double acc = 0;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const int xx = x0 + dx, yy = y0 + dy;
            if (xx < 0 || yy < 0 || xx >= src.width || yy >= src.height) continue;
            acc += (dx ? wx : 1 - wx) * (dy ? wy : 1 - wy) * src.at(xx, yy, c);
          }
        out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(acc), 0L, 255L));
      }
    }
  return out;
}

Affine draw_transform(const AugmentConfig& cfg, int w, int h, std::mt19937_64& rng) {
  const bool flip = cfg.flip && uniform(rng, 0, 1) < 0.5;
  const double theta = cfg.rotate ? uniform(rng, -cfg.max_rotation_deg, cfg.max_rotation_deg) * std::numbers::pi / 180
                                  : 0.0;
  const double s = cfg.crop ? 1.0 / uniform(rng, cfg.min_crop, 1.0) : 1.0;
  const double cx = w / 2.0, cy = h / 2.0;
  const double dx = cfg.crop ? uniform(rng, -1, 1) * (s - 1) * cx : 0.0;
  const double dy = cfg.crop ? uniform(rng, -1, 1) * (s - 1) * cy : 0.0;
  const double f = flip ? -1.0 : 1.0;
  const double co = std::cos(theta), si = std::sin(theta);
  Affine m{s * co * f, -s * si, s * si * f, s * co, {0, 0}};
  const Point mc = m.apply({cx, cy});
  m.t = {cx - mc.x + dx, cy - mc.y + dy};
  return m;
}

}  // namespace

Sample augment(const Sample& in, const AugmentConfig& cfg, std::mt19937_64& rng) {
  const int w = in.image.width, h = in.image.height;
  const Polygon frame{{0, 0}, {double(w), 0}, {double(w), double(h)}, {0, double(h)}};
  Sample out;
  out.id = in.id;
  bool accepted = false;
  for (int attempt = 0; attempt < 10 && !accepted; ++attempt) {
    const Affine m = draw_transform(cfg, w, h, rng);
    std::vector<Polygon> kept;
    accepted = true;
    for (const auto& poly : in.polygons) {
      Polygon moved;
      for (const Point& p : poly) moved.push_back(m.apply(p));
      if (geom::signed_area(moved) < 0) std::reverse(moved.begin(), moved.end());
      const double full = geom::area(moved);
      const Polygon visible = geom::clip_convex(moved, frame);
      const double seen = visible.size() >= 3 ? geom::area(visible) : 0.0;
      if (seen < 2.0) continue;
      if (seen < cfg.min_visible * full || !geom::is_simple(visible)) {
        accepted = false;
        break;
      }
      kept.push_back(geom::canonicalize(visible));
    }
    if (accepted) {
      out.image = warp(in.image, m);
      out.polygons = std::move(kept);
    }
  }
  if (!accepted) out = in;

  if (cfg.color_jitter) {
    const double brightness = uniform(rng, 1 - cfg.jitter, 1 + cfg.jitter);
    const double contrast = uniform(rng, 1 - cfg.jitter, 1 + cfg.jitter);
    double mean = 0;
    for (auto v : out.image.rgb) mean += v;
    mean /= std::max<std::size_t>(out.image.rgb.size(), 1);
    for (auto& v : out.image.rgb) {
      const double x = ((v - mean) * contrast + mean) * brightness;
      v = static_cast<std::uint8_t>(std::clamp(std::lround(x), 0L, 255L));
    }
  }
  return out;
}

}  // namespace mixnet
