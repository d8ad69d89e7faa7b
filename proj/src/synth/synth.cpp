#include "mixnet/synth/synth.hpp"

#include <spdlog/spdlog.h>
#include <zlib.h>

#include <algorithm>
#include <functional>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"
#include "mixnet/eval/records.hpp"
#include "mixnet/geometry/raster.hpp"

namespace mixnet::synth {

using geom::Point;
using geom::Polygon;

void SceneSpec::validate() const {
  if (width < 16 || height < 16) throw ConfigError("scene extents must be at least 16 px");
  if (min_instances < 0 || max_instances < min_instances) throw ConfigError("invalid instance count range");
  if (max_curvature < 0) throw ConfigError("max_curvature must be non-negative");
  if (!(min_aspect >= 1) || max_aspect < min_aspect) throw ConfigError("invalid aspect range");
  double total = 0;
  for (double m : size_mix) {
    if (m < 0) throw ConfigError("size_mix entries must be non-negative");
    total += m;
  }
  if (!(total > 0)) throw ConfigError("size_mix must have a positive entry");
  if (!(small_max_area > 0) || medium_max_area <= small_max_area) throw ConfigError("invalid bucket area limits");
  if (clutter < 0 || !(stripe_ratio > 0) || spine_points < 2 || placement_tries < 1) {
    throw ConfigError("invalid clutter, stripe_ratio, spine_points or placement_tries");
  }
}

SceneSpec SceneSpec::from_kv(const KeyValueConfig& kv) {
  SceneSpec s;
  s.width = static_cast<int>(kv.get_int("width", s.width));
  s.height = static_cast<int>(kv.get_int("height", s.height));
  s.min_instances = static_cast<int>(kv.get_int("min_instances", s.min_instances));
  s.max_instances = static_cast<int>(kv.get_int("max_instances", s.max_instances));
  s.max_curvature = kv.get_double("max_curvature", s.max_curvature);
  s.min_aspect = kv.get_double("min_aspect", s.min_aspect);
  s.max_aspect = kv.get_double("max_aspect", s.max_aspect);
  if (kv.has("size_mix")) {
    const auto m = kv.get_double_list("size_mix");
    if (m.size() != 3) throw ConfigError("size_mix must list 3 values");
    std::copy(m.begin(), m.end(), s.size_mix.begin());
  }
  s.small_max_area = kv.get_double("small_max_area", s.small_max_area);
  s.medium_max_area = kv.get_double("medium_max_area", s.medium_max_area);
  s.clutter = static_cast<int>(kv.get_int("clutter", s.clutter));
  s.stripe_ratio = kv.get_double("stripe_ratio", s.stripe_ratio);
  s.spine_points = static_cast<int>(kv.get_int("spine_points", s.spine_points));
  s.placement_tries = static_cast<int>(kv.get_int("placement_tries", s.placement_tries));
  s.validate();
  return s;
}

std::string SceneSpec::to_text() const {
  std::ostringstream out;
  out.precision(17);
  out << "width = " << width << "\nheight = " << height << "\nmin_instances = " << min_instances
      << "\nmax_instances = " << max_instances << "\nmax_curvature = " << max_curvature
      << "\nmin_aspect = " << min_aspect << "\nmax_aspect = " << max_aspect << "\nsize_mix = [" << size_mix[0]
      << ", " << size_mix[1] << ", " << size_mix[2] << "]\nsmall_max_area = " << small_max_area
      << "\nmedium_max_area = " << medium_max_area << "\nclutter = " << clutter << "\nstripe_ratio = " << stripe_ratio
      << "\nspine_points = " << spine_points << "\nplacement_tries = " << placement_tries << "\n";
  return out.str();
}

std::array<double, 2> SceneSpec::area_range(Bucket bucket) const {
  switch (bucket) {
    case kSmall:
      return {0.4 * small_max_area, 0.95 * small_max_area};
    case kMedium:
      return {1.15 * small_max_area, 0.92 * medium_max_area};
    case kLarge:
      return {1.08 * medium_max_area, 1.8 * medium_max_area};
  }
  return {0, 0};
}

namespace {

struct Bezier {
  std::array<Point, 4> p;
  Point at(double t) const {
    const double u = 1 - t;
    return p[0] * (u * u * u) + p[1] * (3 * u * u * t) + p[2] * (3 * u * t * t) + p[3] * (t * t * t);
  }
  Point tangent(double t) const {
    const double u = 1 - t;
    return (p[1] - p[0]) * (3 * u * u) + (p[2] - p[1]) * (6 * u * t) + (p[3] - p[2]) * (3 * t * t);
  }
};

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

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

Ribbon translated(Ribbon r, Point d) {
  for (auto& p : r.polygon) p = p + d;
  for (auto& p : r.spine) p = p + d;
  return r;
}

using Rgb = std::array<double, 3>;

double luminance(const Rgb& c) { return 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]; }

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

/// Smooth colour field from a bilinear 5x5 control grid plus fine grain.
std::vector<Rgb> background(int w, int h, std::mt19937_64& rng) {
  constexpr int kGrid = 5;
  Rgb base{uniform(rng, 50, 205), uniform(rng, 50, 205), uniform(rng, 50, 205)};
  std::array<Rgb, kGrid * kGrid> nodes;
  for (auto& n : nodes)
    for (int c = 0; c < 3; ++c) n[static_cast<std::size_t>(c)] = base[static_cast<std::size_t>(c)] + uniform(rng, -45, 45);
  std::vector<Rgb> out(static_cast<std::size_t>(w) * h);
  std::normal_distribution<double> grain(0.0, 4.0);
  for (int y = 0; y < h; ++y) {
    const double gy = (y + 0.5) / h * (kGrid - 1);
    const int iy = std::min(static_cast<int>(gy), kGrid - 2);
    const double fy = gy - iy;
    for (int x = 0; x < w; ++x) {
      const double gx = (x + 0.5) / w * (kGrid - 1);
      const int ix = std::min(static_cast<int>(gx), kGrid - 2);
      const double fx = gx - ix;
      Rgb& px = out[static_cast<std::size_t>(y) * w + x];
      for (int c = 0; c < 3; ++c) {
        auto node = [&](int yy, int xx) { return nodes[static_cast<std::size_t>(yy * kGrid + xx)][static_cast<std::size_t>(c)]; };
        const double v = (1 - fy) * ((1 - fx) * node(iy, ix) + fx * node(iy, ix + 1)) +
                         fy * ((1 - fx) * node(iy + 1, ix) + fx * node(iy + 1, ix + 1));
        px[static_cast<std::size_t>(c)] = v + grain(rng);
      }
    }
  }
  return out;
}

/// Solid discs, boxes and bars that share colours with text but never its stripes.
void draw_clutter(std::vector<Rgb>& img, int w, int h, int max_shapes, std::mt19937_64& rng) {
  const int shapes = uniform_int(rng, 0, max_shapes);
  for (int s = 0; s < shapes; ++s) {
    const Rgb colour{uniform(rng, 0, 255), uniform(rng, 0, 255), uniform(rng, 0, 255)};
    const int kind = uniform_int(rng, 0, 2);
    const double cx = uniform(rng, 0, w), cy = uniform(rng, 0, h);
    Polygon shape;
    if (kind == 0) {
      const double r = uniform(rng, 3, 14);
      for (int k = 0; k < 16; ++k) {
        const double a = 2 * std::numbers::pi * k / 16;
        shape.push_back({cx + r * std::cos(a), cy + r * std::sin(a)});
      }
    } else {
      const double len = kind == 1 ? uniform(rng, 5, 24) : uniform(rng, 15, 50);
      const double thick = kind == 1 ? uniform(rng, 5, 24) : uniform(rng, 1.5, 3.5);
      const double a = uniform(rng, 0, std::numbers::pi);
      const Point u{std::cos(a), std::sin(a)}, v{-u.y, u.x};
      const Point c{cx, cy};
      shape = {c - u * (len / 2) - v * (thick / 2), c + u * (len / 2) - v * (thick / 2),
               c + u * (len / 2) + v * (thick / 2), c - u * (len / 2) + v * (thick / 2)};
    }
    const auto mask = geom::rasterize_mask(shape, h, w);
    for (std::size_t i = 0; i < mask.data.size(); ++i)
      if (mask.data[i]) img[i] = colour;
  }
}

/// Arc-length coordinate of the spine point nearest `p`.
double spine_coordinate(const geom::Polyline& spine, Point p) {
  double best = std::numeric_limits<double>::infinity(), u = 0, walked = 0;
  for (std::size_t i = 0; i + 1 < spine.size(); ++i) {
    const Point q = geom::closest_on_segment(p, spine[i], spine[i + 1]);
    const double d = geom::distance(p, q);
    if (d < best) {
      best = d;
      u = walked + geom::distance(spine[i], q);
    }
    walked += geom::distance(spine[i], spine[i + 1]);
  }
  return u;
}

void draw_ribbon(std::vector<Rgb>& img, int w, int h, const Ribbon& r, double stripe_ratio, std::mt19937_64& rng) {
  const auto mask = geom::rasterize_mask(r.polygon, h, w);
  Rgb mean{0, 0, 0};
  double count = 0;
  for (std::size_t i = 0; i < mask.data.size(); ++i) {
    if (!mask.data[i]) continue;
    for (int c = 0; c < 3; ++c) mean[static_cast<std::size_t>(c)] += img[i][static_cast<std::size_t>(c)];
    ++count;
  }
  if (count == 0) return;
  for (auto& m : mean) m /= count;
  const bool dark_ink = luminance(mean) > 110;
  Rgb ink;
  for (auto& v : ink) v = dark_ink ? uniform(rng, 0, 70) : uniform(rng, 185, 255);
  Rgb gap;
  const double mix = uniform(rng, 0.35, 0.6);
  for (int c = 0; c < 3; ++c) {
    gap[static_cast<std::size_t>(c)] = (1 - mix) * ink[static_cast<std::size_t>(c)] + mix * mean[static_cast<std::size_t>(c)];
  }
  const double period = std::max(3.0, stripe_ratio * r.width);
  const double phase = uniform(rng, 0, period);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.at(y, x)) continue;
      const double u = spine_coordinate(r.spine, {x + 0.5, y + 0.5}) + phase;
      const double f = u / period - std::floor(u / period);
      img[static_cast<std::size_t>(y) * w + x] = f < 0.55 ? ink : gap;
    }
  }
}

geom::Mask dilate(const geom::Mask& m, int radius) {
  geom::Mask out(m.height, m.width);
  for (int i = 0; i < m.height; ++i)
    for (int j = 0; j < m.width; ++j) {
      if (!m.at(i, j)) continue;
      for (int di = -radius; di <= radius; ++di)
        for (int dj = -radius; dj <= radius; ++dj)
          if (out.inside(i + di, j + dj)) out.at(i + di, j + dj) = 1;
    }
  return out;
}

/// Largest distance from the polygon-derived center line to the Bezier spine.
double spine_deviation(const Ribbon& r) {
  double worst = 0;
  for (const Point& p : geom::centerline_gt(r.polygon, 33)) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < r.spine.size(); ++i) {
      best = std::min(best, geom::distance(p, geom::closest_on_segment(p, r.spine[i], r.spine[i + 1])));
    }
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace

Ribbon make_ribbon(Point start, double angle, double length, double width, double bend1, double bend2,
                   int spine_points) {
  const Point u{std::cos(angle), std::sin(angle)}, v{-u.y, u.x};
  Bezier unit{{Point{0, 0}, Point{1.0 / 3, bend1}, Point{2.0 / 3, bend2}, Point{1, 0}}};
  constexpr int kDense = 512;
  std::vector<double> cum(kDense + 1, 0.0);
  for (int k = 1; k <= kDense; ++k) {
    cum[static_cast<std::size_t>(k)] =
        cum[static_cast<std::size_t>(k - 1)] + geom::distance(unit.at((k - 1.0) / kDense), unit.at(1.0 * k / kDense));
  }
  const double scale = length / cum.back();
  auto place = [&](Point q) { return start + u * (q.x * scale) + v * (q.y * scale); };

  Ribbon r;
  r.width = width;
  geom::Polyline top, bottom;
  for (int i = 0; i < spine_points; ++i) {
    const double target = cum.back() * i / (spine_points - 1);
    const auto it = std::lower_bound(cum.begin(), cum.end(), target);
    const int k = std::clamp(static_cast<int>(it - cum.begin()), 1, kDense);
    const double seg = cum[static_cast<std::size_t>(k)] - cum[static_cast<std::size_t>(k - 1)];
    const double t = (k - 1 + (seg > 0 ? (target - cum[static_cast<std::size_t>(k - 1)]) / seg : 0.0)) / kDense;
    const Point s = place(unit.at(t));
    Point d = unit.tangent(t);
    d = u * d.x + v * d.y;
    d = d * (1.0 / geom::norm(d));
    const Point n{-d.y, d.x};
    r.spine.push_back(s);
    top.push_back(s + n * (width / 2));
    bottom.push_back(s - n * (width / 2));
  }
  Polygon outline = top;
  outline.insert(outline.end(), bottom.rbegin(), bottom.rend());
  if (!geom::is_simple(outline)) throw geom::GeometryError("make_ribbon: outline self-intersects");
  r.polygon = geom::canonicalize(outline);
  return r;
}

Ribbon sample_ribbon(const SceneSpec& spec, Bucket bucket, std::mt19937_64& rng) {
  const auto range = spec.area_range(bucket);
  const double lo = bucket == kSmall ? 0.0 : (bucket == kMedium ? spec.small_max_area : spec.medium_max_area);
  const double hi = bucket == kSmall ? spec.small_max_area
                                     : (bucket == kMedium ? spec.medium_max_area : std::numeric_limits<double>::infinity());
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const double target = uniform(rng, range[0], range[1]);
    const double aspect = uniform(rng, spec.min_aspect, spec.max_aspect);
    const double width = std::sqrt(target / aspect), length = aspect * width;
    const double kappa = uniform(rng, 0.0, spec.max_curvature);
    const double side = uniform(rng, 0, 1) < 0.5 ? -1.0 : 1.0;
    const double second = uniform(rng, 0, 1) < 0.7 ? side : -side;
    const double angle = uniform(rng, -std::numbers::pi / 4, std::numbers::pi / 4);
    try {
      Ribbon r = make_ribbon({0, 0}, angle, length, width, kappa * side, kappa * second * uniform(rng, 0.5, 1.0),
                             spec.spine_points);
      const double a = geom::area(r.polygon);
      const Box b = bounds(r.polygon);
      if (a <= lo || a >= hi) continue;
      if (b.x1 - b.x0 > spec.width - 6 || b.y1 - b.y0 > spec.height - 6) continue;
      if (spine_deviation(r) > 0.9) continue;
      r.bucket = bucket;
      return r;
    } catch (const geom::GeometryError&) {
      continue;
    }
  }
  throw geom::GeometryError("sample_ribbon: no valid ribbon for the requested bucket");
}

Scene generate_scene(const SceneSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  const int w = spec.width, h = spec.height;
  auto pixels = background(w, h, rng);
  draw_clutter(pixels, w, h, spec.clutter, rng);

  Scene scene;
  geom::Mask occupied(h, w);
  std::discrete_distribution<int> pick_bucket(spec.size_mix.begin(), spec.size_mix.end());
  const int count = uniform_int(rng, spec.min_instances, spec.max_instances);
  // Largest first: small ribbons still fit into the gaps that big ones leave.
  std::vector<Bucket> buckets;
  for (int n = 0; n < count; ++n) buckets.push_back(static_cast<Bucket>(pick_bucket(rng)));
  std::sort(buckets.begin(), buckets.end(), std::greater<>());
  for (int n = 0; n < count; ++n) {
    const auto bucket = buckets[static_cast<std::size_t>(n)];
    bool placed = false;
    for (int attempt = 0; attempt < spec.placement_tries && !placed; ++attempt) {
      const Ribbon local = sample_ribbon(spec, bucket, rng);
      const Box b = bounds(local.polygon);
      const double dx = uniform(rng, 3 - b.x0, w - 3 - b.x1), dy = uniform(rng, 3 - b.y0, h - 3 - b.y1);
      Ribbon r = translated(local, {std::round(dx), std::round(dy)});
      const auto mask = geom::rasterize_mask(r.polygon, h, w);
      bool clash = false;
      for (std::size_t i = 0; i < mask.data.size() && !clash; ++i) clash = mask.data[i] && occupied.data[i];
      if (clash) continue;
      const auto grown = dilate(mask, 2);
      for (std::size_t i = 0; i < grown.data.size(); ++i) occupied.data[i] |= grown.data[i];
      scene.ribbons.push_back(std::move(r));
      placed = true;
    }
    if (!placed) {
      spdlog::warn("synth: could not place instance {} after {} tries, scene has fewer instances", n,
                   spec.placement_tries);
    }
  }
  for (const auto& r : scene.ribbons) draw_ribbon(pixels, w, h, r, spec.stripe_ratio, rng);

  scene.image = Image(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        scene.image.at(x, y, c) = to_byte(pixels[static_cast<std::size_t>(y) * w + x][static_cast<std::size_t>(c)]);
      }
  return scene;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(seed ^ mix(index + 1));
}

std::uint32_t file_crc32(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageError("cannot open " + path);
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return static_cast<std::uint32_t>(
      crc32(crc32(0L, Z_NULL, 0), reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size())));
}

DatasetManifest make_dataset(const SceneSpec& spec, int count, const std::string& dir, std::uint64_t seed) {
  namespace fs = std::filesystem;
  spec.validate();
  fs::create_directories(fs::path(dir) / "images");
  DatasetManifest m;
  m.seed = seed;
  m.spec = spec;
  std::vector<eval::ImageRecord> gt;
  for (int i = 0; i < count; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "%06d", i);
    const std::string file = std::string("images/") + id + ".png";
    try {
      const Scene scene = generate_scene(spec, derive_seed(seed, static_cast<std::uint64_t>(i)));
      const std::string path = (fs::path(dir) / file).string();
      write_png(path, scene.image);
      eval::ImageRecord rec{id, {}};
      for (const auto& r : scene.ribbons) rec.detections.push_back({r.polygon, 1.0});
      gt.push_back(std::move(rec));
      m.entries.push_back({id, file, file_crc32(path), static_cast<int>(scene.ribbons.size())});
    } catch (const std::exception& e) {
      spdlog::warn("synth: scene {} skipped: {}", id, e.what());
    }
  }
  eval::write_jsonl((fs::path(dir) / m.gt_file).string(), gt, false);
  nlohmann::json j;
  j["seed"] = seed;
  j["spec"] = spec.to_text();
  j["gt_file"] = m.gt_file;
  j["entries"] = nlohmann::json::array();
  for (const auto& e : m.entries) {
    j["entries"].push_back({{"image_id", e.image_id}, {"file", e.file}, {"crc32", e.crc32}, {"instances", e.instances}});
  }
  std::ofstream out(fs::path(dir) / "manifest.json");
  out << j.dump(2) << "\n";
  if (!out) throw ImageError("cannot write manifest in " + dir);
  return m;
}

DatasetManifest load_manifest(const std::string& dir) {
  const auto path = std::filesystem::path(dir) / "manifest.json";
  std::ifstream in(path);
  if (!in) throw ImageError("missing dataset manifest " + path.string());
  DatasetManifest m;
  try {
    const auto j = nlohmann::json::parse(in);
    m.seed = j.at("seed").get<std::uint64_t>();
    m.spec = SceneSpec::from_kv(KeyValueConfig::parse(j.at("spec").get<std::string>(), path.string()));
    m.gt_file = j.value("gt_file", std::string("gt.jsonl"));
    for (const auto& e : j.at("entries")) {
      m.entries.push_back({e.at("image_id").get<std::string>(), e.at("file").get<std::string>(),
                           e.at("crc32").get<std::uint32_t>(), e.value("instances", 0)});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ImageError("malformed manifest " + path.string() + ": " + e.what());
  }
  return m;
}

}  // namespace mixnet::synth
