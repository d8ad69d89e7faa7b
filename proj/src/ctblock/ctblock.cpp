#include "mixnet/ctblock/ctblock.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace mixnet {

using geom::Point;
using geom::Polygon;

void CtblockConfig::validate() const {
  if (contour_points < 3) throw ConfigError("ctblock: contour_points must be at least 3");
  if (center_points < 2) throw ConfigError("ctblock: center_points must be at least 2");
  if (dim <= 0 || heads <= 0 || dim % heads != 0) throw ConfigError("ctblock: dim must be a positive multiple of heads");
  if (mlp_hidden <= 0 || blocks <= 0) throw ConfigError("ctblock: mlp_hidden and blocks must be positive");
  if (coord_frequencies < 0 || index_frequencies < 0) throw ConfigError("ctblock: negative encoding size");
  if (!(coord_scale > 0) || !(smooth_l1_beta > 0)) throw ConfigError("ctblock: coord_scale and beta must be positive");
}

CtblockConfig CtblockConfig::from_kv(const KeyValueConfig& kv) {
  CtblockConfig c;
  c.contour_points = static_cast<int>(kv.get_int("contour_points", c.contour_points));
  c.center_points = static_cast<int>(kv.get_int("center_points", c.center_points));
  c.dim = static_cast<int>(kv.get_int("dim", c.dim));
  c.heads = static_cast<int>(kv.get_int("heads", c.heads));
  c.mlp_hidden = static_cast<int>(kv.get_int("mlp_hidden", c.mlp_hidden));
  c.blocks = static_cast<int>(kv.get_int("blocks", c.blocks));
  c.coord_frequencies = static_cast<int>(kv.get_int("coord_frequencies", c.coord_frequencies));
  c.index_frequencies = static_cast<int>(kv.get_int("index_frequencies", c.index_frequencies));
  c.coord_scale = kv.get_double("coord_scale", c.coord_scale);
  c.smooth_l1_beta = kv.get_double("smooth_l1_beta", c.smooth_l1_beta);
  c.center_weight = kv.get_double("center_weight", c.center_weight);
  c.refine_weight = kv.get_double("refine_weight", c.refine_weight);
  c.validate();
  return c;
}

std::string CtblockConfig::to_text() const {
  std::ostringstream out;
  out << "contour_points = " << contour_points << "\n"
      << "center_points = " << center_points << "\n"
      << "dim = " << dim << "\n"
      << "heads = " << heads << "\n"
      << "mlp_hidden = " << mlp_hidden << "\n"
      << "blocks = " << blocks << "\n"
      << "coord_frequencies = " << coord_frequencies << "\n"
      << "index_frequencies = " << index_frequencies << "\n"
      << "coord_scale = " << coord_scale << "\n"
      << "smooth_l1_beta = " << smooth_l1_beta << "\n"
      << "center_weight = " << center_weight << "\n"
      << "refine_weight = " << refine_weight << "\n";
  return out.str();
}

Polygon orient_canonical(const Polygon& poly) {
  Polygon ring = poly;
  if (geom::signed_area(ring) < 0) std::reverse(ring.begin(), ring.end());
  const auto start = std::min_element(ring.begin(), ring.end(), [](Point p, Point q) {
    return p.y < q.y || (p.y == q.y && p.x < q.x);
  });
  std::rotate(ring.begin(), start, ring.end());
  return ring;
}

CtblockTarget make_ctblock_target(const Polygon& gt, const std::vector<Point>& rough, int n, int c) {
  if (rough.empty()) throw geom::GeometryError("make_ctblock_target: empty rough contour");
  const Polygon ring = geom::canonicalize(gt);
  // Rotate the GT ring to start at its boundary point nearest rough[0].
  std::size_t best_edge = 0;
  Point best_point = ring[0];
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ring.size(); ++i) {
    const Point q = geom::closest_on_segment(rough[0], ring[i], ring[(i + 1) % ring.size()]);
    const double d = geom::distance(q, rough[0]);
    if (d < best) {
      best = d;
      best_edge = i;
      best_point = q;
    }
  }
  geom::Polyline loop{best_point};
  for (std::size_t k = 1; k <= ring.size(); ++k) {
    const Point v = ring[(best_edge + k) % ring.size()];
    if (!(v == loop.back())) loop.push_back(v);
  }
  loop.push_back(best_point);
  auto closed = geom::resample_polyline(loop, n + 1);
  closed.pop_back();

  CtblockTarget t;
  t.contour = std::move(closed);
  t.center = geom::centerline_gt(ring, c);
  if (geom::distance(t.center.back(), rough[0]) < geom::distance(t.center.front(), rough[0])) {
    std::reverse(t.center.begin(), t.center.end());
  }
  return t;
}

namespace {

/// Per-point encoding: sinusoidal relative coordinates, contour-index
/// harmonics (zero for center points) and a two-way kind tag.
template <typename T>
void encode_point(T* dst, Point rel, int index, int count, bool contour_kind, const CtblockConfig& c) {
  int k = 0;
  for (int f = 0; f < c.coord_frequencies; ++f) {
    const double w = std::ldexp(std::numbers::pi, f) / c.coord_scale;
    dst[k++] = static_cast<T>(std::sin(w * rel.x));
    dst[k++] = static_cast<T>(std::cos(w * rel.x));
    dst[k++] = static_cast<T>(std::sin(w * rel.y));
    dst[k++] = static_cast<T>(std::cos(w * rel.y));
  }
  for (int m = 1; m <= c.index_frequencies; ++m) {
    const double a = 2.0 * std::numbers::pi * m * index / count;
    dst[k++] = contour_kind ? static_cast<T>(std::sin(a)) : T(0);
    dst[k++] = contour_kind ? static_cast<T>(std::cos(a)) : T(0);
  }
  dst[k++] = contour_kind ? T(1) : T(0);
  dst[k++] = contour_kind ? T(0) : T(1);
}

Point mean_point(const std::vector<Point>& pts) {
  Point m{0, 0};
  for (const auto& p : pts) m = m + p;
  return m * (1.0 / static_cast<double>(pts.size()));
}

}  // namespace

template <typename T>
Ctblock<T>::Ctblock(const CtblockConfig& config, int feature_channels, int heatmap_channels, ParameterSet<T>& params,
                    nn::Rng& rng)
    : config_(config), feature_channels_(feature_channels), heatmap_channels_(heatmap_channels) {
  config_.validate();
  centerline_ = make_module("ctblock.centerline", params, rng);
  refiner_ = make_module("ctblock.refine", params, rng);
}

template <typename T>
typename Ctblock<T>::Module Ctblock<T>::make_module(const std::string& name, ParameterSet<T>& params,
                                                     nn::Rng& rng) const {
  Module m;
  const int in = feature_channels_ + heatmap_channels_ + config_.encoding_width();
  m.proj = nn::make_linear(params, name + ".proj", in, config_.dim, rng);
  for (int b = 0; b < config_.blocks; ++b) {
    m.blocks.push_back(nn::make_transformer_block(params, name + ".block" + std::to_string(b + 1), config_.dim,
                                                  config_.heads, config_.mlp_hidden, rng));
  }
  m.norm = nn::make_layer_norm(params, name + ".norm", config_.dim);
  m.dec1 = nn::make_linear(params, name + ".dec1", config_.dim, config_.dim, rng);
  // Zero decoder output: the block starts as the identity on rough contours.
  m.dec2 = nn::make_linear(params, name + ".dec2", config_.dim, 2, rng, nn::Init::kZero);
  return m;
}

template <typename T>
Var<T> Ctblock<T>::tokens(Graph<T>& g, Var<T> fused, Var<T> heatmaps, const std::vector<ContourInstance>& instances,
                          const std::vector<std::vector<Point>>& points, bool contour_kind) const {
  const int count = static_cast<int>(instances.size());
  if (points.size() != instances.size()) throw ShapeError("ctblock: one point list per instance required");
  const int per = static_cast<int>(points.front().size());
  const double height = heatmaps.dim(2), width = heatmaps.dim(3);
  std::vector<ops::PointSample> samples;
  samples.reserve(static_cast<std::size_t>(count) * per);
  Tensor<T> enc({count * per, config_.encoding_width()});
  bool clamped = false;
  for (int i = 0; i < count; ++i) {
    const auto& pts = points[static_cast<std::size_t>(i)];
    if (static_cast<int>(pts.size()) != per) throw ShapeError("ctblock: instances must share one point count");
    const Point centre = mean_point(instances[static_cast<std::size_t>(i)].rough);
    for (int k = 0; k < per; ++k) {
      Point p = pts[static_cast<std::size_t>(k)];
      if (p.x < 0 || p.y < 0 || p.x > width || p.y > height) {
        clamped = true;
        p = {std::clamp(p.x, 0.0, width), std::clamp(p.y, 0.0, height)};
      }
      samples.push_back({instances[static_cast<std::size_t>(i)].batch, p.x, p.y});
      encode_point(enc.data() + static_cast<std::size_t>(i * per + k) * config_.encoding_width(), p - centre, k, per,
                   contour_kind, config_);
    }
  }
  if (clamped) spdlog::debug("ctblock: points outside the {}x{} image were clamped for sampling", width, height);
  Var<T> f = ops::sample_points(fused, samples, height / fused.dim(2));
  Var<T> h = ops::sample_points(heatmaps, samples, 1.0);
  Var<T> all = ops::concat(std::vector<Var<T>>{f, h, g.constant(std::move(enc))}, 1);
  return ops::reshape(all, {count, per, all.dim(1)});
}

template <typename T>
Var<T> Ctblock<T>::encode(Graph<T>& g, const Module& m, Var<T> tokens) const {
  Var<T> x = m.proj(g, tokens);
  for (const auto& b : m.blocks) x = b(g, x);
  return m.norm(g, x);
}

template <typename T>
Var<T> Ctblock<T>::decode(Graph<T>& g, const Module& m, Var<T> states) const {
  return ops::scale(m.dec2(g, ops::gelu(m.dec1(g, states))), static_cast<T>(config_.coord_scale));
}

template <typename T>
CtblockOutput<T> Ctblock<T>::forward(Graph<T>& g, Var<T> fused, Var<T> heatmaps,
                                     const std::vector<ContourInstance>& instances) const {
  if (instances.empty()) throw ShapeError("ctblock: no instances");
  const int count = static_cast<int>(instances.size());
  const int n = static_cast<int>(instances.front().rough.size());
  if (n < 3) throw ShapeError("ctblock: rough contours need at least 3 points");
  CtblockOutput<T> out;
  out.rough = Tensor<T>({count, n, 2});
  std::vector<std::vector<Point>> contour_points;
  for (int i = 0; i < count; ++i) {
    const auto& r = instances[static_cast<std::size_t>(i)].rough;
    if (static_cast<int>(r.size()) != n) throw ShapeError("ctblock: instances must share one contour point count");
    for (int k = 0; k < n; ++k) {
      out.rough[(static_cast<std::size_t>(i) * n + k) * 2] = static_cast<T>(r[static_cast<std::size_t>(k)].x);
      out.rough[(static_cast<std::size_t>(i) * n + k) * 2 + 1] = static_cast<T>(r[static_cast<std::size_t>(k)].y);
    }
    contour_points.push_back(r);
  }
  out.rough_points = contour_points;
  Var<T> rough = g.constant(out.rough);
  Var<T> contour_tokens = tokens(g, fused, heatmaps, instances, contour_points, true);

  // Module 1: contour tokens -> per-point offsets -> displaced polyline -> C points.
  Var<T> first = decode(g, centerline_, encode(g, centerline_, contour_tokens));
  out.displaced = ops::add(rough, first);
  out.center = ops::arclength_resample(out.displaced, config_.center_points);

  // Module 2 samples at the predicted center points; coordinates carry no gradient.
  std::vector<std::vector<Point>> centre_points(static_cast<std::size_t>(count));
  const auto& cv = out.center.value();
  for (int i = 0; i < count; ++i) {
    for (int k = 0; k < config_.center_points; ++k) {
      const std::size_t at = (static_cast<std::size_t>(i) * config_.center_points + k) * 2;
      centre_points[static_cast<std::size_t>(i)].push_back({static_cast<double>(cv[at]), static_cast<double>(cv[at + 1])});
    }
  }
  out.offsets = refine_offsets(g, fused, heatmaps, instances, centre_points, contour_tokens);
  out.refined = ops::add(rough, out.offsets);
  return out;
}

template <typename T>
Var<T> Ctblock<T>::refine_offsets(Graph<T>& g, Var<T> fused, Var<T> heatmaps,
                                  const std::vector<ContourInstance>& instances,
                                  const std::vector<std::vector<Point>>& center_points) const {
  std::vector<std::vector<Point>> contour_points;
  for (const auto& inst : instances) contour_points.push_back(inst.rough);
  return refine_offsets(g, fused, heatmaps, instances, center_points,
                        tokens(g, fused, heatmaps, instances, contour_points, true));
}

template <typename T>
Var<T> Ctblock<T>::refine_offsets(Graph<T>& g, Var<T> fused, Var<T> heatmaps,
                                  const std::vector<ContourInstance>& instances,
                                  const std::vector<std::vector<Point>>& center_points, Var<T> contour_tokens) const {
  const int n = contour_tokens.dim(1);
  Var<T> centre_tokens = tokens(g, fused, heatmaps, instances, center_points, false);
  Var<T> joint = ops::concat(std::vector<Var<T>>{contour_tokens, centre_tokens}, 1);
  Var<T> states = ops::slice(encode(g, refiner_, joint), 1, 0, n);
  return decode(g, refiner_, states);
}

template <typename T>
CtblockLoss<T> Ctblock<T>::loss(Graph<T>& g, const CtblockOutput<T>& out, const std::vector<CtblockTarget>& targets,
                                double width, double height) const {
  const int count = out.refined.dim(0), n = out.refined.dim(1), c = out.center.dim(1);
  if (static_cast<int>(targets.size()) != count) throw ShapeError("ctblock loss: one target per instance required");
  auto pack = [&](int per, bool contour, Tensor<T>& target, Tensor<T>& norm) {
    target = Tensor<T>({count, per, 2});
    norm = Tensor<T>({count, per, 2});
    for (int i = 0; i < count; ++i) {
      const auto& pts = contour ? targets[static_cast<std::size_t>(i)].contour : targets[static_cast<std::size_t>(i)].center;
      if (static_cast<int>(pts.size()) != per) throw ShapeError("ctblock loss: target point count mismatch");
      for (int k = 0; k < per; ++k) {
        const std::size_t at = (static_cast<std::size_t>(i) * per + k) * 2;
        // Same arithmetic as the prediction side, so a perfect prediction scores exactly 0.
        norm[at] = static_cast<T>(1.0 / width);
        norm[at + 1] = static_cast<T>(1.0 / height);
        target[at] = static_cast<T>(pts[static_cast<std::size_t>(k)].x) * norm[at];
        target[at + 1] = static_cast<T>(pts[static_cast<std::size_t>(k)].y) * norm[at + 1];
      }
    }
  };
  Tensor<T> centre_target, centre_norm, contour_target, contour_norm;
  pack(c, false, centre_target, centre_norm);
  pack(n, true, contour_target, contour_norm);
  const T beta = static_cast<T>(config_.smooth_l1_beta);
  CtblockLoss<T> l;
  l.center = ops::smooth_l1(ops::mul(out.center, g.constant(std::move(centre_norm))), centre_target, beta);
  l.refine = ops::smooth_l1(ops::mul(out.refined, g.constant(std::move(contour_norm))), contour_target, beta);
  l.total = ops::add(ops::scale(l.center, static_cast<T>(config_.center_weight)),
                     ops::scale(l.refine, static_cast<T>(config_.refine_weight)));
  return l;
}

template <typename T>
std::vector<Polygon> refined_polygons(const CtblockOutput<T>& out, double width, double height) {
  const int count = out.offsets.dim(0), n = out.offsets.dim(1);
  const auto& off = out.offsets.value();
  std::vector<Polygon> polys;
  for (int i = 0; i < count; ++i) {
    std::vector<Point> delta;
    for (int k = 0; k < n; ++k) {
      const std::size_t at = (static_cast<std::size_t>(i) * n + k) * 2;
      delta.push_back({static_cast<double>(off[at]), static_cast<double>(off[at + 1])});
    }
    polys.push_back(orient_canonical(geom::apply_offsets(out.rough_points[static_cast<std::size_t>(i)], delta, width, height)));
  }
  return polys;
}

template <typename T>
std::vector<geom::Polyline> center_lines(const CtblockOutput<T>& out) {
  const int count = out.center.dim(0), c = out.center.dim(1), n = out.displaced.dim(1);
  const auto& cv = out.center.value();
  const auto& dv = out.displaced.value();
  std::vector<geom::Polyline> lines;
  for (int i = 0; i < count; ++i) {
    geom::Polyline displaced;
    for (int k = 0; k < n; ++k) {
      const std::size_t at = (static_cast<std::size_t>(i) * n + k) * 2;
      displaced.push_back({static_cast<double>(dv[at]), static_cast<double>(dv[at + 1])});
    }
    const auto& rough = out.rough_points[static_cast<std::size_t>(i)];
    geom::Polyline line;
    if (!(geom::polyline_length(displaced) > 0)) {
      spdlog::warn("ctblock: instance {} has a zero-length displaced contour, center line set to its centroid", i);
      line.assign(static_cast<std::size_t>(c), geom::centroid(rough));
    } else {
      for (int k = 0; k < c; ++k) {
        const std::size_t at = (static_cast<std::size_t>(i) * c + k) * 2;
        line.push_back({static_cast<double>(cv[at]), static_cast<double>(cv[at + 1])});
      }
    }
    lines.push_back(std::move(line));
  }
  return lines;
}

template class Ctblock<float>;
template class Ctblock<double>;
template std::vector<Polygon> refined_polygons(const CtblockOutput<float>&, double, double);
template std::vector<Polygon> refined_polygons(const CtblockOutput<double>&, double, double);
template std::vector<geom::Polyline> center_lines(const CtblockOutput<float>&);
template std::vector<geom::Polyline> center_lines(const CtblockOutput<double>&);

}  // namespace mixnet
