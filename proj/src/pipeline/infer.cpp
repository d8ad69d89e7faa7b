#include "mixnet/pipeline/infer.hpp"

#include <cstdio>
#include <sstream>

namespace mixnet {

using geom::Point;
using geom::Polygon;

InferConfig InferConfig::from_kv(const KeyValueConfig& kv) {
  InferConfig c;
  c.threshold = kv.get_double("threshold", c.threshold);
  c.min_area = static_cast<int>(kv.get_int("min_area", c.min_area));
  c.simplify_epsilon = kv.get_double("simplify_epsilon", c.simplify_epsilon);
  c.contour_points = static_cast<int>(kv.get_int("contour_points", c.contour_points));
  c.min_score = kv.get_double("min_score", c.min_score);
  if (!(c.threshold > 0 && c.threshold < 1)) throw ConfigError("infer.threshold must lie in (0, 1)");
  if (c.contour_points != 0 && c.contour_points < 3) throw ConfigError("infer.contour_points must be 0 or at least 3");
  return c;
}

geom::Grid<float> probability_grid(const Var<float>& classification, int batch) {
  const int h = classification.dim(2), w = classification.dim(3);
  geom::Grid<float> grid(h, w);
  const auto& v = classification.value();
  const std::size_t base = static_cast<std::size_t>(batch) * h * w;
  for (std::size_t i = 0; i < grid.data.size(); ++i) grid.data[i] = v[base + i];
  return grid;
}

std::vector<std::vector<Point>> rough_contours(const geom::Grid<float>& probability, const InferConfig& config,
                                               int n) {
  std::vector<std::vector<Point>> out;
  for (const auto& poly :
       geom::extract_rough_contours(probability, config.threshold, config.min_area, config.simplify_epsilon)) {
    out.push_back(orient_canonical(geom::resample_contour(poly, n)));
  }
  return out;
}

double region_score(const geom::Grid<float>& probability, const Polygon& poly) {
  const auto mask = geom::rasterize_mask(poly, probability.height, probability.width);
  double sum = 0;
  long count = 0;
  for (std::size_t i = 0; i < mask.data.size(); ++i) {
    if (!mask.data[i]) continue;
    sum += probability.data[i];
    ++count;
  }
  return count ? sum / count : 0.0;
}

InferResult infer_image(const MixNet& model, const Image& image, const InferConfig& config) {
  InferResult result;
  result.width = image.width;
  result.height = image.height;
  const int n = config.contour_points > 0 ? config.contour_points : model.config().ctblock.contour_points;

  Graph<float> g;
  g.set_grad_enabled(false);
  const auto maps = model.run_heads(g, g.constant(image_to_tensor(pad_to_multiple(image, 32))));
  const auto padded = probability_grid(maps.heads.classification);
  result.probability = geom::Grid<float>(image.height, image.width);
  for (int i = 0; i < image.height; ++i)
    for (int j = 0; j < image.width; ++j) result.probability.at(i, j) = padded.at(i, j);

  std::vector<ContourInstance> instances;
  for (auto& r : rough_contours(result.probability, config, n)) instances.push_back({0, std::move(r)});
  if (instances.empty()) return result;

  const auto out = model.ctblock().forward(g, maps.fused, maps.heatmaps, instances);
  const auto refined = refined_polygons(out, image.width, image.height);
  const auto centers = center_lines(out);
  for (std::size_t i = 0; i < instances.size(); ++i) {
    InstanceResult r;
    r.rough = instances[i].rough;
    r.center = centers[i];
    r.refined = refined[i];
    r.score = region_score(result.probability, r.refined);
    if (r.score < config.min_score) continue;
    result.instances.push_back(std::move(r));
  }
  return result;
}

eval::ImageRecord to_record(const std::string& image_id, const InferResult& result) {
  eval::ImageRecord rec;
  rec.image_id = image_id;
  for (const auto& inst : result.instances) rec.detections.push_back({inst.refined, inst.score});
  return rec;
}

namespace {

std::string base64(const std::vector<std::uint8_t>& bytes) {
  static const char* kAlphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  for (std::size_t i = 0; i < bytes.size(); i += 3) {
    const std::uint32_t chunk = (std::uint32_t{bytes[i]} << 16) |
                                (i + 1 < bytes.size() ? std::uint32_t{bytes[i + 1]} << 8 : 0u) |
                                (i + 2 < bytes.size() ? std::uint32_t{bytes[i + 2]} : 0u);
    out += kAlphabet[(chunk >> 18) & 63];
    out += kAlphabet[(chunk >> 12) & 63];
    out += i + 1 < bytes.size() ? kAlphabet[(chunk >> 6) & 63] : '=';
    out += i + 2 < bytes.size() ? kAlphabet[chunk & 63] : '=';
  }
  return out;
}

std::string points_attr(const std::vector<Point>& pts) {
  std::ostringstream out;
  out.precision(6);
  for (std::size_t i = 0; i < pts.size(); ++i) out << (i ? " " : "") << pts[i].x << "," << pts[i].y;
  return out.str();
}

}  // namespace

std::string render_svg(const Image& image, const InferResult& result) {
  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" xmlns:xlink=\"http://www.w3.org/1999/xlink\" width=\""
      << image.width << "\" height=\"" << image.height << "\" viewBox=\"0 0 " << image.width << " " << image.height
      << "\">\n";
  out << "  <g id=\"image\"><image width=\"" << image.width << "\" height=\"" << image.height
      << "\" xlink:href=\"data:image/png;base64," << base64(encode_png(image)) << "\"/></g>\n";
  out << "  <g id=\"rough\" fill=\"none\" stroke=\"#ffcc00\" stroke-width=\"0.6\" stroke-dasharray=\"2,1\">\n";
  for (const auto& inst : result.instances) out << "    <polygon points=\"" << points_attr(inst.rough) << "\"/>\n";
  out << "  </g>\n  <g id=\"center\" fill=\"none\" stroke=\"#00ccff\" stroke-width=\"0.8\">\n";
  for (const auto& inst : result.instances) out << "    <polyline points=\"" << points_attr(inst.center) << "\"/>\n";
  out << "  </g>\n  <g id=\"refined\" fill=\"none\" stroke=\"#ff3366\" stroke-width=\"0.8\">\n";
  for (const auto& inst : result.instances) out << "    <polygon points=\"" << points_attr(inst.refined) << "\"/>\n";
  out << "  </g>\n</svg>\n";
  return out.str();
}

}  // namespace mixnet
