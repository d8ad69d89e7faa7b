#include <filesystem>

#include "doctest.h"
#include "mixnet/eval/records.hpp"
#include "mixnet/geometry/raster.hpp"
#include "mixnet/synth/synth.hpp"

using namespace mixnet;
using namespace mixnet::synth;
using geom::Point;

namespace {

double distance_to_polyline(Point p, const geom::Polyline& line) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < line.size(); ++i) {
    best = std::min(best, geom::distance(p, geom::closest_on_segment(p, line[i], line[i + 1])));
  }
  return best;
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("mixnet_synth_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("identical spec and seed give an identical scene") {
  SceneSpec spec;
  const auto a = generate_scene(spec, 42), b = generate_scene(spec, 42), c = generate_scene(spec, 43);
  CHECK(a.image == b.image);
  REQUIRE(a.ribbons.size() == b.ribbons.size());
  for (std::size_t i = 0; i < a.ribbons.size(); ++i) CHECK(a.ribbons[i].polygon == b.ribbons[i].polygon);
  CHECK_FALSE(a.image == c.image);
}

TEST_CASE("straight ribbons are rectangles with a straight center line") {
  const auto r = make_ribbon({10, 20}, 0.3, 60, 12, 0.0, 0.0, 9);
  for (const auto& p : r.polygon) {
    const bool on_side = distance_to_polyline(p, {r.polygon.front(), r.polygon[r.polygon.size() / 2 - 1]}) < 1e-9 ||
                         distance_to_polyline(p, {r.polygon[r.polygon.size() / 2], r.polygon.back()}) < 1e-9;
    CHECK(on_side);
  }
  CHECK(geom::area(r.polygon) == doctest::Approx(720.0).epsilon(1e-9));
  const auto centre = geom::centerline_gt(r.polygon, 10);
  const Point a = r.spine.front(), b = r.spine.back();
  for (const auto& p : centre) CHECK(distance_to_polyline(p, {a, b}) < 1e-3);
}

TEST_CASE("generated ribbons: canonical, simple, disjoint, center line near the spine") {
  SceneSpec spec;
  double worst = 0;
  int ribbons = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto scene = generate_scene(spec, derive_seed(7, seed));
    std::vector<geom::Mask> masks;
    for (const auto& r : scene.ribbons) {
      ++ribbons;
      CHECK(geom::is_simple(r.polygon));
      CHECK(geom::canonicalize(r.polygon) == r.polygon);
      for (const auto& p : geom::centerline_gt(r.polygon, 10)) worst = std::max(worst, distance_to_polyline(p, r.spine));
      masks.push_back(geom::rasterize_mask(r.polygon, spec.height, spec.width));
    }
    for (std::size_t i = 0; i < masks.size(); ++i)
      for (std::size_t j = i + 1; j < masks.size(); ++j)
        for (std::size_t k = 0; k < masks[i].data.size(); ++k) REQUIRE_FALSE((masks[i].data[k] && masks[j].data[k]));
  }
  CHECK(ribbons > 60);
  INFO("worst center-line distance to spine: " << worst);
  CHECK(worst < 1.0);
}

TEST_CASE("size mix is honoured over 1000 instances") {
  SceneSpec spec;
  spec.size_mix = {0.3, 0.4, 0.3};
  std::array<int, 3> counts{};
  int total = 0;
  for (std::uint64_t seed = 0; total < 1000; ++seed) {
    for (const auto& r : generate_scene(spec, derive_seed(11, seed)).ribbons) {
      const double a = geom::area(r.polygon);
      const int bucket = a < spec.small_max_area ? 0 : (a < spec.medium_max_area ? 1 : 2);
      CHECK(bucket == r.bucket);
      ++counts[static_cast<std::size_t>(bucket)];
      ++total;
    }
  }
  for (int b = 0; b < 3; ++b) {
    const double fraction = static_cast<double>(counts[static_cast<std::size_t>(b)]) / total;
    INFO("bucket " << b << " fraction " << fraction);
    CHECK(std::abs(fraction - spec.size_mix[static_cast<std::size_t>(b)]) < 0.05);
  }
}

TEST_CASE("dataset writing is deterministic and the manifest round-trips") {
  SceneSpec spec;
  spec.width = spec.height = 64;
  spec.size_mix = {0.5, 0.5, 0.0};
  const auto dir_a = scratch("a"), dir_b = scratch("b"), dir_empty = scratch("empty");
  const auto a = make_dataset(spec, 4, dir_a.string(), 99);
  const auto b = make_dataset(spec, 4, dir_b.string(), 99);
  REQUIRE(a.entries.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(a.entries[i].crc32 == b.entries[i].crc32);

  const auto loaded = load_manifest(dir_a.string());
  CHECK(loaded.seed == 99);
  CHECK(loaded.spec.to_text() == spec.to_text());
  REQUIRE(loaded.entries.size() == 4);
  CHECK(loaded.entries[2].file == a.entries[2].file);
  const auto image = read_png((dir_a / a.entries[0].file).string());
  CHECK(image == generate_scene(spec, derive_seed(99, 0)).image);
  const auto gt = eval::read_jsonl((dir_a / loaded.gt_file).string());
  REQUIRE(gt.size() == 4);
  CHECK(static_cast<int>(gt[1].detections.size()) == a.entries[1].instances);

  const auto empty = make_dataset(spec, 0, dir_empty.string(), 1);
  CHECK(empty.entries.empty());
  CHECK(load_manifest(dir_empty.string()).entries.empty());
  for (const auto& d : {dir_a, dir_b, dir_empty}) std::filesystem::remove_all(d);
}

TEST_CASE("spec text round trip and validation") {
  SceneSpec spec;
  spec.size_mix = {0.2, 0.5, 0.3};
  spec.max_curvature = 0.15;
  const auto back = SceneSpec::from_kv(KeyValueConfig::parse(spec.to_text()));
  CHECK(back.to_text() == spec.to_text());
  spec.size_mix = {0, 0, 0};
  CHECK_THROWS_AS(spec.validate(), ConfigError);
}
