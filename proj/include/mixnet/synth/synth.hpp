#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mixnet/geometry/polygon.hpp"
#include "mixnet/util/image.hpp"
#include "mixnet/util/kvconfig.hpp"

namespace mixnet::synth {

enum Bucket { kSmall = 0, kMedium = 1, kLarge = 2 };

struct SceneSpec {
  int width = 128;
  int height = 128;
  int min_instances = 1;
  int max_instances = 4;
  /// Control-point bend as a fraction of spine length.
  double max_curvature = 0.3;
  double min_aspect = 2.5;
  double max_aspect = 5.0;
  /// Probability of drawing a small, medium and large instance.
  std::array<double, 3> size_mix = {0.3, 0.4, 0.3};
  /// GT area bucket limits (pixels).
  double small_max_area = 256;
  double medium_max_area = 2304;
  /// Upper bound on background shapes per scene.
  int clutter = 3;
  /// Stripe period over ribbon width.
  double stripe_ratio = 0.7;
  int spine_points = 9;
  int placement_tries = 50;

  void validate() const;
  static SceneSpec from_kv(const KeyValueConfig& kv);
  std::string to_text() const;
  /// Area interval drawn for instances of `bucket`, strictly inside its limits.
  std::array<double, 2> area_range(Bucket bucket) const;
};

struct Ribbon {
  /// Canonical GT outline: top chain then reversed bottom chain.
  geom::Polygon polygon;
  geom::Polyline spine;
  double width = 0;
  Bucket bucket = kMedium;
};

struct Scene {
  Image image;
  std::vector<Ribbon> ribbons;
};

/// Ribbon of `width` swept along a cubic Bezier from `start` heading `angle`
/// (radians), arc length `length`. `bend1` and `bend2` offset the inner
/// control points sideways as fractions of the length.
Ribbon make_ribbon(geom::Point start, double angle, double length, double width, double bend1, double bend2,
                   int spine_points);

/// Draws one ribbon of the given bucket at the origin (no placement).
Ribbon sample_ribbon(const SceneSpec& spec, Bucket bucket, std::mt19937_64& rng);

Scene generate_scene(const SceneSpec& spec, std::uint64_t seed);

/// Independent per-scene seed stream.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

struct DatasetEntry {
  std::string image_id;
  std::string file;
  std::uint32_t crc32 = 0;
  int instances = 0;
};

struct DatasetManifest {
  std::uint64_t seed = 0;
  SceneSpec spec;
  std::string gt_file = "gt.jsonl";
  std::vector<DatasetEntry> entries;
};

/// Writes images/<id>.png, gt.jsonl and manifest.json under `dir`. Scenes
/// that fail to write are left out of the manifest.
DatasetManifest make_dataset(const SceneSpec& spec, int count, const std::string& dir, std::uint64_t seed);

/// Reads `dir`/manifest.json.
DatasetManifest load_manifest(const std::string& dir);

std::uint32_t file_crc32(const std::string& path);

}  // namespace mixnet::synth
