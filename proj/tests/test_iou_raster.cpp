#include <cmath>
#include <numbers>

#include "doctest.h"
#include "geometry_util.hpp"
#include "mixnet/geometry/iou.hpp"
#include "mixnet/geometry/raster.hpp"

using namespace mixnet;
using namespace mixnet::geom;
using testing::rect;

namespace {

double mask_iou(const Mask& a, const Mask& b) {
  long inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    inter += a.data[i] && b.data[i];
    uni += a.data[i] || b.data[i];
  }
  return uni ? static_cast<double>(inter) / uni : 0.0;
}

Grid<float> to_prob(const Mask& m) {
  Grid<float> g(m.height, m.width);
  for (std::size_t i = 0; i < m.data.size(); ++i) g.data[i] = m.data[i] ? 1.0f : 0.0f;
  return g;
}

long count(const Mask& m) {
  long c = 0;
  for (auto v : m.data) c += v;
  return c;
}

}  // namespace

TEST_CASE("IoU of identical, disjoint and half-offset squares") {
  CHECK(polygon_iou(rect(0, 0, 1, 1), rect(0, 0, 1, 1)) == doctest::Approx(1.0));
  CHECK(polygon_iou(rect(0, 0, 1, 1), rect(2, 0, 3, 1)) == 0.0);
  CHECK(polygon_iou(rect(0, 0, 1, 1), rect(0.5, 0, 1.5, 1)) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("IoU is symmetric and equals one on itself for random polygons") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 30; ++t) {
    const auto a = testing::random_star(rng, {50, 50}, 10, 40, 12);
    const auto b = testing::random_star(rng, {60, 45}, 10, 40, 9);
    CHECK(polygon_iou(a, a) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(polygon_iou(a, b) == doctest::Approx(polygon_iou(b, a)).epsilon(1e-9));
  }
}

TEST_CASE("IoU agrees with a 1024x1024 rasterization oracle over 100 random pairs") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> center(35, 65);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    // Frame 100 x 100; every polygon covers at least 5% of it.
    const auto a = testing::random_star_min_area(rng, {center(rng), center(rng)}, 13, 35, 4 + t % 13, 500);
    const auto b = testing::random_star_min_area(rng, {center(rng), center(rng)}, 13, 35, 4 + (t * 7) % 13, 500);
    REQUIRE(area(a) >= 500);
    REQUIRE(area(b) >= 500);
    // Oracle: sample both on the fixed 1024^2 grid over the frame.
    long inter = 0, uni = 0;
    for (int i = 0; i < 1024; ++i) {
      for (int j = 0; j < 1024; ++j) {
        const Point p{(j + 0.5) * 100.0 / 1024, (i + 0.5) * 100.0 / 1024};
        const bool ia = contains_even_odd(a, p), ib = contains_even_odd(b, p);
        inter += ia && ib;
        uni += ia || ib;
      }
    }
    const double oracle = static_cast<double>(inter) / uni;
    worst = std::max(worst, std::abs(polygon_iou(a, b) - oracle));
  }
  CHECK(worst < 0.01);
}

TEST_CASE("self-intersecting input falls back to sampling") {
  const Polygon bowtie = {{0, 0}, {10, 10}, {10, 0}, {0, 10}};
  const double iou = polygon_iou(bowtie, rect(0, 0, 10, 10));
  CHECK(iou == doctest::Approx(0.5).epsilon(0.01));
  CHECK(polygon_iou({{0, 0}, {1, 1}}, rect(0, 0, 1, 1)) == 0.0);
}

TEST_CASE("rasterize_mask basics") {
  const Mask full = rasterize_mask(rect(0, 0, 16, 8), 8, 16);
  CHECK(count(full) == 128);
  const Mask none = rasterize_mask(rect(20, 20, 30, 30), 8, 16);
  CHECK(count(none) == 0);
  const Mask inner = rasterize_mask(rect(2, 1, 5, 4), 8, 8);
  CHECK(count(inner) == 9);
  CHECK(inner.at(1, 2) == 1);
  CHECK(inner.at(0, 2) == 0);
}

TEST_CASE("mask area matches the shoelace area within 2%") {
  std::mt19937_64 rng(77);
  for (int t = 0; t < 100; ++t) {
    const auto p = testing::random_star_min_area(rng, {64, 64}, 14, 50, 6 + t % 10, 400);
    REQUIRE(area(p) >= 400);
    const Mask m = rasterize_mask(p, 128, 128);
    CHECK(std::abs(count(m) - area(p)) <= 0.02 * area(p));
  }
}

TEST_CASE("extraction of an empty map is empty") {
  CHECK(extract_rough_contours(Grid<float>(32, 32, 0.0f)).empty());
}

TEST_CASE("two rectangles extract to two polygons with mask IoU above 0.95") {
  const Polygon r1 = rect(5, 5, 30, 15), r2 = rect(10, 30, 55, 50);
  Mask truth(64, 64, 0);
  const Mask m1 = rasterize_mask(r1, 64, 64), m2 = rasterize_mask(r2, 64, 64);
  for (std::size_t i = 0; i < truth.data.size(); ++i) truth.data[i] = m1.data[i] | m2.data[i];
  const auto polys = extract_rough_contours(to_prob(truth));
  REQUIRE(polys.size() == 2);
  CHECK(mask_iou(rasterize_mask(polys[0], 64, 64), m1) > 0.95);
  CHECK(mask_iou(rasterize_mask(polys[1], 64, 64), m2) > 0.95);
  for (const auto& p : polys) CHECK(signed_area(p) > 0);
}

TEST_CASE("a filled disk extracts to one polygon within 5% of pi r^2") {
  for (double r : {8.0, 12.0, 20.0}) {
    Grid<float> prob(64, 64, 0.0f);
    for (int i = 0; i < 64; ++i)
      for (int j = 0; j < 64; ++j)
        if (std::hypot(j + 0.5 - 32, i + 0.5 - 32) <= r) prob.at(i, j) = 1.0f;
    const auto polys = extract_rough_contours(prob);
    REQUIRE(polys.size() == 1);
    INFO("r = " << r << " area = " << area(polys[0]));
    CHECK(std::abs(area(polys[0]) - std::numbers::pi * r * r) < 0.05 * std::numbers::pi * r * r);
  }
}

TEST_CASE("rasterize then extract round-trips with mask IoU at least 0.95") {
  std::mt19937_64 rng(99);
  for (int t = 0; t < 40; ++t) {
    // At least 100 px: slivers below that are not meaningful text regions.
    const auto p = testing::random_star_min_area(rng, {32, 32}, 10, 28, 5 + t % 8, 100);
    const Mask m = rasterize_mask(p, 64, 64);
    const auto polys = extract_rough_contours(to_prob(m));
    REQUIRE(!polys.empty());
    const Polygon* best = &polys[0];
    for (const auto& q : polys)
      if (area(q) > area(*best)) best = &q;
    CHECK(mask_iou(rasterize_mask(*best, 64, 64), m) >= 0.95);
  }
}

TEST_CASE("small components are dropped") {
  Grid<float> prob(32, 32, 0.0f);
  for (int i = 2; i < 5; ++i)
    for (int j = 2; j < 5; ++j) prob.at(i, j) = 0.9f;
  CHECK(extract_rough_contours(prob).empty());
  CHECK(extract_rough_contours(prob, 0.5, 9).size() == 1);
}

TEST_CASE("label fields on a rectangle") {
  const auto labels = label_fields({rect(4, 8, 28, 16)}, 24, 32);
  // Midline rows are 11 and 12 (centers 11.5, 12.5): distance maximal there.
  float peak = 0.0f;
  for (float v : labels.distance.data) peak = std::max(peak, v);
  CHECK(peak == 1.0f);
  for (int j = 8; j < 24; ++j) {
    CHECK(labels.distance.at(11, j) == 1.0f);
    CHECK(labels.distance.at(12, j) == 1.0f);
    CHECK(labels.distance.at(9, j) < 1.0f);
  }
  for (float v : labels.distance.data) CHECK((v >= 0.0f && v <= 1.0f));
  // Left edge interior pixel (col 4, row 12) points left.
  CHECK(labels.orientation_x.at(12, 4) == doctest::Approx(-1.0));
  CHECK(labels.orientation_y.at(12, 4) == doctest::Approx(0.0));
  CHECK(labels.classification.at(0, 0) == 0.0f);
  CHECK(labels.orientation_x.at(0, 0) == 0.0f);
  for (std::size_t n = 0; n < labels.instance.data.size(); ++n) {
    if (labels.instance.data[n] == 0) continue;
    const double nx = labels.orientation_x.data[n], ny = labels.orientation_y.data[n];
    CHECK(std::abs(std::hypot(nx, ny) - 1.0) < 1e-5);
  }
}

TEST_CASE("overlapping ground truth resolves to the later instance") {
  const auto labels = label_fields({rect(0, 0, 10, 10), rect(5, 5, 15, 15)}, 16, 16);
  CHECK(labels.instance.at(7, 7) == 2);
  CHECK(labels.instance.at(2, 2) == 1);
}
