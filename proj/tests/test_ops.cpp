#include <cmath>

#include "doctest.h"
#include "mixnet/tensor/graph.hpp"
#include "mixnet/tensor/ops.hpp"
#include "test_util.hpp"

using namespace mixnet;

namespace {

Tensor<double> ramp_map(int h, int w, double ax, double ay, double c) {
  Tensor<double> t({1, 1, h, w});
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) t.at(0, 0, i, j) = ax * j + ay * i + c;
  return t;
}

}  // namespace

TEST_CASE("conv2d box sum: center 9, corner 4") {
  Graph<double> g;
  auto x = g.constant(Tensor<double>({1, 1, 3, 3}, 1.0));
  auto w = g.constant(Tensor<double>({1, 1, 3, 3}, 1.0));
  auto b = g.constant(Tensor<double>({1}, 0.0));
  auto y = ops::conv2d(x, w, b, 1, 1);
  CHECK(y.shape() == Shape{1, 1, 3, 3});
  CHECK(y.value().at(0, 0, 1, 1) == 9.0);
  CHECK(y.value().at(0, 0, 0, 0) == 4.0);
  CHECK(y.value().at(0, 0, 2, 2) == 4.0);
  CHECK(y.value().at(0, 0, 0, 1) == 6.0);
}

TEST_CASE("conv2d stride 2 halves the extent") {
  Graph<double> g;
  auto x = g.constant(Tensor<double>({1, 1, 8, 8}, 1.0));
  auto w = g.constant(Tensor<double>({3, 1, 3, 3}, 1.0));
  auto y = ops::conv2d(x, w, Var<double>{}, 2, 1);
  CHECK(y.shape() == Shape{1, 3, 4, 4});
}

TEST_CASE("conv2d rejects bad shapes") {
  Graph<double> g;
  auto w = g.constant(Tensor<double>({1, 2, 3, 3}, 1.0));
  CHECK_THROWS_AS(ops::conv2d(g.constant(Tensor<double>({1, 1, 4, 4})), w, Var<double>{}, 1, 1), ShapeError);
  auto w1 = g.constant(Tensor<double>({1, 1, 3, 3}, 1.0));
  CHECK_THROWS_AS(ops::conv2d(g.constant(Tensor<double>({1, 1, 5, 5})), w1, Var<double>{}, 2, 1), ShapeError);
  auto even = g.constant(Tensor<double>({1, 1, 2, 2}, 1.0));
  CHECK_THROWS_AS(ops::conv2d(g.constant(Tensor<double>({1, 1, 4, 4})), even, Var<double>{}, 1, 0), ShapeError);
  CHECK_THROWS_AS(ops::conv2d(g.constant(Tensor<double>({1, 1, 4, 4})), w1, Var<double>{}, 3, 1), ShapeError);
}

TEST_CASE("nearest resample keeps constants for every factor") {
  for (double f : {0.25, 0.5, 1.0, 2.0, 4.0}) {
    Graph<double> g;
    auto y = ops::resample(g.constant(Tensor<double>({1, 2, 8, 8}, 7.0)), f, ops::ResampleMode::kNearest);
    const int e = static_cast<int>(std::lround(8 * f));
    CHECK(y.shape() == Shape{1, 2, e, e});
    for (double v : y.value().values()) CHECK(v == 7.0);
  }
}

TEST_CASE("nearest x2 block-replicates") {
  Graph<double> g;
  auto y = ops::resample(g.constant(Tensor<double>({1, 1, 2, 2}, {1, 2, 3, 4})), 2.0, ops::ResampleMode::kNearest);
  const std::vector<double> expected = {1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
  CHECK(y.value().storage() == expected);
}

TEST_CASE("resample rejects unsupported factors and indivisible extents") {
  Graph<double> g;
  auto x = g.constant(Tensor<double>({1, 1, 6, 6}));
  CHECK_THROWS_AS(ops::resample(x, 3.0, ops::ResampleMode::kNearest), ShapeError);
  CHECK_THROWS_AS(ops::resample(x, 0.25, ops::ResampleMode::kBilinear), ShapeError);
}

TEST_CASE("bilinear x2 then 2x2 average is the identity on a linear ramp interior") {
  Graph<double> g;
  const auto src = ramp_map(12, 12, 0.013, -0.021, 0.4);
  auto up = ops::resample(g.constant(src), 2.0, ops::ResampleMode::kBilinear);
  auto back = ops::avg_pool(up, 2);
  for (int i = 1; i < 11; ++i)
    for (int j = 1; j < 11; ++j) CHECK(std::abs(back.value().at(0, 0, i, j) - src.at(0, 0, i, j)) < 1e-6);
}

TEST_CASE("bilinear round trip error equals the second-difference oracle on a smooth signal") {
  // Taps at i -/+ 1/4 average to x_i + (x_{i-1} - 2 x_i + x_{i+1}) / 8 per axis.
  const int n = 16;
  Tensor<double> src({1, 1, n, n});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) src.at(0, 0, i, j) = std::sin(0.2 * j) + std::cos(0.15 * i);
  Graph<double> g;
  auto back = ops::avg_pool(ops::resample(g.constant(src), 2.0, ops::ResampleMode::kBilinear), 2);
  for (int i = 1; i < n - 1; ++i) {
    for (int j = 1; j < n - 1; ++j) {
      const double x = src.at(0, 0, i, j);
      const double dxx = src.at(0, 0, i, j - 1) - 2 * x + src.at(0, 0, i, j + 1);
      const double dyy = src.at(0, 0, i - 1, j) - 2 * x + src.at(0, 0, i + 1, j);
      // Separable: (I + Dx/8)(I + Dy/8) x
      const double dxy = (src.at(0, 0, i - 1, j - 1) - 2 * src.at(0, 0, i - 1, j) + src.at(0, 0, i - 1, j + 1)) -
                         2 * dxx + (src.at(0, 0, i + 1, j - 1) - 2 * src.at(0, 0, i + 1, j) + src.at(0, 0, i + 1, j + 1));
      const double oracle = x + dxx / 8 + dyy / 8 + dxy / 64;
      CHECK(std::abs(back.value().at(0, 0, i, j) - oracle) < 1e-12);
    }
  }
}

TEST_CASE("split_channels: contiguous ascending slices") {
  Graph<double> g;
  auto x = g.constant(testing::random_tensor({2, 4, 3, 3}, 5));
  auto parts = ops::split_channels(x, 2);
  REQUIRE(parts.size() == 2);
  for (int b = 0; b < 2; ++b)
    for (int c = 0; c < 2; ++c)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          CHECK(parts[0].value().at(b, c, i, j) == x.value().at(b, c, i, j));
          CHECK(parts[1].value().at(b, c, i, j) == x.value().at(b, c + 2, i, j));
        }
  auto one = ops::split_channels(x, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0].value().storage() == x.value().storage());
  CHECK_THROWS_WITH_AS(ops::split_channels(x, 3), doctest::Contains("divisible"), ShapeError);
}

TEST_CASE("split then concat is bitwise identity") {
  Graph<double> g;
  auto x = g.constant(testing::random_tensor({2, 6, 4, 5}, 9));
  for (int parts : {1, 2, 3, 6}) {
    auto y = ops::concat_channels(ops::split_channels(x, parts));
    CHECK(y.value().storage() == x.value().storage());
  }
}

TEST_CASE("concat_channels sums channels and rejects spatial mismatch") {
  Graph<double> g;
  auto a = g.constant(Tensor<double>({1, 2, 4, 4}, 1.0));
  auto b = g.constant(Tensor<double>({1, 3, 4, 4}, 2.0));
  auto y = ops::concat_channels<double>({a, b});
  CHECK(y.shape() == Shape{1, 5, 4, 4});
  CHECK(y.value().at(0, 1, 3, 3) == 1.0);
  CHECK(y.value().at(0, 2, 0, 0) == 2.0);
  auto c = g.constant(Tensor<double>({1, 1, 2, 4}));
  CHECK_THROWS_AS(ops::concat_channels<double>({a, c}), ShapeError);
}

TEST_CASE("gradient of the sum of split parts is ones") {
  Graph<double> g;
  auto x = g.leaf(testing::random_tensor({1, 4, 2, 2}, 3));
  auto parts = ops::split_channels(x, 2);
  g.backward(ops::add(ops::sum(parts[0]), ops::sum(parts[1])));
  for (double v : g.grad(x.id()).values()) CHECK(v == 1.0);
}

TEST_CASE("softmax rows sum to one") {
  Graph<double> g;
  auto s = ops::softmax(g.constant(testing::random_tensor({3, 4, 7}, 11, -20, 20)));
  for (int r = 0; r < 12; ++r) {
    double sum = 0;
    for (int k = 0; k < 7; ++k) sum += s.value()[r * 7 + k];
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("sample_points reads pixel centers exactly") {
  Graph<double> g;
  auto map = g.constant(ramp_map(4, 4, 1.0, 10.0, 0.0));
  // Stride 2: image point (2j+1, 2i+1) is the center of map cell (i, j).
  auto s = ops::sample_points(map, {{0, 3.0, 5.0}, {0, 2.0, 2.0}}, 2.0);
  CHECK(s.shape() == Shape{2, 1});
  CHECK(s.value()[0] == doctest::Approx(21.0));
  CHECK(s.value()[1] == doctest::Approx(5.5));
}

TEST_CASE("arclength_resample spaces points evenly, endpoints included") {
  Graph<double> g;
  // L-shaped polyline of length 4: (0,0)->(3,0)->(3,1)
  auto p = g.constant(Tensor<double>({1, 3, 2}, {0, 0, 3, 0, 3, 1}));
  auto r = ops::arclength_resample(p, 5);
  const std::vector<double> expected = {0, 0, 1, 0, 2, 0, 3, 0, 3, 1};
  for (std::size_t i = 0; i < expected.size(); ++i) CHECK(r.value()[i] == doctest::Approx(expected[i]));
}

TEST_CASE("forward is bit-reproducible") {
  auto run = [] {
    Graph<float> g;
    auto x = g.constant(testing::random_tensor<float>({2, 8, 16, 16}, 1));
    auto w = g.constant(testing::random_tensor<float>({16, 8, 3, 3}, 2));
    auto y = ops::resample(ops::relu(ops::conv2d(x, w, Var<float>{}, 2, 1)), 2.0, ops::ResampleMode::kBilinear);
    return ops::sum(y).value()[0];
  };
  CHECK(run() == run());
}
