#include <cmath>
#include <random>

#include "doctest.h"
#include "geometry_util.hpp"
#include "mixnet/ctblock/ctblock.hpp"
#include "mixnet/tensor/gradcheck.hpp"
#include "test_util.hpp"

using namespace mixnet;
using geom::Point;
using testing::random_tensor;

namespace {

constexpr int kFeat = 6;
constexpr int kHeat = 4;

CtblockConfig tiny() {
  CtblockConfig c;
  c.dim = 16;
  c.heads = 2;
  c.mlp_hidden = 24;
  c.blocks = 1;
  c.coord_frequencies = 3;
  c.index_frequencies = 2;
  return c;
}

/// Gives both decoders random output weights so offsets are non-zero.
template <typename T>
void wake_decoders(ParameterSet<T>& ps, std::uint64_t seed, double magnitude = 0.05) {
  for (const std::string m : {"centerline", "refine"}) {
    auto* w = ps.find("ctblock." + m + ".dec2.weight");
    REQUIRE(w);
    w->value = random_tensor<T>(w->value.shape(), seed++, -magnitude, magnitude);
  }
}

std::vector<Point> rough_of(const geom::Polygon& p, int n) { return geom::resample_contour(p, n); }

/// Translates a [B,C,H,W] map by (dy, dx) whole pixels, filling with zeros.
Tensor<double> shifted(const Tensor<double>& t, int dy, int dx) {
  Tensor<double> out(t.shape());
  for (int b = 0; b < t.dim(0); ++b)
    for (int c = 0; c < t.dim(1); ++c)
      for (int i = 0; i < t.dim(2); ++i)
        for (int j = 0; j < t.dim(3); ++j) {
          const int si = i - dy, sj = j - dx;
          if (si >= 0 && sj >= 0 && si < t.dim(2) && sj < t.dim(3)) out.at(b, c, i, j) = t.at(b, c, si, sj);
        }
  return out;
}

}  // namespace

TEST_CASE("point features: pixel centers, midpoints and constant maps") {
  Graph<double> g;
  Tensor<double> m({1, 2, 4, 4});
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) m.at(0, c, i, j) = 10.0 * c + 4 * i + j;
  auto map = g.constant(m);
  auto at_center = ops::sample_points(map, {{0, 2.5, 1.5}}, 1.0);
  CHECK(at_center.value()[0] == m.at(0, 0, 1, 2));
  CHECK(at_center.value()[1] == m.at(0, 1, 1, 2));
  auto midway = ops::sample_points(map, {{0, 2.0, 1.5}}, 1.0);
  CHECK(midway.value()[0] == doctest::Approx((m.at(0, 0, 1, 1) + m.at(0, 0, 1, 2)) / 2).epsilon(1e-12));

  ParameterSet<double> ps;
  nn::Rng rng(1);
  Ctblock<double> block(tiny(), kFeat, kHeat, ps, rng);
  auto fused = g.constant(Tensor<double>({1, kFeat, 8, 8}, 0.25));
  auto heat = g.constant(Tensor<double>({1, kHeat, 32, 32}, -1.5));
  std::mt19937_64 r(3);
  const auto poly = testing::random_star(r, {16, 16}, 4, 10, 7);
  std::vector<ContourInstance> inst{{0, rough_of(poly, 20)}};
  auto tok = block.tokens(g, fused, heat, inst, {inst[0].rough}, true);
  CHECK(tok.shape() == Shape{1, 20, kFeat + kHeat + tiny().encoding_width()});
  for (int k = 0; k < 20; ++k) {
    for (int c = 0; c < kFeat; ++c) CHECK(tok.value()[static_cast<std::size_t>(k * tok.dim(2) + c)] == doctest::Approx(0.25).epsilon(1e-12));
    for (int c = 0; c < kHeat; ++c) CHECK(tok.value()[static_cast<std::size_t>(k * tok.dim(2) + kFeat + c)] == doctest::Approx(-1.5).epsilon(1e-12));
  }
}

TEST_CASE("zero-initialized decoders return the rough contour and its resampled polyline") {
  ParameterSet<float> ps;
  nn::Rng rng(2);
  Ctblock<float> block(CtblockConfig{}, kFeat, kHeat, ps, rng);
  Graph<float> g;
  auto fused = g.constant(random_tensor<float>({2, kFeat, 16, 16}, 4));
  auto heat = g.constant(random_tensor<float>({2, kHeat, 64, 64}, 5));
  std::mt19937_64 r(7);
  std::vector<ContourInstance> inst;
  for (int i = 0; i < 3; ++i) {
    // Differing vertex counts all map to N contour and C center points.
    const auto poly = testing::random_star(r, {32, 32}, 6, 25, 5 + 4 * i);
    inst.push_back({i % 2, orient_canonical(rough_of(poly, 20))});
  }
  const auto out = block.forward(g, fused, heat, inst);
  CHECK(out.center.shape() == Shape{3, 10, 2});
  CHECK(out.refined.shape() == Shape{3, 20, 2});
  const auto refined = refined_polygons(out, 64, 64);
  const auto centers = center_lines(out);
  for (std::size_t i = 0; i < inst.size(); ++i) {
    REQUIRE(refined[i].size() == 20);
    for (std::size_t k = 0; k < 20; ++k) {
      CHECK(refined[i][k].x == inst[i].rough[k].x);
      CHECK(refined[i][k].y == inst[i].rough[k].y);
    }
    const auto expect = geom::resample_polyline(inst[i].rough, 10);
    REQUIRE(centers[i].size() == 10);
    for (std::size_t k = 0; k < 10; ++k) CHECK(geom::distance(centers[i][k], expect[k]) < 1e-3);
  }
}

TEST_CASE("whole-pixel translation of maps and contours translates the outputs") {
  ParameterSet<double> ps;
  nn::Rng rng(3);
  Ctblock<double> block(tiny(), kFeat, kHeat, ps, rng);
  wake_decoders(ps, 30);
  const auto f = random_tensor({1, kFeat, 16, 16}, 6), h = random_tensor({1, kHeat, 64, 64}, 7);
  std::mt19937_64 r(9);
  const auto rough = orient_canonical(rough_of(testing::random_star(r, {26, 26}, 6, 12, 8), 20));
  std::vector<Point> moved;
  for (const auto& p : rough) moved.push_back({p.x + 8, p.y + 4});

  Graph<double> g;
  const auto a = block.forward(g, g.constant(f), g.constant(h), {{0, rough}});
  const auto b = block.forward(g, g.constant(shifted(f, 1, 2)), g.constant(shifted(h, 4, 8)), {{0, moved}});
  double worst_offset = 0, worst_center = 0;
  for (std::size_t i = 0; i < a.offsets.value().numel(); ++i) {
    worst_offset = std::max(worst_offset, std::abs(a.offsets.value()[i] - b.offsets.value()[i]));
  }
  for (int k = 0; k < 10; ++k) {
    worst_center = std::max(worst_center, std::abs(a.center.value()[2 * k] + 8 - b.center.value()[2 * k]));
    worst_center = std::max(worst_center, std::abs(a.center.value()[2 * k + 1] + 4 - b.center.value()[2 * k + 1]));
  }
  CHECK(worst_offset > 0);  // offsets are not trivially zero
  CHECK(worst_offset < 1e-9);
  CHECK(worst_center < 1e-9);
}

TEST_CASE("center-token order does not change contour offsets") {
  ParameterSet<double> ps;
  nn::Rng rng(4);
  Ctblock<double> block(tiny(), kFeat, kHeat, ps, rng);
  wake_decoders(ps, 40);
  Graph<double> g;
  auto fused = g.constant(random_tensor({1, kFeat, 16, 16}, 8));
  auto heat = g.constant(random_tensor({1, kHeat, 64, 64}, 9));
  std::mt19937_64 r(11);
  const std::vector<ContourInstance> inst{{0, rough_of(testing::random_star(r, {30, 30}, 8, 20, 9), 20)}};
  std::vector<Point> centre;
  for (int k = 0; k < 10; ++k) centre.push_back({20.0 + 2 * k, 30.0 + std::sin(k)});
  auto permuted = centre;
  std::shuffle(permuted.begin(), permuted.end(), r);
  const auto a = block.refine_offsets(g, fused, heat, inst, {centre});
  const auto b = block.refine_offsets(g, fused, heat, inst, {permuted});
  for (std::size_t i = 0; i < a.value().numel(); ++i) CHECK(a.value()[i] == doctest::Approx(b.value()[i]).epsilon(1e-10));
}

TEST_CASE("instances in one batch match instances processed alone") {
  ParameterSet<double> ps;
  nn::Rng rng(5);
  Ctblock<double> block(tiny(), kFeat, kHeat, ps, rng);
  wake_decoders(ps, 50);
  Graph<double> g;
  auto fused = g.constant(random_tensor({2, kFeat, 16, 16}, 10));
  auto heat = g.constant(random_tensor({2, kHeat, 64, 64}, 11));
  std::mt19937_64 r(12);
  const ContourInstance a{0, rough_of(testing::random_star(r, {20, 20}, 5, 15, 6), 20)};
  const ContourInstance b{1, rough_of(testing::random_star(r, {40, 36}, 5, 15, 11), 20)};
  const auto joint = block.forward(g, fused, heat, {a, b});
  const auto alone_a = block.forward(g, fused, heat, {a});
  const auto alone_b = block.forward(g, fused, heat, {b});
  const auto& jr = joint.refined.value();
  for (std::size_t i = 0; i < 40; ++i) {
    CHECK(jr[i] == doctest::Approx(alone_a.refined.value()[i]).epsilon(1e-12));
    CHECK(jr[i + 40] == doctest::Approx(alone_b.refined.value()[i]).epsilon(1e-12));
  }
}

TEST_CASE("targets start at the GT boundary point nearest the rough start") {
  const auto gt = testing::rect(10, 10, 50, 20);
  std::vector<Point> rough{{30, 9}, {50, 15}, {30, 21}, {10, 15}};
  const auto t = make_ctblock_target(gt, rough, 20, 10);
  REQUIRE(t.contour.size() == 20);
  REQUIRE(t.center.size() == 10);
  CHECK(geom::distance(t.contour[0], {30, 10}) < 1e-12);
  // Perimeter 100 -> spacing 5, canonical orientation heads +x along the top edge.
  CHECK(geom::distance(t.contour[1], {35, 10}) < 1e-12);
  for (const auto& p : t.center) CHECK(p.y == doctest::Approx(15.0));
  CHECK(geom::distance(t.center.front(), rough[0]) <= geom::distance(t.center.back(), rough[0]));
}

TEST_CASE("ctblock loss: zero at the target, hand-computed toy, monotone along a line") {
  ParameterSet<double> ps;
  nn::Rng rng(6);
  Ctblock<double> block(tiny(), kFeat, kHeat, ps, rng);

  auto build = [](Graph<double>& g, std::vector<double> refined, std::vector<double> center) {
    CtblockOutput<double> out;
    out.refined = g.constant(Tensor<double>({1, 2, 2}, std::move(refined)));
    out.center = g.constant(Tensor<double>({1, 2, 2}, std::move(center)));
    return out;
  };
  CtblockTarget target{{{10, 20}, {30, 40}}, {{10, 20.5}, {33, 40}}};
  {
    Graph<double> g;
    const auto l = block.loss(g, build(g, {10, 20.5, 33, 40}, {10, 20, 30, 40}), {target}, 100, 100);
    CHECK(l.total.value()[0] == 0.0);
  }
  {
    // Normalized contour errors 0, 0.005, 0.03, 0 with beta 0.01:
    // 0.5 * 0.005^2 / 0.01 = 0.00125 and 0.03 - 0.005 = 0.025, mean over 4 = 0.0065625.
    Graph<double> g;
    const auto l = block.loss(g, build(g, {10, 20, 30, 40}, {10, 20, 30, 40}), {target}, 100, 100);
    CHECK(l.refine.value()[0] == doctest::Approx(0.0065625).epsilon(1e-12));
    CHECK(l.center.value()[0] == 0.0);
    CHECK(l.total.value()[0] == doctest::Approx(0.0065625).epsilon(1e-12));
  }
  double previous = std::numeric_limits<double>::infinity();
  for (int step = 0; step <= 10; ++step) {
    const double t = 1.0 - step / 10.0;
    Graph<double> g;
    const auto l = block.loss(g, build(g, {10, 20.5 + 6 * t, 33 - 4 * t, 40 + 9 * t}, {10, 20, 30, 40}), {target}, 100, 100);
    CHECK(l.total.value()[0] < previous);
    previous = l.total.value()[0];
  }
  CHECK(previous == 0.0);
}

TEST_CASE("zero-length displaced contour falls back to the centroid") {
  Graph<double> g;
  CtblockOutput<double> out;
  out.displaced = g.constant(Tensor<double>({1, 4, 2}, {5, 5, 5, 5, 5, 5, 5, 5}));
  out.center = ops::arclength_resample(out.displaced, 3);
  out.rough_points = {{{0, 0}, {4, 0}, {4, 2}, {0, 2}}};
  const auto lines = center_lines(out);
  REQUIRE(lines[0].size() == 3);
  for (const auto& p : lines[0]) CHECK(geom::distance(p, {2, 1}) < 1e-12);
}

TEST_CASE("ctblock passes an end-to-end gradient check from maps to losses") {
  ParameterSet<double> ps;
  nn::Rng rng(7);
  CtblockConfig cfg = tiny();
  cfg.contour_points = 8;
  cfg.center_points = 4;
  // A wide Huber band keeps the check away from the |x| kink.
  cfg.smooth_l1_beta = 10.0;
  Ctblock<double> block(cfg, kFeat, kHeat, ps, rng);
  wake_decoders(ps, 60, 0.2);
  std::mt19937_64 r(13);
  const auto gt = testing::random_star(r, {16, 16}, 6, 12, 7);
  std::vector<ContourInstance> inst{{0, rough_of(testing::random_star(r, {16, 16}, 5, 11, 6), 8)}};
  const auto target = make_ctblock_target(gt, inst[0].rough, 8, 4);

  // Module-2 sampling locations are values, not graph inputs, so the check
  // holds them at the forward pass's center points.
  std::vector<std::vector<Point>> centre;
  {
    Graph<double> g;
    const auto out = block.forward(g, g.constant(random_tensor({1, kFeat, 8, 8}, 14)),
                                   g.constant(random_tensor({1, kHeat, 32, 32}, 15)), inst);
    centre = {center_lines(out)[0]};
  }
  auto run = [&](Graph<double>& g, Var<double> f, Var<double> h) {
    auto out = block.forward(g, f, h, inst);
    out.offsets = block.refine_offsets(g, f, h, inst, centre);
    out.refined = ops::add(g.constant(out.rough), out.offsets);
    return block.loss(g, out, {target}, 32, 32).total;
  };
  const auto fn = [&](Graph<double>& g, const std::vector<Var<double>>& v) { return run(g, v[0], v[1]); };
  GradCheckOptions opts;
  opts.max_elements_per_input = 96;
  const auto report = grad_check(fn, {random_tensor({1, kFeat, 8, 8}, 14), random_tensor({1, kHeat, 32, 32}, 15)}, opts);
  INFO("worst: " << report.worst);
  CHECK(report.nan_count == 0);
  CHECK(report.max_relative_error < 1e-3);

  const auto f = random_tensor({1, kFeat, 8, 8}, 14), h = random_tensor({1, kHeat, 32, 32}, 15);
  auto loss_of = [&]() {
    Graph<double> g;
    g.set_grad_enabled(false);
    return run(g, g.constant(f), g.constant(h)).value()[0];
  };
  ps.zero_grad();
  {
    Graph<double> g;
    g.backward(run(g, g.constant(f), g.constant(h)));
  }
  std::mt19937_64 pick(5);
  for (const std::string name : {"ctblock.centerline.proj.weight", "ctblock.centerline.block1.attn.query.weight",
                                 "ctblock.centerline.dec2.weight", "ctblock.refine.block1.fc1.weight",
                                 "ctblock.refine.norm.gamma", "ctblock.refine.dec1.bias", "ctblock.refine.dec2.bias"}) {
    Parameter<double>* p = ps.find(name);
    REQUIRE(p);
    for (int trial = 0; trial < 4; ++trial) {
      const std::size_t k = pick() % p->value.numel();
      const double saved = p->value[k], eps = 1e-6;
      p->value[k] = saved + eps;
      const double up = loss_of();
      p->value[k] = saved - eps;
      const double down = loss_of();
      p->value[k] = saved;
      const double numeric = (up - down) / (2 * eps), analytic = p->grad[k];
      INFO(name << "[" << k << "] numeric " << numeric << " analytic " << analytic);
      CHECK(std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), 1e-4}) < 1e-3);
    }
  }
}
