#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "mixnet/fsnet/accounting.hpp"
#include "mixnet/fsnet/checkpoint.hpp"
#include "mixnet/fsnet/fsnet.hpp"
#include "mixnet/tensor/gradcheck.hpp"
#include "test_util.hpp"

using namespace mixnet;
using testing::random_tensor;

namespace {

/// [1,C,H,W] map whose channel c is the constant values[c].
Tensor<double> constant_channels(const std::vector<double>& values, int h, int w) {
  Tensor<double> t({1, static_cast<int>(values.size()), h, w});
  for (std::size_t c = 0; c < values.size(); ++c)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) t.at(0, static_cast<int>(c), i, j) = values[c];
  return t;
}

/// Returns the per-channel constant, failing if any channel varies.
std::vector<double> channel_constants(const Var<double>& v) {
  const auto& t = v.value();
  std::vector<double> out;
  for (int c = 0; c < t.dim(1); ++c) {
    const double first = t.at(0, c, 0, 0);
    for (int i = 0; i < t.dim(2); ++i)
      for (int j = 0; j < t.dim(3); ++j) REQUIRE(t.at(0, c, i, j) == first);
    out.push_back(first);
  }
  return out;
}

FsnetConfig tiny_config() {
  FsnetConfig c;
  c.version = "custom";
  c.stem_channels = 6;
  c.widths = {6, 12, 18, 24};
  c.depths.fill(1);
  c.head_hidden = 2;
  c.embedding_dim = 2;
  return c;
}

double total_params(const FsnetConfig& c) {
  ParameterSet<float> ps;
  nn::Rng rng(1);
  Fsnet<float> net(c, ps, rng);
  return static_cast<double>(ps.total_elements());
}

}  // namespace

TEST_CASE("two-input shuffle routes channel slices by scale") {
  Graph<double> g;
  auto a = g.constant(constant_channels({1, 2, 3, 4}, 8, 8));
  auto b = g.constant(constant_channels({5, 6, 7, 8}, 4, 4));
  const auto out = shuffle_layer<double>({a, b}, ops::ResampleMode::kNearest);
  REQUIRE(out.size() == 2);
  CHECK(out[0].shape() == Shape{1, 4, 8, 8});
  CHECK(out[1].shape() == Shape{1, 4, 4, 4});
  CHECK(channel_constants(out[0]) == std::vector<double>{1, 2, 5, 6});
  CHECK(channel_constants(out[1]) == std::vector<double>{3, 4, 7, 8});
}

TEST_CASE("three-input shuffle routes channel slices by scale") {
  Graph<double> g;
  auto a = g.constant(constant_channels({1, 2, 3, 4, 5, 6}, 8, 8));
  auto b = g.constant(constant_channels({11, 12, 13, 14, 15, 16}, 4, 4));
  auto c = g.constant(constant_channels({21, 22, 23}, 2, 2));
  const auto out = shuffle_layer<double>({a, b, c}, ops::ResampleMode::kNearest);
  REQUIRE(out.size() == 3);
  CHECK(out[0].shape() == Shape{1, 5, 8, 8});
  CHECK(out[1].shape() == Shape{1, 5, 4, 4});
  CHECK(out[2].shape() == Shape{1, 5, 2, 2});
  CHECK(channel_constants(out[0]) == std::vector<double>{1, 2, 11, 12, 21});
  CHECK(channel_constants(out[1]) == std::vector<double>{3, 4, 13, 14, 22});
  CHECK(channel_constants(out[2]) == std::vector<double>{5, 6, 15, 16, 23});
}

TEST_CASE("shuffle conserves channels and every output channel comes from exactly one input channel") {
  Graph<double> g;
  std::vector<Var<double>> in;
  std::vector<double> all;
  double next = 1;
  const std::array<int, 3> widths = {6, 12, 9};
  for (int s = 0; s < 3; ++s) {
    std::vector<double> v;
    for (int c = 0; c < widths[static_cast<std::size_t>(s)]; ++c) v.push_back(next++);
    all.insert(all.end(), v.begin(), v.end());
    in.push_back(g.constant(constant_channels(v, 16 >> s, 16 >> s)));
  }
  const auto out = shuffle_layer(in, ops::ResampleMode::kNearest);
  std::vector<double> seen;
  int total = 0;
  for (const auto& o : out) {
    total += o.dim(1);
    CHECK(o.dim(1) == (6 + 12 + 9) / 3);
    for (double v : channel_constants(o)) seen.push_back(v);
  }
  CHECK(total == 6 + 12 + 9);
  std::sort(seen.begin(), seen.end());
  CHECK(seen == all);
}

TEST_CASE("shuffle degenerate and error cases") {
  Graph<double> g;
  auto a = g.constant(random_tensor({1, 3, 4, 4}, 1));
  const auto same = shuffle_layer<double>({a}, ops::ResampleMode::kBilinear);
  REQUIRE(same.size() == 1);
  CHECK(same[0].id() == a.id());
  auto odd = g.constant(random_tensor({1, 3, 8, 8}, 2));
  auto b = g.constant(random_tensor({1, 4, 4, 4}, 3));
  CHECK_THROWS_WITH_AS(shuffle_layer<double>({odd, b}, ops::ResampleMode::kNearest), doctest::Contains("scale 1"),
                       ShapeError);
}

TEST_CASE("config versions and validation") {
  CHECK(FsnetConfig::version_depths("V1") == DepthVector{4, 4, 4, 4, 4, 4, 4, 4, 4, 4});
  CHECK(FsnetConfig::version_depths("V2") == DepthVector{2, 2, 2, 2, 2, 2, 2, 2, 2, 2});
  FsnetConfig c;
  c.widths = {24, 48, 100, 192};
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("scale 3"), ConfigError);
  c.widths = {25, 48, 96, 192};
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("scale 1"), ConfigError);
  c.fusion = FusionMode::kNone;
  CHECK_NOTHROW(c.validate());
  c = FsnetConfig{};
  c.depths[3] = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = FsnetConfig{};
  c.depths[0] = 2;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("V1"), ConfigError);

  const auto kv = KeyValueConfig::parse("version = V2\nwidths = [12, 24, 36, 48]\nfusion = additive\n");
  const auto parsed = FsnetConfig::from_kv(kv);
  CHECK(parsed.depths == FsnetConfig::version_depths("V2"));
  CHECK(parsed.widths == std::array<int, 4>{12, 24, 36, 48});
  CHECK(parsed.fusion == FusionMode::kAdditive);
  const auto round = FsnetConfig::from_kv(KeyValueConfig::parse(parsed.to_text()));
  CHECK(round.to_text() == parsed.to_text());
}

TEST_CASE("V1 and V2 build the advertised stack depths") {
  for (const std::string v : {"V1", "V2"}) {
    FsnetConfig c;
    c.version = v;
    c.depths = FsnetConfig::version_depths(v);
    ParameterSet<float> ps;
    nn::Rng rng(3);
    Fsnet<float> net(c, ps, rng);
    const int expect = v == "V1" ? 4 : 2;
    for (int p = 0; p < kDepthPositions; ++p) {
      const auto slot = depth_slot(p);
      const std::string prefix = "stage" + std::to_string(slot.stage) + ".s" + std::to_string(slot.scale) + ".block";
      int blocks = 0;
      for (const auto& l : net.layers())
        if (l.name.rfind(prefix, 0) == 0) ++blocks;
      CHECK(blocks == expect);
    }
  }
}

TEST_CASE("backbone pyramid shapes, fused channels and heads") {
  const FsnetConfig c = tiny_config();
  ParameterSet<double> ps;
  nn::Rng rng(5);
  Fsnet<double> net(c, ps, rng);
  Graph<double> g;
  auto image = g.constant(random_tensor({1, 3, 64, 64}, 9));
  const auto pyr = net.backbone(g, image);
  for (int k = 0; k < 4; ++k) {
    CHECK(pyr.maps[static_cast<std::size_t>(k)].dim(2) == 16 >> k);
    CHECK(pyr.maps[static_cast<std::size_t>(k)].dim(3) == 16 >> k);
    CHECK(pyr.maps[static_cast<std::size_t>(k)].dim(1) == c.widths[static_cast<std::size_t>(k)]);
  }
  CHECK(pyr.fused.shape() == Shape{1, c.fused_channels(), 16, 16});

  const auto h = net.heads(g, pyr.fused);
  CHECK(h.classification.shape() == Shape{1, 1, 64, 64});
  CHECK(h.distance.shape() == Shape{1, 1, 64, 64});
  CHECK(h.orientation.shape() == Shape{1, 2, 64, 64});
  CHECK(h.embedding.shape() == Shape{1, c.embedding_dim, 64, 64});
  for (double v : h.classification.value().values()) CHECK((v > 0.0 && v < 1.0));
  const auto& o = h.orientation.value();
  for (int i = 0; i < 64; ++i)
    for (int j = 0; j < 64; ++j) CHECK(std::hypot(o.at(0, 0, i, j), o.at(0, 1, i, j)) <= 1.0 + 1e-4);

  auto bad = g.constant(random_tensor({1, 3, 48, 64}, 9));
  CHECK_THROWS_WITH_AS(net.backbone(g, bad), doctest::Contains("pad"), ShapeError);
}

TEST_CASE("batch of two equals two batches of one") {
  FsnetConfig c = tiny_config();
  c.depths.fill(2);
  ParameterSet<float> ps;
  nn::Rng rng(8);
  Fsnet<float> net(c, ps, rng);
  const auto a = random_tensor<float>({1, 3, 64, 64}, 1), b = random_tensor<float>({1, 3, 64, 64}, 2);
  Tensor<float> both({2, 3, 64, 64});
  std::copy(a.values().begin(), a.values().end(), both.values().begin());
  std::copy(b.values().begin(), b.values().end(), both.values().begin() + static_cast<std::ptrdiff_t>(a.numel()));
  Graph<float> g;
  g.set_grad_enabled(false);
  const auto joint = net.backbone(g, g.constant(both)).fused.value();
  const auto fa = net.backbone(g, g.constant(a)).fused.value();
  const auto fb = net.backbone(g, g.constant(b)).fused.value();
  double worst = 0;
  for (std::size_t i = 0; i < fa.numel(); ++i) {
    worst = std::max(worst, static_cast<double>(std::abs(joint[i] - fa[i])));
    worst = std::max(worst, static_cast<double>(std::abs(joint[i + fa.numel()] - fb[i])));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("additive and shuffle fusion give identical shapes at every scale") {
  FsnetConfig c = tiny_config();
  std::array<Shape, 5> shapes;
  for (auto mode : {FusionMode::kShuffle, FusionMode::kAdditive}) {
    c.fusion = mode;
    ParameterSet<float> ps;
    nn::Rng rng(2);
    Fsnet<float> net(c, ps, rng);
    Graph<float> g;
    const auto pyr = net.backbone(g, g.constant(random_tensor<float>({1, 3, 64, 64}, 4)));
    for (int k = 0; k < 4; ++k) {
      if (mode == FusionMode::kShuffle) shapes[static_cast<std::size_t>(k)] = pyr.maps[static_cast<std::size_t>(k)].shape();
      else CHECK(pyr.maps[static_cast<std::size_t>(k)].shape() == shapes[static_cast<std::size_t>(k)]);
    }
    if (mode == FusionMode::kShuffle) shapes[4] = pyr.fused.shape();
    else CHECK(pyr.fused.shape() == shapes[4]);
  }
}

TEST_CASE("shuffle adds no parameters over the no-fusion baseline") {
  FsnetConfig c;
  c.widths = {24, 24, 24, 24};
  c.fusion = FusionMode::kShuffle;
  const double shuffled = total_params(c);
  c.fusion = FusionMode::kNone;
  CHECK(total_params(c) == shuffled);

  // Unequal widths: only the first blocks after each shuffle see different input counts.
  FsnetConfig d;
  d.fusion = FusionMode::kShuffle;
  const double with = total_params(d);
  d.fusion = FusionMode::kNone;
  const double without = total_params(d);
  const auto& C = d.widths;
  const int e1 = (C[0] + C[1]) / 2, e2 = (C[0] + C[1] + C[2]) / 3;
  double expect = 0;
  expect += 9.0 * C[0] * (e1 - C[0]) + 9.0 * C[1] * (e1 - C[1]);  // stage3 s1, s2
  expect += 9.0 * C[2] * (e1 - C[1]);                               // down2
  for (int s = 0; s < 3; ++s) expect += 9.0 * C[static_cast<std::size_t>(s)] * (e2 - C[static_cast<std::size_t>(s)]);
  expect += 9.0 * C[3] * (e2 - C[2]);  // down3
  CHECK(with - without == expect);
}

TEST_CASE("accounting rows") {
  CHECK(conv_param_count(4, 8, 3, true) == 296);
  FsnetConfig c;
  ParameterSet<float> ps;
  nn::Rng rng(1);
  Fsnet<float> net(c, ps, rng);
  const auto report = count_params_flops(net, 128, 128);
  CHECK(report.total_params == static_cast<long>(ps.total_elements()));
  int shuffles = 0;
  for (const auto& r : report.rows) {
    if (r.kind == "shuffle") {
      ++shuffles;
      CHECK(r.params == 0);
      CHECK(r.macs == 0);
    }
  }
  CHECK(shuffles == 2);
  // stem.conv1: 3 -> 24, 3x3 at 64x64 outputs.
  CHECK(report.rows.front().name == "stem.conv1");
  CHECK(report.rows.front().macs == 3LL * 24 * 9 * 64 * 64);
  CHECK(report.to_text().find("total") != std::string::npos);
}

TEST_CASE("reference-width parameter ordering across versions") {
  auto count = [](const std::string& v) {
    FsnetConfig c;
    c.version = v;
    c.depths = FsnetConfig::version_depths(v);
    c.stem_channels = 48;
    c.widths = {48, 96, 192, 384};
    return architecture_report(c, 64, 64).total_params;
  };
  const long v1 = count("V1"), v2 = count("V2"), v3 = count("V3"), v4 = count("V4");
  CHECK(v3 < v1);
  CHECK(v1 > v4);
  CHECK(v4 > v3);
  CHECK(v3 > v2);
}

TEST_CASE("backbone and heads pass an end-to-end gradient check on a 32x32 toy config") {
  const FsnetConfig c = tiny_config();
  ParameterSet<double> ps;
  nn::Rng rng(11);
  Fsnet<double> net(c, ps, rng);
  const auto weights = random_tensor({1, 1, 32, 32}, 21);
  const auto fn = [&](Graph<double>& g, const std::vector<Var<double>>& v) {
    const auto h = net.heads(g, net.backbone(g, v[0]).fused);
    return ops::sum(ops::mul(h.classification, g.constant(weights)));
  };
  GradCheckOptions opts;
  opts.max_elements_per_input = 64;
  const auto input_report = grad_check(fn, {random_tensor({1, 3, 32, 32}, 12)}, opts);
  INFO("worst input element: " << input_report.worst);
  CHECK(input_report.nan_count == 0);
  CHECK(input_report.max_relative_error < 1e-3);

  // Parameter gradients against central differences of the same scalar.
  const auto image = random_tensor({1, 3, 32, 32}, 13);
  auto loss_of = [&]() {
    Graph<double> g;
    g.set_grad_enabled(false);
    const auto h = net.heads(g, net.backbone(g, g.constant(image)).fused);
    const auto& cls = h.classification.value();
    double s = 0;
    for (std::size_t i = 0; i < cls.numel(); ++i) s += cls[i] * weights[i];
    return s;
  };
  ps.zero_grad();
  {
    Graph<double> g;
    const auto h = net.heads(g, net.backbone(g, g.constant(image)).fused);
    g.backward(ops::sum(ops::mul(h.classification, g.constant(weights))));
  }
  std::mt19937_64 pick(3);
  double worst = 0;
  for (const std::string name : {"stem.conv1.weight", "stage2.s2.block1.gn.gamma", "down3.weight",
                                 "stage4.s4.block1.weight", "head.conv.weight", "head.classification.bias"}) {
    Parameter<double>* p = ps.find(name);
    if (!p) continue;
    for (int trial = 0; trial < 4; ++trial) {
      const std::size_t k = pick() % p->value.numel();
      const double saved = p->value[k], eps = 1e-6;
      p->value[k] = saved + eps;
      const double up = loss_of();
      p->value[k] = saved - eps;
      const double down = loss_of();
      p->value[k] = saved;
      const double numeric = (up - down) / (2 * eps);
      const double analytic = p->grad[k];
      const double rel = std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), 1e-4});
      INFO(name << "[" << k << "] numeric " << numeric << " analytic " << analytic);
      CHECK(rel < 1e-3);
      worst = std::max(worst, rel);
    }
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("checkpoint round trip and corruption detection") {
  const auto dir = std::filesystem::temp_directory_path() / "mixnet_ckpt_test";
  std::filesystem::remove_all(dir);
  const std::string stem = (dir / "model").string();
  const FsnetConfig c = tiny_config();
  ParameterSet<float> a, b;
  nn::Rng ra(1), rb(2);
  Fsnet<float> na(c, a, ra), nb(c, b, rb);
  save_checkpoint(stem, a, c.to_text());
  CHECK(read_checkpoint_config(stem) == c.to_text());
  load_checkpoint(stem, b);
  for (auto* p : a.all()) {
    const auto* q = b.find(p->name);
    REQUIRE(q);
    CHECK(std::equal(p->value.values().begin(), p->value.values().end(), q->value.values().begin()));
  }

  FsnetConfig wide = c;
  wide.widths = {12, 12, 18, 24};
  ParameterSet<float> w;
  nn::Rng rw(3);
  Fsnet<float> nw(wide, w, rw);
  CHECK_THROWS_AS(load_checkpoint(stem, w), CheckpointCorrupt);

  {
    std::fstream f(stem + ".bin", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(16);
    const char junk[4] = {1, 2, 3, 4};
    f.write(junk, 4);
  }
  CHECK_THROWS_WITH_AS(load_checkpoint(stem, b), doctest::Contains("checksum"), CheckpointCorrupt);
  CHECK_THROWS_AS(load_checkpoint((dir / "missing").string(), b), CheckpointMissing);
  std::filesystem::remove_all(dir);
}
