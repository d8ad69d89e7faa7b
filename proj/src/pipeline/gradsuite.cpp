#include "mixnet/pipeline/gradsuite.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>

#include "json.hpp"
#include "mixnet/ctblock/ctblock.hpp"
#include "mixnet/fsnet/fsnet.hpp"
#include "mixnet/tensor/gradcheck.hpp"

namespace mixnet {

namespace {

using V = Var<double>;
using Vs = std::vector<V>;
using geom::Point;

Tensor<double> rnd(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor<double> t(std::move(shape));
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

Tensor<double> away_from_zero(Shape shape, std::uint64_t seed, double gap) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(gap, 1.0);
  std::bernoulli_distribution sign(0.5);
  Tensor<double> t(std::move(shape));
  for (auto& v : t.values()) v = sign(rng) ? dist(rng) : -dist(rng);
  return t;
}

struct Suite {
  std::vector<GradSuiteRow> rows;

  void op(const std::string& name, const GradCheckFn& fn, const std::vector<Tensor<double>>& inputs) {
    const auto r = grad_check(fn, inputs);
    rows.push_back({name, "op", r.max_relative_error, 1e-4, r.checked, r.nan_count});
  }
};

/// Central differences on a few entries of each named parameter against the
/// accumulated gradient of `loss`.
GradSuiteRow parameter_check(const std::string& name, ParameterSet<double>& ps, const std::vector<std::string>& names,
                             const std::function<V(Graph<double>&)>& loss) {
  ps.zero_grad();
  {
    Graph<double> g;
    g.backward(loss(g));
  }
  auto value = [&]() {
    Graph<double> g;
    g.set_grad_enabled(false);
    return loss(g).value()[0];
  };
  GradSuiteRow row{name, "composite", 0.0, 1e-3, 0, 0};
  std::mt19937_64 pick(5);
  for (const auto& n : names) {
    Parameter<double>* p = ps.find(n);
    if (!p) continue;
    for (int trial = 0; trial < 4; ++trial) {
      const std::size_t k = pick() % p->value.numel();
      const double saved = p->value[k], eps = 1e-6;
      p->value[k] = saved + eps;
      const double up = value();
      p->value[k] = saved - eps;
      const double down = value();
      p->value[k] = saved;
      const double numeric = (up - down) / (2 * eps), analytic = p->grad[k];
      if (!std::isfinite(numeric) || !std::isfinite(analytic)) {
        ++row.nan_count;
        continue;
      }
      row.max_relative_error = std::max(
          row.max_relative_error,
          std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), 1e-4}));
      ++row.checked;
    }
  }
  return row;
}

void op_cases(Suite& s) {
  s.op("conv2d", [](Graph<double>&, const Vs& v) { return ops::conv2d(v[0], v[1], v[2], 1, 1); },
       {rnd({2, 3, 6, 6}, 1), rnd({4, 3, 3, 3}, 2), rnd({4}, 3)});
  s.op("conv2d stride 2", [](Graph<double>&, const Vs& v) { return ops::conv2d(v[0], v[1], v[2], 2, 1); },
       {rnd({2, 3, 6, 6}, 4), rnd({2, 3, 3, 3}, 5), rnd({2}, 6)});
  const auto a = rnd({2, 3, 4}, 10), b = rnd({2, 3, 4}, 11);
  s.op("add", [](Graph<double>&, const Vs& v) { return ops::add(v[0], v[1]); }, {a, b});
  s.op("sub", [](Graph<double>&, const Vs& v) { return ops::sub(v[0], v[1]); }, {a, b});
  s.op("mul", [](Graph<double>&, const Vs& v) { return ops::mul(v[0], v[1]); }, {a, b});
  s.op("scale", [](Graph<double>&, const Vs& v) { return ops::scale(v[0], -1.5); }, {a});
  s.op("add_scalar", [](Graph<double>&, const Vs& v) { return ops::add_scalar(v[0], 0.25); }, {a});
  s.op("relu", [](Graph<double>&, const Vs& v) { return ops::relu(v[0]); }, {away_from_zero({3, 5, 4}, 13, 1e-3)});
  s.op("gelu", [](Graph<double>&, const Vs& v) { return ops::gelu(v[0]); }, {a});
  s.op("sigmoid", [](Graph<double>&, const Vs& v) { return ops::sigmoid(v[0]); }, {a});
  s.op("radial_squash", [](Graph<double>&, const Vs& v) { return ops::radial_squash(v[0]); }, {rnd({2, 2, 3, 3}, 12)});
  s.op("sum", [](Graph<double>&, const Vs& v) { return ops::sum(v[0]); }, {a});
  s.op("mean", [](Graph<double>&, const Vs& v) { return ops::mean(v[0]); }, {a});
  const auto x = rnd({2, 6, 3, 3}, 20);
  s.op("reshape", [](Graph<double>&, const Vs& v) { return ops::reshape(v[0], {3, 36}); }, {x});
  s.op("permute", [](Graph<double>&, const Vs& v) { return ops::permute(v[0], {0, 2, 3, 1}); }, {x});
  s.op("slice", [](Graph<double>&, const Vs& v) { return ops::slice(v[0], 1, 2, 3); }, {x});
  s.op("split/concat channels",
       [](Graph<double>&, const Vs& v) {
         auto parts = ops::split_channels(v[0], 3);
         return ops::concat_channels<double>({ops::scale(parts[2], 2.0), parts[0], ops::mul(parts[1], parts[1])});
       },
       {x});
  s.op("concat", [](Graph<double>&, const Vs& v) { return ops::concat<double>({v[0], v[1]}, 2); },
       {rnd({2, 3, 4}, 21), rnd({2, 3, 2}, 22)});
  s.op("group_norm", [](Graph<double>&, const Vs& v) { return ops::group_norm(v[0], v[1], v[2], 2); },
       {rnd({2, 4, 3, 3}, 30), rnd({4}, 31, 0.5, 1.5), rnd({4}, 32)});
  s.op("layer_norm", [](Graph<double>&, const Vs& v) { return ops::layer_norm(v[0], v[1], v[2]); },
       {rnd({2, 3, 6}, 33), rnd({6}, 34, 0.5, 1.5), rnd({6}, 35)});
  s.op("linear", [](Graph<double>&, const Vs& v) { return ops::linear(v[0], v[1], v[2]); },
       {rnd({2, 3, 5}, 36), rnd({4, 5}, 37), rnd({4}, 38)});
  s.op("matmul", [](Graph<double>&, const Vs& v) { return ops::matmul(v[0], v[1], false, true); },
       {rnd({2, 3, 4}, 39), rnd({2, 5, 4}, 40)});
  s.op("softmax", [](Graph<double>&, const Vs& v) { return ops::softmax(v[0]); }, {rnd({2, 3, 5}, 41, -3, 3)});
  const auto img = rnd({1, 2, 8, 8}, 50);
  for (double f : {0.125, 0.5, 2.0, 8.0}) {
    for (auto mode : {ops::ResampleMode::kNearest, ops::ResampleMode::kBilinear}) {
      char name[64];
      std::snprintf(name, sizeof name, "resample x%g %s", f, mode == ops::ResampleMode::kNearest ? "nearest" : "bilinear");
      s.op(name, [f, mode](Graph<double>&, const Vs& v) { return ops::resample(v[0], f, mode); }, {img});
    }
  }
  s.op("resize_bilinear", [](Graph<double>&, const Vs& v) { return ops::resize_bilinear(v[0], 5, 11); }, {img});
  s.op("avg_pool", [](Graph<double>&, const Vs& v) { return ops::avg_pool(v[0], 2); }, {img});
  const std::vector<ops::PointSample> pts = {{0, 3.3, 7.9}, {0, 15.2, 0.4}, {0, 8.0, 8.0}, {0, -2.0, 30.0}};
  s.op("sample_points", [pts](Graph<double>&, const Vs& v) { return ops::sample_points(v[0], pts, 2.0); }, {img});
  Tensor<double> poly({2, 5, 2});
  const auto noise = rnd({2, 5, 2}, 60, -0.3, 0.3);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t i = 0; i < 5; ++i) {
      poly[(b * 5 + i) * 2] = 2.0 * static_cast<double>(i) + noise[(b * 5 + i) * 2];
      poly[(b * 5 + i) * 2 + 1] = static_cast<double>(i % 2) * 1.5 + noise[(b * 5 + i) * 2 + 1];
    }
  s.op("arclength_resample", [](Graph<double>&, const Vs& v) { return ops::arclength_resample(v[0], 7); }, {poly});
  const auto target = rnd({2, 1, 4, 4}, 70, 0.0, 1.0), weight = rnd({2, 1, 4, 4}, 71, 0.5, 2.0);
  s.op("bce_with_logits",
       [target, weight](Graph<double>&, const Vs& v) { return ops::bce_with_logits(v[0], target, weight); },
       {rnd({2, 1, 4, 4}, 72, -3, 3)});
  Tensor<double> mask({2, 1, 4, 4});
  for (std::size_t i = 0; i < mask.numel(); i += 3) mask[i] = 1.0;
  s.op("masked_mse", [target, mask](Graph<double>&, const Vs& v) { return ops::masked_mse(v[0], target, mask); },
       {rnd({2, 1, 4, 4}, 73)});
  const Tensor<double> zero({3, 4});
  s.op("smooth_l1", [zero](Graph<double>&, const Vs& v) { return ops::smooth_l1(v[0], zero, 0.1); },
       {away_from_zero({3, 4}, 74, 0.05)});
  std::vector<int> ids(2 * 4 * 4, 0);
  for (int i = 0; i < 16; ++i) ids[static_cast<std::size_t>(i)] = i < 6 ? 1 : (i < 12 ? 2 : 0);
  for (int i = 16; i < 32; ++i) ids[static_cast<std::size_t>(i)] = i % 3 == 0 ? 3 : 0;
  s.op("discriminative_loss",
       [ids](Graph<double>&, const Vs& v) { return ops::discriminative_loss(v[0], ids, 0.1, 1.5); },
       {rnd({2, 3, 4, 4}, 80, -1.5, 1.5)});
}

void backbone_case(Suite& s) {
  FsnetConfig c;
  c.version = "custom";
  c.stem_channels = 6;
  c.widths = {6, 12, 18, 24};
  c.depths.fill(1);
  c.head_hidden = 2;
  c.embedding_dim = 2;
  ParameterSet<double> ps;
  nn::Rng rng(11);
  Fsnet<double> net(c, ps, rng);
  const auto weights = rnd({1, 1, 32, 32}, 21);
  const auto fn = [&](Graph<double>& g, const Vs& v) {
    const auto h = net.heads(g, net.backbone(g, v[0]).fused);
    return ops::sum(ops::mul(h.classification, g.constant(weights)));
  };
  GradCheckOptions opts;
  opts.max_elements_per_input = 64;
  const auto r = grad_check(fn, {rnd({1, 3, 32, 32}, 12)}, opts);
  s.rows.push_back({"fsnet+heads (input)", "composite", r.max_relative_error, 1e-3, r.checked, r.nan_count});
  const auto image = rnd({1, 3, 32, 32}, 13);
  s.rows.push_back(parameter_check(
      "fsnet+heads (parameters)", ps,
      {"stem.conv1.weight", "stage2.s2.block1.gn.gamma", "down3.weight", "stage4.s4.block1.weight",
       "head.conv.weight", "head.classification.bias"},
      [&](Graph<double>& g) { return fn(g, {g.constant(image)}); }));
}

geom::Polygon star(std::mt19937_64& r, Point c, double lo, double hi, int k) {
  std::uniform_real_distribution<double> radius(lo, hi);
  geom::Polygon p;
  for (int i = 0; i < k; ++i) {
    const double a = 2 * std::numbers::pi * i / k, rr = radius(r);
    p.push_back({c.x + rr * std::cos(a), c.y + rr * std::sin(a)});
  }
  return geom::canonicalize(p);
}

void ctblock_case(Suite& s) {
  constexpr int kFeat = 6, kHeat = 4;
  CtblockConfig cfg;
  cfg.dim = 16;
  cfg.heads = 2;
  cfg.mlp_hidden = 24;
  cfg.blocks = 1;
  cfg.coord_frequencies = 3;
  cfg.index_frequencies = 2;
  cfg.contour_points = 8;
  cfg.center_points = 4;
  cfg.smooth_l1_beta = 10.0;
  ParameterSet<double> ps;
  nn::Rng rng(7);
  Ctblock<double> block(cfg, kFeat, kHeat, ps, rng);
  std::uint64_t seed = 60;
  for (const std::string m : {"centerline", "refine"}) {
    auto* w = ps.find("ctblock." + m + ".dec2.weight");
    w->value = rnd(w->value.shape(), seed++, -0.2, 0.2);
  }
  std::mt19937_64 r(13);
  const auto gt = star(r, {16, 16}, 6, 12, 7);
  std::vector<ContourInstance> inst{{0, geom::resample_contour(star(r, {16, 16}, 5, 11, 6), 8)}};
  const auto target = make_ctblock_target(gt, inst[0].rough, 8, 4);
  const auto f = rnd({1, kFeat, 8, 8}, 14), h = rnd({1, kHeat, 32, 32}, 15);
  std::vector<std::vector<Point>> centre;
  {
    Graph<double> g;
    centre = {center_lines(block.forward(g, g.constant(f), g.constant(h), inst))[0]};
  }
  // Module-2 sampling locations are values, not graph inputs; hold them fixed.
  auto run = [&](Graph<double>& g, V fv, V hv) {
    auto out = block.forward(g, fv, hv, inst);
    out.offsets = block.refine_offsets(g, fv, hv, inst, centre);
    out.refined = ops::add(g.constant(out.rough), out.offsets);
    return block.loss(g, out, {target}, 32, 32).total;
  };
  GradCheckOptions opts;
  opts.max_elements_per_input = 96;
  const auto rep = grad_check([&](Graph<double>& g, const Vs& v) { return run(g, v[0], v[1]); }, {f, h}, opts);
  s.rows.push_back({"ctblock (maps)", "composite", rep.max_relative_error, 1e-3, rep.checked, rep.nan_count});
  s.rows.push_back(parameter_check(
      "ctblock (parameters)", ps,
      {"ctblock.centerline.proj.weight", "ctblock.centerline.block1.attn.query.weight",
       "ctblock.centerline.dec2.weight", "ctblock.refine.block1.fc1.weight", "ctblock.refine.norm.gamma",
       "ctblock.refine.dec1.bias", "ctblock.refine.dec2.bias"},
      [&](Graph<double>& g) { return run(g, g.constant(f), g.constant(h)); }));
}

}  // namespace

std::vector<GradSuiteRow> run_gradient_suite() {
  Suite s;
  op_cases(s);
  backbone_case(s);
  ctblock_case(s);
  return s.rows;
}

std::string gradient_suite_text(const std::vector<GradSuiteRow>& rows) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-28s %-9s %12s %9s %7s  %s\n", "check", "kind", "max rel err", "tolerance",
                "entries", "result");
  out << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-28s %-9s %12.3e %9.0e %7zu  %s\n", r.name.c_str(), r.kind.c_str(),
                  r.max_relative_error, r.tolerance, r.checked, r.pass() ? "ok" : "FAIL");
    out << line;
  }
  return out.str();
}

std::string gradient_suite_json(const std::vector<GradSuiteRow>& rows) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : rows) {
    j.push_back({{"name", r.name},
                 {"kind", r.kind},
                 {"max_relative_error", r.max_relative_error},
                 {"tolerance", r.tolerance},
                 {"checked", r.checked},
                 {"nan_count", r.nan_count},
                 {"pass", r.pass()}});
  }
  return j.dump(2);
}

}  // namespace mixnet
