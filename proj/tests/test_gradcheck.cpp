#include "doctest.h"
#include "mixnet/tensor/gradcheck.hpp"
#include "mixnet/tensor/ops.hpp"
#include "test_util.hpp"

using namespace mixnet;
using testing::random_tensor;
using V = Var<double>;
using Vs = std::vector<V>;

namespace {

double check(const GradCheckFn& fn, const std::vector<Tensor<double>>& inputs) {
  const auto report = grad_check(fn, inputs);
  INFO("worst: " << report.worst);
  CHECK(report.nan_count == 0);
  CHECK(report.checked > 0);
  return report.max_relative_error;
}

}  // namespace

TEST_CASE("conv2d gradients match central differences below 1e-5") {
  const auto fn = [](Graph<double>&, const Vs& v) { return ops::conv2d(v[0], v[1], v[2], 1, 1); };
  CHECK(check(fn, {random_tensor({2, 3, 6, 6}, 1), random_tensor({4, 3, 3, 3}, 2), random_tensor({4}, 3)}) < 1e-5);
  const auto strided = [](Graph<double>&, const Vs& v) { return ops::conv2d(v[0], v[1], v[2], 2, 1); };
  CHECK(check(strided, {random_tensor({2, 3, 6, 6}, 4), random_tensor({2, 3, 3, 3}, 5), random_tensor({2}, 6)}) < 1e-5);
  const auto pointwise = [](Graph<double>&, const Vs& v) { return ops::conv2d(v[0], v[1], V{}, 1, 0); };
  CHECK(check(pointwise, {random_tensor({2, 3, 4, 4}, 7), random_tensor({5, 3, 1, 1}, 8)}) < 1e-5);
}

TEST_CASE("elementwise ops pass the gradient check") {
  const auto a = random_tensor({2, 3, 4}, 10), b = random_tensor({2, 3, 4}, 11);
  CHECK(check([](Graph<double>&, const Vs& v) { return ops::add(v[0], v[1]); }, {a, b}) < 1e-4);
  CHECK(check([](Graph<double>&, const Vs& v) { return ops::sub(v[0], v[1]); }, {a, b}) < 1e-4);
  CHECK(check([](Graph<double>&, const Vs& v) { return ops::mul(v[0], v[1]); }, {a, b}) < 1e-4);
  CHECK(check([](Graph<double>&, const Vs& v) { return ops::scale(v[0], -1.5); }, {a}) < 1e-4);
  CHECK(check([](Graph<double>&, const Vs& v) { return ops::sigmoid(v[0]); }, {a}) < 1e-4);
  CHECK(check([](Graph<double>&, const Vs& v) { return ops::gelu(v[0]); }, {a}) < 1e-4);
  CHECK(check([](Graph<double>&, const Vs& v) { return ops::radial_squash(v[0]); }, {random_tensor({2, 2, 3, 3}, 12)}) <
        1e-4);
  CHECK(check([](Graph<double>&, const Vs& v) { return ops::mean(v[0]); }, {a}) < 1e-4);
}

TEST_CASE("relu is checked away from its kink") {
  const auto x = testing::random_away_from_zero({3, 5, 4}, 13, 1e-3);
  CHECK(check([](Graph<double>&, const Vs& v) { return ops::relu(v[0]); }, {x}) < 1e-4);
}

TEST_CASE("layout ops pass the gradient check") {
  const auto x = random_tensor({2, 6, 3, 3}, 20);
  CHECK(check([](Graph<double>&, const Vs& v) { return ops::permute(v[0], {0, 2, 3, 1}); }, {x}) < 1e-4);
  CHECK(check([](Graph<double>&, const Vs& v) { return ops::slice(v[0], 1, 2, 3); }, {x}) < 1e-4);
  CHECK(check(
            [](Graph<double>&, const Vs& v) {
              auto parts = ops::split_channels(v[0], 3);
              return ops::concat_channels<double>({ops::scale(parts[2], 2.0), parts[0], ops::mul(parts[1], parts[1])});
            },
            {x}) < 1e-4);
  CHECK(check([](Graph<double>&, const Vs& v) { return ops::concat<double>({v[0], v[1]}, 2); },
              {random_tensor({2, 3, 4}, 21), random_tensor({2, 3, 2}, 22)}) < 1e-4);
}

TEST_CASE("normalization and dense ops pass the gradient check") {
  CHECK(check([](Graph<double>&, const Vs& v) { return ops::group_norm(v[0], v[1], v[2], 2); },
              {random_tensor({2, 4, 3, 3}, 30), random_tensor({4}, 31, 0.5, 1.5), random_tensor({4}, 32)}) < 1e-4);
  CHECK(check([](Graph<double>&, const Vs& v) { return ops::layer_norm(v[0], v[1], v[2]); },
              {random_tensor({2, 3, 6}, 33), random_tensor({6}, 34, 0.5, 1.5), random_tensor({6}, 35)}) < 1e-4);
  CHECK(check([](Graph<double>&, const Vs& v) { return ops::linear(v[0], v[1], v[2]); },
              {random_tensor({2, 3, 5}, 36), random_tensor({4, 5}, 37), random_tensor({4}, 38)}) < 1e-4);
  for (bool ta : {false, true}) {
    for (bool tb : {false, true}) {
      const Shape sa = ta ? Shape{2, 4, 3} : Shape{2, 3, 4};
      const Shape sb = tb ? Shape{2, 5, 4} : Shape{2, 4, 5};
      CHECK(check([ta, tb](Graph<double>&, const Vs& v) { return ops::matmul(v[0], v[1], ta, tb); },
                  {random_tensor(sa, 39), random_tensor(sb, 40)}) < 1e-4);
    }
  }
  CHECK(check([](Graph<double>&, const Vs& v) { return ops::softmax(v[0]); }, {random_tensor({2, 3, 5}, 41, -3, 3)}) <
        1e-4);
}

TEST_CASE("resampling ops pass the gradient check") {
  const auto x = random_tensor({1, 2, 8, 8}, 50);
  for (double f : {0.25, 0.5, 2.0, 4.0}) {
    for (auto mode : {ops::ResampleMode::kNearest, ops::ResampleMode::kBilinear}) {
      CHECK(check([f, mode](Graph<double>&, const Vs& v) { return ops::resample(v[0], f, mode); }, {x}) < 1e-4);
    }
  }
  CHECK(check([](Graph<double>&, const Vs& v) { return ops::resize_bilinear(v[0], 5, 11); }, {x}) < 1e-4);
  CHECK(check([](Graph<double>&, const Vs& v) { return ops::avg_pool(v[0], 2); }, {x}) < 1e-4);
  const std::vector<ops::PointSample> pts = {{0, 3.3, 7.9}, {0, 15.2, 0.4}, {0, 8.0, 8.0}, {0, -2.0, 30.0}};
  CHECK(check([pts](Graph<double>&, const Vs& v) { return ops::sample_points(v[0], pts, 2.0); }, {x}) < 1e-4);
}

TEST_CASE("arclength_resample passes the gradient check") {
  Tensor<double> poly({2, 5, 2});
  const auto noise = random_tensor({2, 5, 2}, 60, -0.3, 0.3);
  for (int b = 0; b < 2; ++b)
    for (int i = 0; i < 5; ++i) {
      poly[(b * 5 + i) * 2] = 2.0 * i + noise[(b * 5 + i) * 2];
      poly[(b * 5 + i) * 2 + 1] = (i % 2) * 1.5 + noise[(b * 5 + i) * 2 + 1];
    }
  CHECK(check([](Graph<double>&, const Vs& v) { return ops::arclength_resample(v[0], 7); }, {poly}) < 1e-4);
}

TEST_CASE("losses pass the gradient check") {
  const auto target = random_tensor({2, 1, 4, 4}, 70, 0.0, 1.0);
  const auto weight = random_tensor({2, 1, 4, 4}, 71, 0.5, 2.0);
  CHECK(check([&](Graph<double>&, const Vs& v) { return ops::bce_with_logits(v[0], target, weight); },
              {random_tensor({2, 1, 4, 4}, 72, -3, 3)}) < 1e-4);
  Tensor<double> mask({2, 1, 4, 4});
  for (std::size_t i = 0; i < mask.numel(); i += 3) mask[i] = 1.0;
  CHECK(check([&](Graph<double>&, const Vs& v) { return ops::masked_mse(v[0], target, mask); },
              {random_tensor({2, 1, 4, 4}, 73)}) < 1e-4);
  // Keep residuals away from the +-beta transition.
  const auto pred = testing::random_away_from_zero({3, 4}, 74, 0.05);
  Tensor<double> zero({3, 4});
  CHECK(check([&](Graph<double>&, const Vs& v) { return ops::smooth_l1(v[0], zero, 0.1); }, {pred}) < 1e-4);
}

TEST_CASE("discriminative loss passes the gradient check") {
  std::vector<int> ids(2 * 4 * 4, 0);
  for (int i = 0; i < 16; ++i) ids[i] = i < 6 ? 1 : (i < 12 ? 2 : 0);
  for (int i = 16; i < 32; ++i) ids[i] = i % 3 == 0 ? 3 : 0;
  const auto emb = random_tensor({2, 3, 4, 4}, 80, -1.5, 1.5);
  CHECK(check([&](Graph<double>&, const Vs& v) { return ops::discriminative_loss(v[0], ids, 0.1, 1.5); }, {emb}) <
        1e-4);
}

TEST_CASE("grad_check reports NaN encounters") {
  const auto fn = [](Graph<double>& g, const Vs& v) {
    auto nan = g.constant(Tensor<double>({2}, std::numeric_limits<double>::quiet_NaN()));
    return ops::sum(ops::mul(v[0], nan));
  };
  const auto report = grad_check(fn, {random_tensor({2}, 90)});
  CHECK(report.nan_count == 2);
}

TEST_CASE("grad_check samples large inputs") {
  GradCheckOptions opt;
  opt.max_elements_per_input = 10;
  const auto report =
      grad_check([](Graph<double>&, const Vs& v) { return ops::sigmoid(v[0]); }, {random_tensor({1000}, 91)}, opt);
  CHECK(report.checked == 10);
  CHECK(report.max_relative_error < 1e-4);
}
