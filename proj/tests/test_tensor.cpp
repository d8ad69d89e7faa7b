#include "doctest.h"
#include "mixnet/tensor/graph.hpp"
#include "mixnet/tensor/ops.hpp"
#include "mixnet/tensor/optim.hpp"
#include "test_util.hpp"

using namespace mixnet;

TEST_CASE("tensor shape and storage agree") {
  Tensor<float> t({2, 3, 4});
  CHECK(t.numel() == 24);
  CHECK(t.dim(-1) == 4);
  CHECK_THROWS_AS(Tensor<float>({2, 2}, std::vector<float>{1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(t.reshaped({5, 5}), ShapeError);
}

TEST_CASE("backward of x squared at 3 is 6") {
  Graph<double> g;
  auto x = g.leaf(Tensor<double>({1}, {3.0}));
  auto y = ops::mul(x, x);
  g.backward(y);
  CHECK(g.grad(x.id())[0] == doctest::Approx(6.0));
}

TEST_CASE("chain of two linears matches the hand-derived product") {
  // y = W2 (W1 x + b1) + b2, loss = sum(y); dL/dx = W1^T W2^T 1.
  Graph<double> g;
  auto x = g.leaf(Tensor<double>({1, 2}, {1.0, -2.0}));
  auto w1 = g.leaf(Tensor<double>({3, 2}, {1, 2, 3, 4, 5, 6}));
  auto b1 = g.leaf(Tensor<double>({3}, {0.5, 0, -0.5}));
  auto w2 = g.leaf(Tensor<double>({2, 3}, {1, 0, -1, 2, 1, 0}));
  auto b2 = g.leaf(Tensor<double>({2}, {0, 0}));
  auto y = ops::linear(ops::linear(x, w1, b1), w2, b2);
  // W1 x + b1 = [-3+0.5, -5, -7-0.5] = [-2.5, -5, -7.5]; W2 * that = [5, -10]
  CHECK(y.value()[0] == doctest::Approx(5.0));
  CHECK(y.value()[1] == doctest::Approx(-10.0));
  g.backward(ops::sum(y));
  // W2^T 1 = [3, 1, -1]; W1^T [3,1,-1] = [3+3-5, 6+4-6] = [1, 4]
  CHECK(g.grad(x.id())[0] == doctest::Approx(1.0));
  CHECK(g.grad(x.id())[1] == doctest::Approx(4.0));
  // dL/dW1 = [3,1,-1]^T x^T
  CHECK(g.grad(w1.id())[0] == doctest::Approx(3.0));
  CHECK(g.grad(w1.id())[1] == doctest::Approx(-6.0));
  CHECK(g.grad(w1.id())[5] == doctest::Approx(2.0));
}

TEST_CASE("backward contract violations are rejected") {
  SUBCASE("non-scalar loss") {
    Graph<double> g;
    auto x = g.leaf(Tensor<double>({2}, {1.0, 2.0}));
    CHECK_THROWS_AS(g.backward(ops::scale(x, 2.0)), GraphError);
  }
  SUBCASE("second backward without a new forward") {
    Graph<double> g;
    auto x = g.leaf(Tensor<double>({1}, {2.0}));
    auto y = ops::mul(x, x);
    g.backward(y);
    CHECK_THROWS_AS(g.backward(y), GraphError);
    CHECK_THROWS_AS(ops::mul(x, x), GraphError);
  }
}

TEST_CASE("every requires-grad leaf receives a gradient, deterministically") {
  auto run = [] {
    Graph<double> g;
    auto a = g.leaf(testing::random_tensor({2, 3}, 1));
    auto b = g.leaf(testing::random_tensor({2, 3}, 2));
    auto unused = g.leaf(testing::random_tensor({4}, 3));
    g.backward(ops::sum(ops::mul(ops::sigmoid(a), b)));
    CHECK(g.has_grad(a.id()));
    CHECK(g.has_grad(b.id()));
    CHECK(g.grad(unused.id()).numel() == 4);
    return g.grad(a.id()).storage();
  };
  CHECK(run() == run());
}

TEST_CASE("parameters accumulate gradients across graphs") {
  ParameterSet<double> ps;
  auto& p = ps.add("w", Tensor<double>({1}, {2.0}));
  CHECK_THROWS(ps.add("w", Tensor<double>({1})));
  p.zero_grad();
  for (int i = 0; i < 2; ++i) {
    Graph<double> g;
    auto w = g.parameter(p);
    g.backward(ops::mul(w, w));
  }
  CHECK(p.grad[0] == doctest::Approx(8.0));
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  ParameterSet<double> ps;
  auto& p = ps.add("w", Tensor<double>({3}, {1.0, -2.0, 0.5}));
  p.zero_grad();
  AdamState<double> state;
  adam_step(ps.all(), state, {});
  CHECK(p.value.storage() == std::vector<double>{1.0, -2.0, 0.5});
}

TEST_CASE("adam: first step from zero state moves by -lr * sign(g)") {
  ParameterSet<double> ps;
  auto& p = ps.add("w", Tensor<double>({3}, {0.0, 0.0, 0.0}));
  p.grad = Tensor<double>({3}, {0.3, -5.0, 1e-3});
  AdamState<double> state;
  AdamConfig cfg;
  cfg.lr = 0.01;
  adam_step(ps.all(), state, cfg);
  CHECK(p.value[0] == doctest::Approx(-0.01).epsilon(1e-6));
  CHECK(p.value[1] == doctest::Approx(0.01).epsilon(1e-6));
  CHECK(p.value[2] == doctest::Approx(-0.01).epsilon(1e-4));
}

TEST_CASE("adam: converges on a quadratic to its closed-form minimum") {
  // f(w) = sum_i a_i (w_i - c_i)^2, minimum at w = c. A reference simulation
  // of this run ends 5.9e-4 from c; constant-lr Adam keeps a small orbit.
  const std::vector<double> a = {1.0, 4.0}, c = {0.2, -0.12};
  ParameterSet<double> ps;
  auto& p = ps.add("w", Tensor<double>({2}, {0.0, 0.0}));
  AdamState<double> state;
  AdamConfig cfg;
  cfg.lr = 0.02;
  for (int step = 0; step < 100; ++step) {
    for (int i = 0; i < 2; ++i) p.grad[i] = 2 * a[i] * (p.value[i] - c[i]);
    adam_step(ps.all(), state, cfg);
  }
  CHECK(std::abs(p.value[0] - c[0]) < 1e-3);
  CHECK(std::abs(p.value[1] - c[1]) < 1e-3);
}

TEST_CASE("adam: shape mismatch is rejected") {
  ParameterSet<double> ps;
  auto& p = ps.add("w", Tensor<double>({3}));
  p.grad = Tensor<double>({2});
  AdamState<double> state;
  CHECK_THROWS_AS(adam_step(ps.all(), state, {}), ShapeError);
}
