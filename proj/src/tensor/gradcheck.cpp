#include "mixnet/tensor/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mixnet/tensor/ops.hpp"

namespace mixnet {

namespace {

Var<double> projected_loss(Graph<double>& g, Var<double> out, const Tensor<double>& projection) {
  if (out.value().numel() == 1) return out;
  return ops::sum(ops::mul(out, g.constant(projection)));
}

double evaluate(const GradCheckFn& fn, const std::vector<Tensor<double>>& inputs, const Tensor<double>& projection) {
  Graph<double> g;
  g.set_grad_enabled(false);
  std::vector<Var<double>> vars;
  for (const auto& t : inputs) vars.push_back(g.constant(t));
  Var<double> out = fn(g, vars);
  return projected_loss(g, out, projection).value()[0];
}

}  // namespace

GradCheckReport grad_check(const GradCheckFn& fn, const std::vector<Tensor<double>>& inputs,
                           const GradCheckOptions& options) {
  std::mt19937_64 rng(options.seed);
  GradCheckReport report;

  Graph<double> g;
  std::vector<Var<double>> leaves;
  for (const auto& t : inputs) leaves.push_back(g.leaf(t));
  Var<double> out = fn(g, leaves);
  Tensor<double> projection(out.shape());
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (auto& v : projection.values()) v = unit(rng);
  Var<double> loss = projected_loss(g, out, projection);
  g.backward(loss);

  std::vector<Tensor<double>> work = inputs;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Tensor<double> analytic = g.has_grad(leaves[i].id()) ? g.grad(leaves[i].id()) : Tensor<double>(inputs[i].shape());
    std::vector<std::size_t> idx(inputs[i].numel());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (idx.size() > options.max_elements_per_input) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(options.max_elements_per_input);
      std::sort(idx.begin(), idx.end());
    }
    for (std::size_t k : idx) {
      const double orig = work[i][k];
      work[i][k] = orig + options.epsilon;
      const double plus = evaluate(fn, work, projection);
      work[i][k] = orig - options.epsilon;
      const double minus = evaluate(fn, work, projection);
      work[i][k] = orig;
      const double numeric = (plus - minus) / (2 * options.epsilon);
      const double a = analytic[k];
      ++report.checked;
      if (!std::isfinite(numeric) || !std::isfinite(a)) {
        ++report.nan_count;
        continue;
      }
      const double denom = std::max({std::abs(a), std::abs(numeric), options.denominator_floor});
      const double rel = std::abs(a - numeric) / denom;
      if (rel > report.max_relative_error) {
        report.max_relative_error = rel;
        report.worst = "input[" + std::to_string(i) + "] element " + std::to_string(k);
      }
    }
  }
  return report;
}

}  // namespace mixnet
