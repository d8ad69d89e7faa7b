#include <cmath>
#include <map>

#include "mixnet/tensor/ops.hpp"
#include "op_util.hpp"

namespace mixnet::ops {

namespace {

template <typename T>
void require_target(const Var<T>& pred, const Tensor<T>& t, const char* op, const char* what) {
  if (t.shape() != pred.shape()) {
    throw ShapeError(std::string(op) + ": " + what + " shape " + to_string(t.shape()) + " differs from prediction " +
                     to_string(pred.shape()));
  }
}

}  // namespace

template <typename T>
Var<T> bce_with_logits(Var<T> logits, const Tensor<T>& target, const Tensor<T>& weight) {
  require_target(logits, target, "bce_with_logits", "target");
  const bool weighted = !weight.empty();
  if (weighted) require_target(logits, weight, "bce_with_logits", "weight");
  const auto& z = logits.value();
  const std::size_t n = z.numel();
  double total = 0, wsum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = weighted ? weight[i] : 1.0;
    const double zi = z[i];
    total += w * (std::max(zi, 0.0) - zi * target[i] + std::log1p(std::exp(-std::abs(zi))));
    wsum += w;
  }
  const double norm = wsum > 0 ? 1.0 / wsum : 0.0;
  Tensor<T> out({1}, {static_cast<T>(total * norm)});
  const int iz = logits.id();
  return logits.graph().record(std::move(out), {logits}, [=, t = target, w = weight](Graph<T>& g, int self) {
    const T go = g.grad(self)[0];
    const auto& z = g.value(iz);
    auto& gz = g.grad(iz);
    for (std::size_t i = 0; i < n; ++i) {
      const T s = T(1) / (T(1) + std::exp(-z[i]));
      const T wi = w.empty() ? T(1) : w[i];
      gz[i] += go * wi * (s - t[i]) * static_cast<T>(norm);
    }
  });
}

template <typename T>
Var<T> masked_mse(Var<T> pred, const Tensor<T>& target, const Tensor<T>& mask) {
  require_target(pred, target, "masked_mse", "target");
  require_target(pred, mask, "masked_mse", "mask");
  const auto& p = pred.value();
  double total = 0, msum = 0;
  for (std::size_t i = 0; i < p.numel(); ++i) {
    if (mask[i] == T(0)) continue;
    const double d = p[i] - target[i];
    total += mask[i] * d * d;
    msum += mask[i];
  }
  const double norm = msum > 0 ? 1.0 / msum : 0.0;
  const int ip = pred.id();
  return pred.graph().record(Tensor<T>({1}, {static_cast<T>(total * norm)}), {pred},
                             [=, t = target, m = mask](Graph<T>& g, int self) {
    const T go = g.grad(self)[0];
    const auto& p = g.value(ip);
    auto& gp = g.grad(ip);
    for (std::size_t i = 0; i < p.numel(); ++i) {
      if (m[i] == T(0)) continue;
      gp[i] += go * T(2) * m[i] * (p[i] - t[i]) * static_cast<T>(norm);
    }
  });
}

template <typename T>
Var<T> smooth_l1(Var<T> pred, const Tensor<T>& target, T beta) {
  require_target(pred, target, "smooth_l1", "target");
  if (!(beta > T(0))) throw ShapeError("smooth_l1: beta must be positive");
  const auto& p = pred.value();
  const std::size_t n = p.numel();
  if (n == 0) throw ShapeError("smooth_l1: empty prediction");
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = std::abs(static_cast<double>(p[i]) - target[i]);
    total += d < beta ? 0.5 * d * d / beta : d - 0.5 * beta;
  }
  const int ip = pred.id();
  return pred.graph().record(Tensor<T>({1}, {static_cast<T>(total / n)}), {pred},
                             [=, t = target](Graph<T>& g, int self) {
    const T go = g.grad(self)[0] / static_cast<T>(n);
    const auto& p = g.value(ip);
    auto& gp = g.grad(ip);
    for (std::size_t i = 0; i < n; ++i) {
      const T d = p[i] - t[i];
      const T ad = std::abs(d);
      gp[i] += go * (ad < beta ? d / beta : (d > 0 ? T(1) : T(-1)));
    }
  });
}

template <typename T>
Var<T> discriminative_loss(Var<T> embedding, const std::vector<int>& instance_ids, T delta_pull, T delta_push) {
  detail::require_rank(embedding, 4, "discriminative_loss", "embedding");
  const auto& s = embedding.shape();
  const int B = s[0], E = s[1];
  const std::size_t HW = static_cast<std::size_t>(s[2]) * s[3];
  if (instance_ids.size() != static_cast<std::size_t>(B) * HW) {
    throw ShapeError("discriminative_loss: instance map has " + std::to_string(instance_ids.size()) +
                     " entries, expected " + std::to_string(static_cast<std::size_t>(B) * HW));
  }
  const auto& ev = embedding.value();

  // Per image: instance id -> (pixel list, mean).
  struct Instance {
    std::vector<std::size_t> pixels;
    std::vector<double> mean;
  };
  std::vector<std::vector<Instance>> per_image(static_cast<std::size_t>(B));
  for (int b = 0; b < B; ++b) {
    std::map<int, Instance> found;
    for (std::size_t p = 0; p < HW; ++p) {
      const int id = instance_ids[static_cast<std::size_t>(b) * HW + p];
      if (id > 0) found[id].pixels.push_back(p);
    }
    for (auto& [id, inst] : found) {
      inst.mean.assign(static_cast<std::size_t>(E), 0.0);
      for (std::size_t p : inst.pixels) {
        for (int e = 0; e < E; ++e) inst.mean[e] += ev[(static_cast<std::size_t>(b) * E + e) * HW + p];
      }
      for (auto& m : inst.mean) m /= static_cast<double>(inst.pixels.size());
      per_image[b].push_back(std::move(inst));
    }
  }
  int images_with_instances = 0;
  for (const auto& im : per_image) images_with_instances += im.empty() ? 0 : 1;

  auto evaluate = [=](const Tensor<T>& emb, Tensor<T>* grad, T go) {
    double total = 0;
    const double img_norm = images_with_instances > 0 ? 1.0 / images_with_instances : 0.0;
    for (int b = 0; b < B; ++b) {
      const auto& insts = per_image[b];
      const int K = static_cast<int>(insts.size());
      if (K == 0) continue;
      auto at = [&](int e, std::size_t p) { return (static_cast<std::size_t>(b) * E + e) * HW + p; };
      std::vector<std::vector<double>> gmean(static_cast<std::size_t>(K), std::vector<double>(static_cast<std::size_t>(E), 0.0));
      for (int k = 0; k < K; ++k) {
        const auto& inst = insts[k];
        const double w = img_norm / (K * static_cast<double>(inst.pixels.size()));
        for (std::size_t p : inst.pixels) {
          double d2 = 0;
          for (int e = 0; e < E; ++e) {
            const double diff = emb[at(e, p)] - inst.mean[e];
            d2 += diff * diff;
          }
          const double d = std::sqrt(d2);
          const double h = d - delta_pull;
          if (h <= 0) continue;
          total += w * h * h;
          if (!grad) continue;
          for (int e = 0; e < E; ++e) {
            const double de = 2 * w * h * (emb[at(e, p)] - inst.mean[e]) / d;
            (*grad)[at(e, p)] += static_cast<T>(go * de);
            gmean[k][e] -= de;
          }
        }
      }
      if (K > 1) {
        const double w = img_norm / (K * (K - 1.0));
        for (int a = 0; a < K; ++a) {
          for (int c = 0; c < K; ++c) {
            if (a == c) continue;
            double d2 = 0;
            for (int e = 0; e < E; ++e) {
              const double diff = insts[a].mean[e] - insts[c].mean[e];
              d2 += diff * diff;
            }
            const double d = std::sqrt(d2);
            const double h = 2 * delta_push - d;
            if (h <= 0) continue;
            total += w * h * h;
            if (!grad || d == 0) continue;
            for (int e = 0; e < E; ++e) {
              const double de = -2 * w * h * (insts[a].mean[e] - insts[c].mean[e]) / d;
              gmean[a][e] += de;
              gmean[c][e] -= de;
            }
          }
        }
      }
      if (!grad) continue;
      for (int k = 0; k < K; ++k) {
        const double inv = 1.0 / static_cast<double>(insts[k].pixels.size());
        for (std::size_t p : insts[k].pixels) {
          for (int e = 0; e < E; ++e) (*grad)[at(e, p)] += static_cast<T>(go * gmean[k][e] * inv);
        }
      }
    }
    return total;
  };

  const double value = evaluate(ev, nullptr, T(0));
  const int ie = embedding.id();
  return embedding.graph().record(Tensor<T>({1}, {static_cast<T>(value)}), {embedding},
                                  [ie, evaluate](Graph<T>& g, int self) {
    const T go = g.grad(self)[0];
    evaluate(g.value(ie), &g.grad(ie), go);
  });
}

#define MIXNET_INSTANTIATE(T)                                                                 \
  template Var<T> bce_with_logits(Var<T>, const Tensor<T>&, const Tensor<T>&);                \
  template Var<T> masked_mse(Var<T>, const Tensor<T>&, const Tensor<T>&);                     \
  template Var<T> smooth_l1(Var<T>, const Tensor<T>&, T);                                     \
  template Var<T> discriminative_loss(Var<T>, const std::vector<int>&, T, T);

MIXNET_INSTANTIATE(float)
MIXNET_INSTANTIATE(double)
#undef MIXNET_INSTANTIATE

}  // namespace mixnet::ops
