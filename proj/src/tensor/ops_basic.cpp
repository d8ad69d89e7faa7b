#include <cmath>
#include <numeric>

#include "mixnet/tensor/ops.hpp"
#include "op_util.hpp"

namespace mixnet::ops {

using detail::require_same_shape;
using detail::resolve_axis;

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  require_same_shape(a, b, "add");
  Tensor<T> out(a.shape());
  const auto& av = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = av[i] + bv[i];
  const int ia = a.id(), ib = b.id();
  return a.graph().record(std::move(out), {a, b}, [ia, ib](Graph<T>& g, int self) {
    const auto& go = g.grad(self);
    for (int id : {ia, ib}) {
      if (!g.requires_grad(id)) continue;
      auto& gi = g.grad(id);
      for (std::size_t i = 0; i < gi.numel(); ++i) gi[i] += go[i];
    }
  });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  require_same_shape(a, b, "sub");
  Tensor<T> out(a.shape());
  const auto& av = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = av[i] - bv[i];
  const int ia = a.id(), ib = b.id();
  return a.graph().record(std::move(out), {a, b}, [ia, ib](Graph<T>& g, int self) {
    const auto& go = g.grad(self);
    if (g.requires_grad(ia)) {
      auto& gi = g.grad(ia);
      for (std::size_t i = 0; i < gi.numel(); ++i) gi[i] += go[i];
    }
    if (g.requires_grad(ib)) {
      auto& gi = g.grad(ib);
      for (std::size_t i = 0; i < gi.numel(); ++i) gi[i] -= go[i];
    }
  });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  require_same_shape(a, b, "mul");
  Tensor<T> out(a.shape());
  const auto& av = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = av[i] * bv[i];
  const int ia = a.id(), ib = b.id();
  return a.graph().record(std::move(out), {a, b}, [ia, ib](Graph<T>& g, int self) {
    const auto& go = g.grad(self);
    const auto& av = g.value(ia);
    const auto& bv = g.value(ib);
    if (g.requires_grad(ia)) {
      auto& gi = g.grad(ia);
      for (std::size_t i = 0; i < gi.numel(); ++i) gi[i] += go[i] * bv[i];
    }
    if (g.requires_grad(ib)) {
      auto& gi = g.grad(ib);
      for (std::size_t i = 0; i < gi.numel(); ++i) gi[i] += go[i] * av[i];
    }
  });
}

template <typename T>
Var<T> scale(Var<T> a, T factor) {
  Tensor<T> out(a.shape());
  const auto& av = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = av[i] * factor;
  const int ia = a.id();
  return a.graph().record(std::move(out), {a}, [ia, factor](Graph<T>& g, int self) {
    const auto& go = g.grad(self);
    auto& gi = g.grad(ia);
    for (std::size_t i = 0; i < gi.numel(); ++i) gi[i] += go[i] * factor;
  });
}

template <typename T>
Var<T> add_scalar(Var<T> a, T offset) {
  Tensor<T> out(a.shape());
  const auto& av = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = av[i] + offset;
  const int ia = a.id();
  return a.graph().record(std::move(out), {a}, [ia](Graph<T>& g, int self) {
    const auto& go = g.grad(self);
    auto& gi = g.grad(ia);
    for (std::size_t i = 0; i < gi.numel(); ++i) gi[i] += go[i];
  });
}

template <typename T>
Var<T> relu(Var<T> x) {
  Tensor<T> out(x.shape());
  const auto& xv = x.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = xv[i] > T(0) ? xv[i] : T(0);
  const int ix = x.id();
  return x.graph().record(std::move(out), {x}, [ix](Graph<T>& g, int self) {
    const auto& go = g.grad(self);
    const auto& xv = g.value(ix);
    auto& gi = g.grad(ix);
    for (std::size_t i = 0; i < gi.numel(); ++i) {
      if (xv[i] > T(0)) gi[i] += go[i];
    }
  });
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

template <typename T>
Var<T> gelu(Var<T> x) {
  Tensor<T> out(x.shape());
  const auto& xv = x.value();
  const T c = static_cast<T>(kGeluC), a = static_cast<T>(kGeluA);
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const T v = xv[i];
    out[i] = T(0.5) * v * (T(1) + std::tanh(c * (v + a * v * v * v)));
  }
  const int ix = x.id();
  return x.graph().record(std::move(out), {x}, [ix, c, a](Graph<T>& g, int self) {
    const auto& go = g.grad(self);
    const auto& xv = g.value(ix);
    auto& gi = g.grad(ix);
    for (std::size_t i = 0; i < gi.numel(); ++i) {
      const T v = xv[i];
      const T t = std::tanh(c * (v + a * v * v * v));
      const T dt = (T(1) - t * t) * c * (T(1) + T(3) * a * v * v);
      gi[i] += go[i] * (T(0.5) * (T(1) + t) + T(0.5) * v * dt);
    }
  });
}

template <typename T>
Var<T> sigmoid(Var<T> x) {
  Tensor<T> out(x.shape());
  const auto& xv = x.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = T(1) / (T(1) + std::exp(-xv[i]));
  const int ix = x.id();
  return x.graph().record(std::move(out), {x}, [ix](Graph<T>& g, int self) {
    const auto& go = g.grad(self);
    const auto& y = g.value(self);
    auto& gi = g.grad(ix);
    for (std::size_t i = 0; i < gi.numel(); ++i) gi[i] += go[i] * y[i] * (T(1) - y[i]);
  });
}

template <typename T>
Var<T> radial_squash(Var<T> x) {
  detail::require_rank(x, 4, "radial_squash", "input");
  const auto& s = x.shape();
  const int B = s[0], C = s[1];
  const std::size_t HW = static_cast<std::size_t>(s[2]) * s[3];
  Tensor<T> out(s);
  const auto& xv = x.value();
  for (int b = 0; b < B; ++b) {
    for (std::size_t p = 0; p < HW; ++p) {
      T n2 = 0;
      for (int c = 0; c < C; ++c) {
        const T v = xv[(static_cast<std::size_t>(b) * C + c) * HW + p];
        n2 += v * v;
      }
      const T r = T(1) / std::sqrt(T(1) + n2);
      for (int c = 0; c < C; ++c) {
        const std::size_t i = (static_cast<std::size_t>(b) * C + c) * HW + p;
        out[i] = xv[i] * r;
      }
    }
  }
  const int ix = x.id();
  return x.graph().record(std::move(out), {x}, [ix, B, C, HW](Graph<T>& g, int self) {
    const auto& go = g.grad(self);
    const auto& xv = g.value(ix);
    auto& gi = g.grad(ix);
    for (int b = 0; b < B; ++b) {
      for (std::size_t p = 0; p < HW; ++p) {
        T n2 = 0, dot = 0;
        for (int c = 0; c < C; ++c) {
          const std::size_t i = (static_cast<std::size_t>(b) * C + c) * HW + p;
          n2 += xv[i] * xv[i];
          dot += xv[i] * go[i];
        }
        const T r = T(1) / std::sqrt(T(1) + n2);
        const T r3 = r * r * r;
        for (int c = 0; c < C; ++c) {
          const std::size_t i = (static_cast<std::size_t>(b) * C + c) * HW + p;
          gi[i] += go[i] * r - xv[i] * dot * r3;
        }
      }
    }
  });
}

template <typename T>
Var<T> sum(Var<T> x) {
  const auto& xv = x.value();
  T acc = 0;
  for (std::size_t i = 0; i < xv.numel(); ++i) acc += xv[i];
  const int ix = x.id();
  return x.graph().record(Tensor<T>({1}, {acc}), {x}, [ix](Graph<T>& g, int self) {
    const T go = g.grad(self)[0];
    auto& gi = g.grad(ix);
    for (std::size_t i = 0; i < gi.numel(); ++i) gi[i] += go;
  });
}

template <typename T>
Var<T> mean(Var<T> x) {
  const std::size_t n = x.value().numel();
  if (n == 0) throw ShapeError("mean: empty tensor");
  return scale(sum(x), T(1) / static_cast<T>(n));
}

template <typename T>
Var<T> reshape(Var<T> x, Shape shape) {
  if (shape_numel(shape) != x.value().numel()) {
    throw ShapeError("reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
  }
  const int ix = x.id();
  return x.graph().record(x.value().reshaped(std::move(shape)), {x}, [ix](Graph<T>& g, int self) {
    const auto& go = g.grad(self);
    auto& gi = g.grad(ix);
    for (std::size_t i = 0; i < gi.numel(); ++i) gi[i] += go[i];
  });
}

namespace {

// Maps each output linear index to its source index for a permutation.
std::vector<std::size_t> permutation_index(const Shape& in, const std::vector<int>& perm) {
  const int r = static_cast<int>(in.size());
  std::vector<std::size_t> in_stride(static_cast<std::size_t>(r), 1);
  for (int i = r - 2; i >= 0; --i) in_stride[i] = in_stride[i + 1] * static_cast<std::size_t>(in[i + 1]);
  Shape out(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) out[i] = in[perm[i]];
  const std::size_t n = shape_numel(in);
  std::vector<std::size_t> src(n);
  std::vector<int> idx(static_cast<std::size_t>(r), 0);
  for (std::size_t o = 0; o < n; ++o) {
    std::size_t s = 0;
    for (int i = 0; i < r; ++i) s += static_cast<std::size_t>(idx[i]) * in_stride[perm[i]];
    src[o] = s;
    for (int i = r - 1; i >= 0; --i) {
      if (++idx[i] < out[i]) break;
      idx[i] = 0;
    }
  }
  return src;
}

}  // namespace

template <typename T>
Var<T> permute(Var<T> x, const std::vector<int>& perm) {
  const auto& in = x.shape();
  const int r = static_cast<int>(in.size());
  if (static_cast<int>(perm.size()) != r) throw ShapeError("permute: permutation rank mismatch");
  std::vector<int> seen(static_cast<std::size_t>(r), 0);
  for (int p : perm) {
    if (p < 0 || p >= r || seen[p]++) throw ShapeError("permute: invalid permutation");
  }
  Shape out_shape(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) out_shape[i] = in[perm[i]];
  auto src = permutation_index(in, perm);
  Tensor<T> out(out_shape);
  const auto& xv = x.value();
  for (std::size_t o = 0; o < src.size(); ++o) out[o] = xv[src[o]];
  const int ix = x.id();
  return x.graph().record(std::move(out), {x}, [ix, src = std::move(src)](Graph<T>& g, int self) {
    const auto& go = g.grad(self);
    auto& gi = g.grad(ix);
    for (std::size_t o = 0; o < src.size(); ++o) gi[src[o]] += go[o];
  });
}

template <typename T>
Var<T> concat(const std::vector<Var<T>>& xs, int axis) {
  if (xs.empty()) throw ShapeError("concat: no inputs");
  const Shape& ref = xs[0].shape();
  const int r = static_cast<int>(ref.size());
  const int a = resolve_axis(axis, r, "concat");
  Shape out_shape = ref;
  out_shape[a] = 0;
  for (const auto& x : xs) {
    const auto& s = x.shape();
    if (static_cast<int>(s.size()) != r) throw ShapeError("concat: rank mismatch " + to_string(s));
    for (int i = 0; i < r; ++i) {
      if (i != a && s[i] != ref[i]) {
        throw ShapeError("concat: extent mismatch on axis " + std::to_string(i) + ": " + to_string(s) + " vs " +
                         to_string(ref));
      }
    }
    out_shape[a] += s[a];
  }
  std::size_t outer = 1, inner = 1;
  for (int i = 0; i < a; ++i) outer *= static_cast<std::size_t>(ref[i]);
  for (int i = a + 1; i < r; ++i) inner *= static_cast<std::size_t>(ref[i]);
  const std::size_t out_block = static_cast<std::size_t>(out_shape[a]) * inner;
  Tensor<T> out(out_shape);
  std::vector<int> ids;
  std::vector<std::size_t> offsets, blocks;
  std::size_t off = 0;
  for (const auto& x : xs) {
    const std::size_t block = static_cast<std::size_t>(x.shape()[a]) * inner;
    const auto& xv = x.value();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(xv.data() + o * block, block, out.data() + o * out_block + off);
    }
    ids.push_back(x.id());
    offsets.push_back(off);
    blocks.push_back(block);
    off += block;
  }
  return xs[0].graph().record(std::move(out), xs, [ids, offsets, blocks, outer, out_block](Graph<T>& g, int self) {
    const auto& go = g.grad(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!g.requires_grad(ids[k])) continue;
      auto& gi = g.grad(ids[k]);
      for (std::size_t o = 0; o < outer; ++o) {
        const T* src = go.data() + o * out_block + offsets[k];
        T* dst = gi.data() + o * blocks[k];
        for (std::size_t i = 0; i < blocks[k]; ++i) dst[i] += src[i];
      }
    }
  });
}

template <typename T>
Var<T> slice(Var<T> x, int axis, int start, int length) {
  const auto& s = x.shape();
  const int r = static_cast<int>(s.size());
  const int a = resolve_axis(axis, r, "slice");
  if (start < 0 || length < 0 || start + length > s[a]) {
    throw ShapeError("slice: range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                     ") outside axis of extent " + std::to_string(s[a]));
  }
  std::size_t outer = 1, inner = 1;
  for (int i = 0; i < a; ++i) outer *= static_cast<std::size_t>(s[i]);
  for (int i = a + 1; i < r; ++i) inner *= static_cast<std::size_t>(s[i]);
  Shape out_shape = s;
  out_shape[a] = length;
  const std::size_t in_block = static_cast<std::size_t>(s[a]) * inner;
  const std::size_t out_block = static_cast<std::size_t>(length) * inner;
  const std::size_t off = static_cast<std::size_t>(start) * inner;
  Tensor<T> out(out_shape);
  const auto& xv = x.value();
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(xv.data() + o * in_block + off, out_block, out.data() + o * out_block);
  }
  const int ix = x.id();
  return x.graph().record(std::move(out), {x}, [ix, outer, in_block, out_block, off](Graph<T>& g, int self) {
    const auto& go = g.grad(self);
    auto& gi = g.grad(ix);
    for (std::size_t o = 0; o < outer; ++o) {
      const T* src = go.data() + o * out_block;
      T* dst = gi.data() + o * in_block + off;
      for (std::size_t i = 0; i < out_block; ++i) dst[i] += src[i];
    }
  });
}

template <typename T>
std::vector<Var<T>> split(Var<T> x, int axis, int parts) {
  const int a = resolve_axis(axis, x.value().rank(), "split");
  const int extent = x.shape()[a];
  if (parts <= 0 || extent % parts != 0) {
    throw ShapeError("split: extent " + std::to_string(extent) + " of axis " + std::to_string(a) +
                     " must be divisible by parts=" + std::to_string(parts));
  }
  const int len = extent / parts;
  std::vector<Var<T>> out;
  out.reserve(static_cast<std::size_t>(parts));
  for (int p = 0; p < parts; ++p) out.push_back(slice(x, a, p * len, len));
  return out;
}

template <typename T>
std::vector<Var<T>> split_channels(Var<T> x, int parts) {
  detail::require_rank(x, 4, "split_channels", "input");
  if (parts <= 0 || x.shape()[1] % parts != 0) {
    throw ShapeError("split_channels: channel count " + std::to_string(x.shape()[1]) +
                     " must be divisible by parts=" + std::to_string(parts));
  }
  return split(x, 1, parts);
}

template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& xs) {
  for (const auto& x : xs) detail::require_rank(x, 4, "concat_channels", "input");
  return concat(xs, 1);
}

#define MIXNET_INSTANTIATE(T)                                                         \
  template Var<T> add(Var<T>, Var<T>);                                                \
  template Var<T> sub(Var<T>, Var<T>);                                                \
  template Var<T> mul(Var<T>, Var<T>);                                                \
  template Var<T> scale(Var<T>, T);                                                   \
  template Var<T> add_scalar(Var<T>, T);                                              \
  template Var<T> relu(Var<T>);                                                       \
  template Var<T> gelu(Var<T>);                                                       \
  template Var<T> sigmoid(Var<T>);                                                    \
  template Var<T> radial_squash(Var<T>);                                              \
  template Var<T> sum(Var<T>);                                                        \
  template Var<T> mean(Var<T>);                                                       \
  template Var<T> reshape(Var<T>, Shape);                                             \
  template Var<T> permute(Var<T>, const std::vector<int>&);                           \
  template Var<T> concat(const std::vector<Var<T>>&, int);                            \
  template Var<T> slice(Var<T>, int, int, int);                                       \
  template std::vector<Var<T>> split(Var<T>, int, int);                               \
  template std::vector<Var<T>> split_channels(Var<T>, int);                           \
  template Var<T> concat_channels(const std::vector<Var<T>>&);

MIXNET_INSTANTIATE(float)
MIXNET_INSTANTIATE(double)
#undef MIXNET_INSTANTIATE

}  // namespace mixnet::ops
