#include <algorithm>
#include <cmath>

#include "mixnet/tensor/ops.hpp"
#include "op_util.hpp"

namespace mixnet::ops {

namespace {

// Source taps along one axis for half-pixel bilinear interpolation.
struct Tap {
  int i0, i1;
  double w1;  // weight of i1; i0 gets 1 - w1
};

std::vector<Tap> bilinear_taps(int in, int out) {
  std::vector<Tap> taps(static_cast<std::size_t>(out));
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double s = (o + 0.5) * scale - 0.5;
    if (s < 0) s = 0;
    int i0 = static_cast<int>(std::floor(s));
    if (i0 >= in - 1) {
      taps[o] = {in - 1, in - 1, 0.0};
      continue;
    }
    taps[o] = {i0, i0 + 1, s - i0};
  }
  return taps;
}

template <typename T>
Var<T> resize_with_taps(Var<T> x, int Ho, int Wo, std::vector<Tap> ty, std::vector<Tap> tx) {
  const auto& s = x.shape();
  const int BC = s[0] * s[1], H = s[2], W = s[3];
  Tensor<T> out({s[0], s[1], Ho, Wo});
  const auto& xv = x.value();
  for (int p = 0; p < BC; ++p) {
    const T* src = xv.data() + static_cast<std::size_t>(p) * H * W;
    T* dst = out.data() + static_cast<std::size_t>(p) * Ho * Wo;
    for (int oy = 0; oy < Ho; ++oy) {
      const Tap& a = ty[oy];
      const T wy1 = static_cast<T>(a.w1), wy0 = T(1) - wy1;
      const T* r0 = src + static_cast<std::size_t>(a.i0) * W;
      const T* r1 = src + static_cast<std::size_t>(a.i1) * W;
      for (int ox = 0; ox < Wo; ++ox) {
        const Tap& b = tx[ox];
        const T wx1 = static_cast<T>(b.w1), wx0 = T(1) - wx1;
        dst[static_cast<std::size_t>(oy) * Wo + ox] =
            wy0 * (wx0 * r0[b.i0] + wx1 * r0[b.i1]) + wy1 * (wx0 * r1[b.i0] + wx1 * r1[b.i1]);
      }
    }
  }
  const int ix = x.id();
  return x.graph().record(std::move(out), {x}, [=, ty = std::move(ty), tx = std::move(tx)](Graph<T>& g, int self) {
    const auto& go = g.grad(self);
    auto& gx = g.grad(ix);
    for (int p = 0; p < BC; ++p) {
      const T* gsrc = go.data() + static_cast<std::size_t>(p) * Ho * Wo;
      T* gdst = gx.data() + static_cast<std::size_t>(p) * H * W;
      for (int oy = 0; oy < Ho; ++oy) {
        const Tap& a = ty[oy];
        const T wy1 = static_cast<T>(a.w1), wy0 = T(1) - wy1;
        T* r0 = gdst + static_cast<std::size_t>(a.i0) * W;
        T* r1 = gdst + static_cast<std::size_t>(a.i1) * W;
        for (int ox = 0; ox < Wo; ++ox) {
          const Tap& b = tx[ox];
          const T wx1 = static_cast<T>(b.w1), wx0 = T(1) - wx1;
          const T v = gsrc[static_cast<std::size_t>(oy) * Wo + ox];
          r0[b.i0] += wy0 * wx0 * v;
          r0[b.i1] += wy0 * wx1 * v;
          r1[b.i0] += wy1 * wx0 * v;
          r1[b.i1] += wy1 * wx1 * v;
        }
      }
    }
  });
}

// Nearest-neighbour gather: out(oy, ox) = in(sy[oy], sx[ox]).
template <typename T>
Var<T> gather_nearest(Var<T> x, std::vector<int> sy, std::vector<int> sx) {
  const auto& s = x.shape();
  const int BC = s[0] * s[1], H = s[2], W = s[3];
  const int Ho = static_cast<int>(sy.size()), Wo = static_cast<int>(sx.size());
  Tensor<T> out({s[0], s[1], Ho, Wo});
  const auto& xv = x.value();
  for (int p = 0; p < BC; ++p) {
    const T* src = xv.data() + static_cast<std::size_t>(p) * H * W;
    T* dst = out.data() + static_cast<std::size_t>(p) * Ho * Wo;
    for (int oy = 0; oy < Ho; ++oy) {
      for (int ox = 0; ox < Wo; ++ox) dst[oy * Wo + ox] = src[static_cast<std::size_t>(sy[oy]) * W + sx[ox]];
    }
  }
  const int ix = x.id();
  return x.graph().record(std::move(out), {x}, [=, sy = std::move(sy), sx = std::move(sx)](Graph<T>& g, int self) {
    const auto& go = g.grad(self);
    auto& gx = g.grad(ix);
    for (int p = 0; p < BC; ++p) {
      const T* gsrc = go.data() + static_cast<std::size_t>(p) * Ho * Wo;
      T* gdst = gx.data() + static_cast<std::size_t>(p) * H * W;
      for (int oy = 0; oy < Ho; ++oy) {
        for (int ox = 0; ox < Wo; ++ox) gdst[static_cast<std::size_t>(sy[oy]) * W + sx[ox]] += gsrc[oy * Wo + ox];
      }
    }
  });
}

int factor_ratio(double factor) {
  for (int r : {1, 2, 4, 8}) {
    if (std::abs(factor - r) < 1e-12) return r;
    if (std::abs(factor - 1.0 / r) < 1e-12) return -r;
  }
  throw ShapeError("resample: factor must be one of 1/8, 1/4, 1/2, 1, 2, 4, 8; got " + std::to_string(factor));
}

}  // namespace

template <typename T>
Var<T> resample(Var<T> x, double factor, ResampleMode mode) {
  detail::require_rank(x, 4, "resample", "input");
  const int r = factor_ratio(factor);
  if (r == 1) return x;
  const int H = x.shape()[2], W = x.shape()[3];
  int Ho, Wo;
  if (r > 0) {
    Ho = H * r;
    Wo = W * r;
  } else {
    const int d = -r;
    if (H % d != 0 || W % d != 0) {
      throw ShapeError("resample: downscale by " + std::to_string(d) + " needs divisible extents, got " +
                       std::to_string(H) + "x" + std::to_string(W));
    }
    Ho = H / d;
    Wo = W / d;
  }
  if (mode == ResampleMode::kBilinear) return resize_bilinear(x, Ho, Wo);
  std::vector<int> sy(static_cast<std::size_t>(Ho)), sx(static_cast<std::size_t>(Wo));
  for (int i = 0; i < Ho; ++i) sy[i] = r > 0 ? i / r : i * -r;
  for (int i = 0; i < Wo; ++i) sx[i] = r > 0 ? i / r : i * -r;
  return gather_nearest(x, std::move(sy), std::move(sx));
}

template <typename T>
Var<T> resize_bilinear(Var<T> x, int out_h, int out_w) {
  detail::require_rank(x, 4, "resize_bilinear", "input");
  if (out_h <= 0 || out_w <= 0) throw ShapeError("resize_bilinear: non-positive output extents");
  return resize_with_taps(x, out_h, out_w, bilinear_taps(x.shape()[2], out_h), bilinear_taps(x.shape()[3], out_w));
}

template <typename T>
Var<T> avg_pool(Var<T> x, int kernel) {
  detail::require_rank(x, 4, "avg_pool", "input");
  const auto& s = x.shape();
  if (kernel <= 0 || s[2] % kernel || s[3] % kernel) {
    throw ShapeError("avg_pool: extents " + to_string(s) + " not divisible by kernel " + std::to_string(kernel));
  }
  const int BC = s[0] * s[1], H = s[2], W = s[3], Ho = H / kernel, Wo = W / kernel;
  const T inv = T(1) / static_cast<T>(kernel * kernel);
  Tensor<T> out({s[0], s[1], Ho, Wo});
  const auto& xv = x.value();
  for (int p = 0; p < BC; ++p) {
    for (int y = 0; y < H; ++y) {
      for (int xx = 0; xx < W; ++xx) {
        out[(static_cast<std::size_t>(p) * Ho + y / kernel) * Wo + xx / kernel] +=
            xv[(static_cast<std::size_t>(p) * H + y) * W + xx] * inv;
      }
    }
  }
  const int ix = x.id();
  return x.graph().record(std::move(out), {x}, [=](Graph<T>& g, int self) {
    const auto& go = g.grad(self);
    auto& gx = g.grad(ix);
    for (int p = 0; p < BC; ++p) {
      for (int y = 0; y < H; ++y) {
        for (int xx = 0; xx < W; ++xx) {
          gx[(static_cast<std::size_t>(p) * H + y) * W + xx] +=
              go[(static_cast<std::size_t>(p) * Ho + y / kernel) * Wo + xx / kernel] * inv;
        }
      }
    }
  });
}

template <typename T>
Var<T> sample_points(Var<T> map, const std::vector<PointSample>& points, double stride) {
  detail::require_rank(map, 4, "sample_points", "map");
  const auto& s = map.shape();
  const int B = s[0], C = s[1], H = s[2], W = s[3];
  if (stride <= 0) throw ShapeError("sample_points: stride must be positive");
  struct Corner {
    std::size_t base;
    int x0, x1, y0, y1;
    T wx, wy;
  };
  std::vector<Corner> taps;
  taps.reserve(points.size());
  for (const auto& p : points) {
    if (p.batch < 0 || p.batch >= B) throw ShapeError("sample_points: batch index out of range");
    // Non-finite coordinates read the corner pixel; the NaN itself surfaces in the loss.
    double u = std::isfinite(p.x) ? std::clamp(p.x / stride - 0.5, 0.0, static_cast<double>(W - 1)) : 0.0;
    double v = std::isfinite(p.y) ? std::clamp(p.y / stride - 0.5, 0.0, static_cast<double>(H - 1)) : 0.0;
    const int x0 = std::min(static_cast<int>(std::floor(u)), W - 1);
    const int y0 = std::min(static_cast<int>(std::floor(v)), H - 1);
    taps.push_back({static_cast<std::size_t>(p.batch) * C * H * W, x0, std::min(x0 + 1, W - 1), y0,
                    std::min(y0 + 1, H - 1), static_cast<T>(u - x0), static_cast<T>(v - y0)});
  }
  const int P = static_cast<int>(points.size());
  Tensor<T> out({P, C});
  const auto& mv = map.value();
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  for (int i = 0; i < P; ++i) {
    const auto& t = taps[i];
    const T w00 = (T(1) - t.wx) * (T(1) - t.wy), w01 = t.wx * (T(1) - t.wy);
    const T w10 = (T(1) - t.wx) * t.wy, w11 = t.wx * t.wy;
    for (int c = 0; c < C; ++c) {
      const T* m = mv.data() + t.base + c * plane;
      out[static_cast<std::size_t>(i) * C + c] = w00 * m[t.y0 * W + t.x0] + w01 * m[t.y0 * W + t.x1] +
                                                 w10 * m[t.y1 * W + t.x0] + w11 * m[t.y1 * W + t.x1];
    }
  }
  const int im = map.id();
  return map.graph().record(std::move(out), {map}, [=, taps = std::move(taps)](Graph<T>& g, int self) {
    const auto& go = g.grad(self);
    auto& gm = g.grad(im);
    for (int i = 0; i < P; ++i) {
      const auto& t = taps[i];
      const T w00 = (T(1) - t.wx) * (T(1) - t.wy), w01 = t.wx * (T(1) - t.wy);
      const T w10 = (T(1) - t.wx) * t.wy, w11 = t.wx * t.wy;
      for (int c = 0; c < C; ++c) {
        T* m = gm.data() + t.base + c * plane;
        const T v = go[static_cast<std::size_t>(i) * C + c];
        m[t.y0 * W + t.x0] += w00 * v;
        m[t.y0 * W + t.x1] += w01 * v;
        m[t.y1 * W + t.x0] += w10 * v;
        m[t.y1 * W + t.x1] += w11 * v;
      }
    }
  });
}

namespace {

// One output sample of an arc-length resampling: segment index and fraction.
struct ArcTap {
  int seg;  // -1 when the polyline has zero length (output = first vertex)
  double t;
  double alpha;  // target arc fraction in [0, 1]
};

}  // namespace

template <typename T>
Var<T> arclength_resample(Var<T> polylines, int count) {
  detail::require_rank(polylines, 3, "arclength_resample", "input");
  const auto& s = polylines.shape();
  const int B = s[0], N = s[1];
  if (s[2] != 2) throw ShapeError("arclength_resample: last axis must be 2 (x, y), got " + to_string(s));
  if (N < 2) throw ShapeError("arclength_resample: polyline needs at least 2 vertices");
  if (count < 2) throw ShapeError("arclength_resample: count must be at least 2");
  const auto& pv = polylines.value();
  std::vector<ArcTap> taps(static_cast<std::size_t>(B) * count);
  Tensor<T> out({B, count, 2});
  for (int b = 0; b < B; ++b) {
    const T* p = pv.data() + static_cast<std::size_t>(b) * N * 2;
    std::vector<double> len(static_cast<std::size_t>(N - 1)), cum(static_cast<std::size_t>(N), 0.0);
    for (int i = 0; i + 1 < N; ++i) {
      len[i] = std::hypot(static_cast<double>(p[2 * i + 2] - p[2 * i]), static_cast<double>(p[2 * i + 3] - p[2 * i + 1]));
      cum[i + 1] = cum[i] + len[i];
    }
    const double total = cum[N - 1];
    int last_seg = -1, first_seg = -1;
    for (int i = 0; i + 1 < N; ++i) {
      if (len[i] > 0) {
        if (first_seg < 0) first_seg = i;
        last_seg = i;
      }
    }
    for (int k = 0; k < count; ++k) {
      const double alpha = static_cast<double>(k) / (count - 1);
      ArcTap tap{-1, 0.0, alpha};
      if (total > 0) {
        if (k == 0) {
          tap = {first_seg, 0.0, alpha};
        } else if (k == count - 1) {
          tap = {last_seg, 1.0, alpha};
        } else {
          const double target = alpha * total;
          int j = first_seg;
          while (j < last_seg && (len[j] == 0 || cum[j + 1] < target)) ++j;
          tap = {j, std::clamp((target - cum[j]) / len[j], 0.0, 1.0), alpha};
        }
      }
      taps[static_cast<std::size_t>(b) * count + k] = tap;
      T* o = out.data() + (static_cast<std::size_t>(b) * count + k) * 2;
      if (tap.seg < 0) {
        o[0] = p[0];
        o[1] = p[1];
      } else if (k == 0) {
        o[0] = p[0];
        o[1] = p[1];
      } else if (k == count - 1) {
        o[0] = p[2 * (N - 1)];
        o[1] = p[2 * (N - 1) + 1];
      } else {
        const int j = tap.seg;
        const T tt = static_cast<T>(tap.t);
        o[0] = p[2 * j] + tt * (p[2 * j + 2] - p[2 * j]);
        o[1] = p[2 * j + 1] + tt * (p[2 * j + 3] - p[2 * j + 1]);
      }
    }
  }
  const int ip = polylines.id();
  return polylines.graph().record(std::move(out), {polylines}, [=, taps = std::move(taps)](Graph<T>& g, int self) {
    const auto& go = g.grad(self);
    const auto& pv = g.value(ip);
    auto& gp = g.grad(ip);
    for (int b = 0; b < B; ++b) {
      const T* p = pv.data() + static_cast<std::size_t>(b) * N * 2;
      T* gpb = gp.data() + static_cast<std::size_t>(b) * N * 2;
      std::vector<double> len(static_cast<std::size_t>(N - 1)), ux(len.size()), uy(len.size()), cum(static_cast<std::size_t>(N), 0.0);
      for (int i = 0; i + 1 < N; ++i) {
        const double dx = p[2 * i + 2] - p[2 * i], dy = p[2 * i + 3] - p[2 * i + 1];
        len[i] = std::hypot(dx, dy);
        ux[i] = len[i] > 0 ? dx / len[i] : 0.0;
        uy[i] = len[i] > 0 ? dy / len[i] : 0.0;
        cum[i + 1] = cum[i] + len[i];
      }
      const double total = cum[N - 1];
      std::vector<double> glen(len.size(), 0.0);
      for (int k = 0; k < count; ++k) {
        const auto& tap = taps[static_cast<std::size_t>(b) * count + k];
        const T gx = go[(static_cast<std::size_t>(b) * count + k) * 2];
        const T gy = go[(static_cast<std::size_t>(b) * count + k) * 2 + 1];
        if (tap.seg < 0 || k == 0) {
          gpb[0] += gx;
          gpb[1] += gy;
          continue;
        }
        if (k == count - 1) {
          gpb[2 * (N - 1)] += gx;
          gpb[2 * (N - 1) + 1] += gy;
          continue;
        }
        const int j = tap.seg;
        const double t = tap.t;
        gpb[2 * j] += static_cast<T>((1 - t) * gx);
        gpb[2 * j + 1] += static_cast<T>((1 - t) * gy);
        gpb[2 * j + 2] += static_cast<T>(t * gx);
        gpb[2 * j + 3] += static_cast<T>(t * gy);
        if (t <= 0.0 || t >= 1.0) continue;  // clamped: locally constant fraction
        // t = (alpha * total - cum_j) / len_j
        const double gt = gx * (p[2 * j + 2] - p[2 * j]) + gy * (p[2 * j + 3] - p[2 * j + 1]);
        const double numer = tap.alpha * total - cum[j];
        for (int i = 0; i + 1 < N; ++i) {
          double dt = (tap.alpha - (i < j ? 1.0 : 0.0)) / len[j];
          if (i == j) dt -= numer / (len[j] * len[j]);
          glen[i] += gt * dt;
        }
      }
      for (int i = 0; i + 1 < N; ++i) {
        gpb[2 * i] -= static_cast<T>(glen[i] * ux[i]);
        gpb[2 * i + 1] -= static_cast<T>(glen[i] * uy[i]);
        gpb[2 * i + 2] += static_cast<T>(glen[i] * ux[i]);
        gpb[2 * i + 3] += static_cast<T>(glen[i] * uy[i]);
      }
    }
  });
}

#define MIXNET_INSTANTIATE(T)                                                          \
  template Var<T> resample(Var<T>, double, ResampleMode);                              \
  template Var<T> resize_bilinear(Var<T>, int, int);                                   \
  template Var<T> avg_pool(Var<T>, int);                                               \
  template Var<T> sample_points(Var<T>, const std::vector<PointSample>&, double);      \
  template Var<T> arclength_resample(Var<T>, int);

MIXNET_INSTANTIATE(float)
MIXNET_INSTANTIATE(double)
#undef MIXNET_INSTANTIATE

}  // namespace mixnet::ops
