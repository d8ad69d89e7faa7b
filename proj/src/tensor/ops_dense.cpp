#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "mixnet/tensor/ops.hpp"
#include "op_util.hpp"

namespace mixnet::ops {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;

// Upper bound on im2col scratch, in elements; larger batches are processed in chunks.
constexpr std::size_t kColBudget = std::size_t{1} << 23;

struct ConvGeom {
  int B, Cin, H, W, Cout, kh, kw, stride, pad, Ho, Wo;
  std::size_t K() const { return static_cast<std::size_t>(Cin) * kh * kw; }
  std::size_t P() const { return static_cast<std::size_t>(Ho) * Wo; }
  bool pointwise() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
};

// Column layout: row k = (c, i, j), column = local_batch * P + output pixel.
template <typename T>
void im2col(const T* x, const ConvGeom& g, int b0, int nb, T* col) {
  const std::size_t P = g.P(), cols = static_cast<std::size_t>(nb) * P;
  for (int c = 0; c < g.Cin; ++c) {
    for (int i = 0; i < g.kh; ++i) {
      for (int j = 0; j < g.kw; ++j) {
        T* row = col + ((static_cast<std::size_t>(c) * g.kh + i) * g.kw + j) * cols;
        for (int lb = 0; lb < nb; ++lb) {
          const T* plane = x + (static_cast<std::size_t>(b0 + lb) * g.Cin + c) * g.H * g.W;
          T* dst = row + static_cast<std::size_t>(lb) * P;
          for (int oy = 0; oy < g.Ho; ++oy) {
            const int iy = oy * g.stride - g.pad + i;
            T* d = dst + static_cast<std::size_t>(oy) * g.Wo;
            if (iy < 0 || iy >= g.H) {
              std::fill_n(d, g.Wo, T(0));
              continue;
            }
            const T* srow = plane + static_cast<std::size_t>(iy) * g.W;
            for (int ox = 0; ox < g.Wo; ++ox) {
              const int ix = ox * g.stride - g.pad + j;
              d[ox] = (ix >= 0 && ix < g.W) ? srow[ix] : T(0);
            }
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* col, const ConvGeom& g, int b0, int nb, T* dx) {
  const std::size_t P = g.P(), cols = static_cast<std::size_t>(nb) * P;
  for (int c = 0; c < g.Cin; ++c) {
    for (int i = 0; i < g.kh; ++i) {
      for (int j = 0; j < g.kw; ++j) {
        const T* row = col + ((static_cast<std::size_t>(c) * g.kh + i) * g.kw + j) * cols;
        for (int lb = 0; lb < nb; ++lb) {
          T* plane = dx + (static_cast<std::size_t>(b0 + lb) * g.Cin + c) * g.H * g.W;
          const T* src = row + static_cast<std::size_t>(lb) * P;
          for (int oy = 0; oy < g.Ho; ++oy) {
            const int iy = oy * g.stride - g.pad + i;
            if (iy < 0 || iy >= g.H) continue;
            const T* s = src + static_cast<std::size_t>(oy) * g.Wo;
            T* drow = plane + static_cast<std::size_t>(iy) * g.W;
            for (int ox = 0; ox < g.Wo; ++ox) {
              const int ix = ox * g.stride - g.pad + j;
              if (ix >= 0 && ix < g.W) drow[ix] += s[ox];
            }
          }
        }
      }
    }
  }
}

// Gathers [nb, C, P] planes into a [C, nb*P] matrix and back.
template <typename T>
void gather_channels(const T* src, int C, std::size_t P, int b0, int nb, T* dst) {
  for (int c = 0; c < C; ++c) {
    for (int lb = 0; lb < nb; ++lb) {
      std::copy_n(src + (static_cast<std::size_t>(b0 + lb) * C + c) * P, P,
                  dst + (static_cast<std::size_t>(c) * nb + lb) * P);
    }
  }
}

template <typename T>
void scatter_channels(const T* src, int C, std::size_t P, int b0, int nb, T* dst, bool accumulate) {
  for (int c = 0; c < C; ++c) {
    for (int lb = 0; lb < nb; ++lb) {
      const T* s = src + (static_cast<std::size_t>(c) * nb + lb) * P;
      T* d = dst + (static_cast<std::size_t>(b0 + lb) * C + c) * P;
      if (accumulate) {
        for (std::size_t p = 0; p < P; ++p) d[p] += s[p];
      } else {
        std::copy_n(s, P, d);
      }
    }
  }
}

int batch_chunk(const ConvGeom& g) {
  const std::size_t per = std::max(g.K(), static_cast<std::size_t>(g.Cout)) * g.P();
  return static_cast<int>(std::clamp<std::size_t>(kColBudget / std::max<std::size_t>(per, 1), 1, g.B));
}

}  // namespace

template <typename T>
Var<T> conv2d(Var<T> x, Var<T> weight, Var<T> bias, int stride, int padding) {
  detail::require_rank(x, 4, "conv2d", "input");
  detail::require_rank(weight, 4, "conv2d", "weight");
  const auto& xs = x.shape();
  const auto& ws = weight.shape();
  ConvGeom geo{xs[0], xs[1], xs[2], xs[3], ws[0], ws[2], ws[3], stride, padding, 0, 0};
  if (ws[1] != geo.Cin) {
    throw ShapeError("conv2d: weight expects " + std::to_string(ws[1]) + " input channels, input " +
                     to_string(xs) + " has " + std::to_string(geo.Cin));
  }
  if (geo.kh % 2 == 0 || geo.kw % 2 == 0) throw ShapeError("conv2d: kernel extents must be odd, got " + to_string(ws));
  if (stride != 1 && stride != 2) throw ShapeError("conv2d: stride must be 1 or 2, got " + std::to_string(stride));
  if (padding < 0) throw ShapeError("conv2d: negative padding");
  if (stride == 2 && (geo.H % 2 != 0 || geo.W % 2 != 0)) {
    throw ShapeError("conv2d: stride 2 needs even spatial extents, got " + std::to_string(geo.H) + "x" +
                     std::to_string(geo.W));
  }
  const bool has_bias = bias.valid();
  if (has_bias && (bias.value().rank() != 1 || bias.shape()[0] != geo.Cout)) {
    throw ShapeError("conv2d: bias must be [" + std::to_string(geo.Cout) + "], got " + to_string(bias.shape()));
  }
  geo.Ho = (geo.H + 2 * padding - geo.kh) / stride + 1;
  geo.Wo = (geo.W + 2 * padding - geo.kw) / stride + 1;
  if (geo.Ho <= 0 || geo.Wo <= 0) throw ShapeError("conv2d: kernel larger than padded input");

  const std::size_t K = geo.K(), P = geo.P();
  Tensor<T> out({geo.B, geo.Cout, geo.Ho, geo.Wo});
  const int chunk = batch_chunk(geo);
  std::vector<T> col, ybuf;
  CMapMat<T> Wm(weight.value().data(), geo.Cout, static_cast<Eigen::Index>(K));
  for (int b0 = 0; b0 < geo.B; b0 += chunk) {
    const int nb = std::min(chunk, geo.B - b0);
    const std::size_t cols = static_cast<std::size_t>(nb) * P;
    col.resize(K * cols);
    if (geo.pointwise()) {
      gather_channels(x.value().data(), geo.Cin, P, b0, nb, col.data());
    } else {
      im2col(x.value().data(), geo, b0, nb, col.data());
    }
    ybuf.resize(static_cast<std::size_t>(geo.Cout) * cols);
    MapMat<T> Y(ybuf.data(), geo.Cout, static_cast<Eigen::Index>(cols));
    Y.noalias() = Wm * CMapMat<T>(col.data(), static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(cols));
    if (has_bias) {
      const auto& bv = bias.value();
      for (int c = 0; c < geo.Cout; ++c) Y.row(c).array() += bv[c];
    }
    scatter_channels(ybuf.data(), geo.Cout, P, b0, nb, out.data(), false);
  }

  std::vector<Var<T>> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  const int ix = x.id(), iw = weight.id(), ib = has_bias ? bias.id() : -1;
  return x.graph().record(std::move(out), inputs, [geo, ix, iw, ib, chunk](Graph<T>& g, int self) {
    const std::size_t K = geo.K(), P = geo.P();
    const auto& go = g.grad(self);
    const bool need_x = g.requires_grad(ix), need_w = g.requires_grad(iw);
    const bool need_b = ib >= 0 && g.requires_grad(ib);
    std::vector<T> col, dy, dcol;
    for (int b0 = 0; b0 < geo.B; b0 += chunk) {
      const int nb = std::min(chunk, geo.B - b0);
      const std::size_t cols = static_cast<std::size_t>(nb) * P;
      dy.resize(static_cast<std::size_t>(geo.Cout) * cols);
      gather_channels(go.data(), geo.Cout, P, b0, nb, dy.data());
      CMapMat<T> DY(dy.data(), geo.Cout, static_cast<Eigen::Index>(cols));
      if (need_b) {
        auto& gb = g.grad(ib);
        // Plain loop: Eigen's vectorized sum peels by address, which would make results allocation-dependent.
        for (int c = 0; c < geo.Cout; ++c) {
          const T* row = dy.data() + static_cast<std::size_t>(c) * cols;
          T acc = T(0);
          for (std::size_t j = 0; j < cols; ++j) acc += row[j];
          gb[c] += acc;
        }
      }
      if (need_w) {
        col.resize(K * cols);
        if (geo.pointwise()) {
          gather_channels(g.value(ix).data(), geo.Cin, P, b0, nb, col.data());
        } else {
          im2col(g.value(ix).data(), geo, b0, nb, col.data());
        }
        MapMat<T> GW(g.grad(iw).data(), geo.Cout, static_cast<Eigen::Index>(K));
        GW.noalias() += DY * CMapMat<T>(col.data(), static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(cols)).transpose();
      }
      if (need_x) {
        dcol.resize(K * cols);
        MapMat<T> DC(dcol.data(), static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(cols));
        DC.noalias() = CMapMat<T>(g.value(iw).data(), geo.Cout, static_cast<Eigen::Index>(K)).transpose() * DY;
        if (geo.pointwise()) {
          scatter_channels(dcol.data(), geo.Cin, P, b0, nb, g.grad(ix).data(), true);
        } else {
          col2im(dcol.data(), geo, b0, nb, g.grad(ix).data());
        }
      }
    }
  });
}

template <typename T>
Var<T> group_norm(Var<T> x, Var<T> gamma, Var<T> beta, int groups, T eps) {
  detail::require_rank(x, 4, "group_norm", "input");
  const auto& s = x.shape();
  const int B = s[0], C = s[1];
  const std::size_t HW = static_cast<std::size_t>(s[2]) * s[3];
  if (groups <= 0 || C % groups != 0) {
    throw ShapeError("group_norm: channels " + std::to_string(C) + " not divisible by groups " +
                     std::to_string(groups));
  }
  if (gamma.value().numel() != static_cast<std::size_t>(C) || beta.value().numel() != static_cast<std::size_t>(C)) {
    throw ShapeError("group_norm: affine parameters must have " + std::to_string(C) + " entries");
  }
  const int cpg = C / groups;
  const std::size_t gsize = static_cast<std::size_t>(cpg) * HW;
  std::vector<T> mean(static_cast<std::size_t>(B) * groups), rstd(mean.size());
  Tensor<T> out(s);
  const auto& xv = x.value();
  const auto& gv = gamma.value();
  const auto& bv = beta.value();
  for (int b = 0; b < B; ++b) {
    for (int gi = 0; gi < groups; ++gi) {
      const T* p = xv.data() + (static_cast<std::size_t>(b) * C + static_cast<std::size_t>(gi) * cpg) * HW;
      double m = 0;
      for (std::size_t i = 0; i < gsize; ++i) m += p[i];
      m /= static_cast<double>(gsize);
      double v = 0;
      for (std::size_t i = 0; i < gsize; ++i) v += (p[i] - m) * (p[i] - m);
      v /= static_cast<double>(gsize);
      const std::size_t k = static_cast<std::size_t>(b) * groups + gi;
      mean[k] = static_cast<T>(m);
      rstd[k] = static_cast<T>(1.0 / std::sqrt(v + static_cast<double>(eps)));
      for (int cc = 0; cc < cpg; ++cc) {
        const int c = gi * cpg + cc;
        const T* src = p + static_cast<std::size_t>(cc) * HW;
        T* dst = out.data() + (static_cast<std::size_t>(b) * C + c) * HW;
        for (std::size_t i = 0; i < HW; ++i) dst[i] = (src[i] - mean[k]) * rstd[k] * gv[c] + bv[c];
      }
    }
  }
  const int ix = x.id(), ig = gamma.id(), ibt = beta.id();
  return x.graph().record(std::move(out), {x, gamma, beta},
                          [=, mean = std::move(mean), rstd = std::move(rstd)](Graph<T>& g, int self) {
    const auto& go = g.grad(self);
    const auto& xv = g.value(ix);
    const auto& gv = g.value(ig);
    const bool need_x = g.requires_grad(ix), need_g = g.requires_grad(ig), need_b = g.requires_grad(ibt);
    for (int b = 0; b < B; ++b) {
      for (int gi = 0; gi < groups; ++gi) {
        const std::size_t k = static_cast<std::size_t>(b) * groups + gi;
        const T m = mean[k], r = rstd[k];
        double sum_dxh = 0, sum_dxh_xh = 0;
        for (int cc = 0; cc < cpg; ++cc) {
          const int c = gi * cpg + cc;
          const std::size_t base = (static_cast<std::size_t>(b) * C + c) * HW;
          double dgam = 0, dbet = 0;
          for (std::size_t i = 0; i < HW; ++i) {
            const T xh = (xv[base + i] - m) * r;
            const T dyv = go[base + i];
            dgam += dyv * xh;
            dbet += dyv;
            const T dxh = dyv * gv[c];
            sum_dxh += dxh;
            sum_dxh_xh += dxh * xh;
          }
          if (need_g) g.grad(ig)[c] += static_cast<T>(dgam);
          if (need_b) g.grad(ibt)[c] += static_cast<T>(dbet);
        }
        if (!need_x) continue;
        const T mdxh = static_cast<T>(sum_dxh / static_cast<double>(gsize));
        const T mdxhxh = static_cast<T>(sum_dxh_xh / static_cast<double>(gsize));
        auto& gx = g.grad(ix);
        for (int cc = 0; cc < cpg; ++cc) {
          const int c = gi * cpg + cc;
          const std::size_t base = (static_cast<std::size_t>(b) * C + c) * HW;
          for (std::size_t i = 0; i < HW; ++i) {
            const T xh = (xv[base + i] - m) * r;
            const T dxh = go[base + i] * gv[c];
            gx[base + i] += r * (dxh - mdxh - xh * mdxhxh);
          }
        }
      }
    }
  });
}

template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gamma, Var<T> beta, T eps) {
  const auto& s = x.shape();
  if (s.empty()) throw ShapeError("layer_norm: scalar input");
  const int D = s.back();
  if (gamma.value().numel() != static_cast<std::size_t>(D) || beta.value().numel() != static_cast<std::size_t>(D)) {
    throw ShapeError("layer_norm: affine parameters must have " + std::to_string(D) + " entries");
  }
  const std::size_t rows = x.value().numel() / static_cast<std::size_t>(D);
  std::vector<T> rstd(rows);
  Tensor<T> xhat(s), out(s);
  const auto& xv = x.value();
  const auto& gv = gamma.value();
  const auto& bv = beta.value();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* p = xv.data() + r * D;
    double m = 0;
    for (int i = 0; i < D; ++i) m += p[i];
    m /= D;
    double v = 0;
    for (int i = 0; i < D; ++i) v += (p[i] - m) * (p[i] - m);
    v /= D;
    rstd[r] = static_cast<T>(1.0 / std::sqrt(v + static_cast<double>(eps)));
    for (int i = 0; i < D; ++i) {
      const T xh = (p[i] - static_cast<T>(m)) * rstd[r];
      xhat[r * D + i] = xh;
      out[r * D + i] = xh * gv[i] + bv[i];
    }
  }
  const int ix = x.id(), ig = gamma.id(), ibt = beta.id();
  return x.graph().record(std::move(out), {x, gamma, beta},
                          [=, rstd = std::move(rstd), xhat = std::move(xhat)](Graph<T>& g, int self) {
    const auto& go = g.grad(self);
    const auto& gv = g.value(ig);
    const bool need_x = g.requires_grad(ix);
    if (g.requires_grad(ig) || g.requires_grad(ibt)) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (int i = 0; i < D; ++i) {
          if (g.requires_grad(ig)) g.grad(ig)[i] += go[r * D + i] * xhat[r * D + i];
          if (g.requires_grad(ibt)) g.grad(ibt)[i] += go[r * D + i];
        }
      }
    }
    if (!need_x) return;
    auto& gx = g.grad(ix);
    for (std::size_t r = 0; r < rows; ++r) {
      double sd = 0, sdx = 0;
      for (int i = 0; i < D; ++i) {
        const double dxh = go[r * D + i] * gv[i];
        sd += dxh;
        sdx += dxh * xhat[r * D + i];
      }
      const T md = static_cast<T>(sd / D), mdx = static_cast<T>(sdx / D);
      for (int i = 0; i < D; ++i) {
        const T dxh = go[r * D + i] * gv[i];
        gx[r * D + i] += rstd[r] * (dxh - md - xhat[r * D + i] * mdx);
      }
    }
  });
}

template <typename T>
Var<T> linear(Var<T> x, Var<T> weight, Var<T> bias) {
  detail::require_rank(weight, 2, "linear", "weight");
  const auto& s = x.shape();
  if (s.empty()) throw ShapeError("linear: scalar input");
  const int Din = s.back(), Dout = weight.shape()[0];
  if (weight.shape()[1] != Din) {
    throw ShapeError("linear: weight " + to_string(weight.shape()) + " incompatible with input " + to_string(s));
  }
  const bool has_bias = bias.valid();
  if (has_bias && bias.value().numel() != static_cast<std::size_t>(Dout)) {
    throw ShapeError("linear: bias must have " + std::to_string(Dout) + " entries");
  }
  const auto rows = static_cast<Eigen::Index>(x.value().numel() / static_cast<std::size_t>(Din));
  Shape out_shape = s;
  out_shape.back() = Dout;
  Tensor<T> out(out_shape);
  MapMat<T> Y(out.data(), rows, Dout);
  Y.noalias() = CMapMat<T>(x.value().data(), rows, Din) * CMapMat<T>(weight.value().data(), Dout, Din).transpose();
  if (has_bias) {
    Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> bv(bias.value().data(), Dout);
    Y.rowwise() += bv;
  }
  std::vector<Var<T>> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  const int ix = x.id(), iw = weight.id(), ib = has_bias ? bias.id() : -1;
  return x.graph().record(std::move(out), inputs, [=](Graph<T>& g, int self) {
    CMapMat<T> DY(g.grad(self).data(), rows, Dout);
    if (g.requires_grad(ix)) {
      MapMat<T>(g.grad(ix).data(), rows, Din).noalias() += DY * CMapMat<T>(g.value(iw).data(), Dout, Din);
    }
    if (g.requires_grad(iw)) {
      MapMat<T>(g.grad(iw).data(), Dout, Din).noalias() += DY.transpose() * CMapMat<T>(g.value(ix).data(), rows, Din);
    }
    if (ib >= 0 && g.requires_grad(ib)) {
      auto& gb = g.grad(ib);
      for (Eigen::Index r = 0; r < rows; ++r) {
        for (int o = 0; o < Dout; ++o) gb[o] += DY(r, o);
      }
    }
  });
}

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b, bool transpose_a, bool transpose_b) {
  detail::require_rank(a, 3, "matmul", "lhs");
  detail::require_rank(b, 3, "matmul", "rhs");
  const auto& as = a.shape();
  const auto& bs = b.shape();
  if (as[0] != bs[0]) throw ShapeError("matmul: batch mismatch " + to_string(as) + " vs " + to_string(bs));
  const int B = as[0];
  const int ar = as[1], ac = as[2], br = bs[1], bc = bs[2];
  const int M = transpose_a ? ac : ar, Ka = transpose_a ? ar : ac;
  const int Kb = transpose_b ? bc : br, N = transpose_b ? br : bc;
  if (Ka != Kb) throw ShapeError("matmul: inner extents differ " + to_string(as) + " vs " + to_string(bs));
  Tensor<T> out({B, M, N});
  const std::size_t asz = static_cast<std::size_t>(ar) * ac, bsz = static_cast<std::size_t>(br) * bc,
                    osz = static_cast<std::size_t>(M) * N;
  for (int i = 0; i < B; ++i) {
    CMapMat<T> A(a.value().data() + i * asz, ar, ac);
    CMapMat<T> Bm(b.value().data() + i * bsz, br, bc);
    MapMat<T> O(out.data() + i * osz, M, N);
    if (!transpose_a && !transpose_b) O.noalias() = A * Bm;
    else if (!transpose_a && transpose_b) O.noalias() = A * Bm.transpose();
    else if (transpose_a && !transpose_b) O.noalias() = A.transpose() * Bm;
    else O.noalias() = A.transpose() * Bm.transpose();
  }
  const int ia = a.id(), ib = b.id();
  return a.graph().record(std::move(out), {a, b}, [=](Graph<T>& g, int self) {
    const auto& go = g.grad(self);
    for (int i = 0; i < B; ++i) {
      CMapMat<T> G(go.data() + i * osz, M, N);
      CMapMat<T> A(g.value(ia).data() + i * asz, ar, ac);
      CMapMat<T> Bm(g.value(ib).data() + i * bsz, br, bc);
      // op(A) = A or A^T, with d op(A) = G op(B)^T and d op(B) = op(A)^T G.
      if (g.requires_grad(ia)) {
        MapMat<T> GA(g.grad(ia).data() + i * asz, ar, ac);
        if (!transpose_a && !transpose_b) GA.noalias() += G * Bm.transpose();
        else if (!transpose_a && transpose_b) GA.noalias() += G * Bm;
        else if (transpose_a && !transpose_b) GA.noalias() += Bm * G.transpose();
        else GA.noalias() += Bm.transpose() * G.transpose();
      }
      if (g.requires_grad(ib)) {
        MapMat<T> GB(g.grad(ib).data() + i * bsz, br, bc);
        if (!transpose_a && !transpose_b) GB.noalias() += A.transpose() * G;
        else if (!transpose_a && transpose_b) GB.noalias() += G.transpose() * A;
        else if (transpose_a && !transpose_b) GB.noalias() += A * G;
        else GB.noalias() += G.transpose() * A.transpose();
      }
    }
  });
}

template <typename T>
Var<T> softmax(Var<T> x) {
  const auto& s = x.shape();
  if (s.empty()) throw ShapeError("softmax: scalar input");
  const int D = s.back();
  const std::size_t rows = x.value().numel() / static_cast<std::size_t>(D);
  Tensor<T> out(s);
  const auto& xv = x.value();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* p = xv.data() + r * D;
    T* o = out.data() + r * D;
    const T mx = *std::max_element(p, p + D);
    T z = 0;
    for (int i = 0; i < D; ++i) z += (o[i] = std::exp(p[i] - mx));
    for (int i = 0; i < D; ++i) o[i] /= z;
  }
  const int ix = x.id();
  return x.graph().record(std::move(out), {x}, [ix, rows, D](Graph<T>& g, int self) {
    const auto& go = g.grad(self);
    const auto& y = g.value(self);
    auto& gx = g.grad(ix);
    for (std::size_t r = 0; r < rows; ++r) {
      T dot = 0;
      for (int i = 0; i < D; ++i) dot += go[r * D + i] * y[r * D + i];
      for (int i = 0; i < D; ++i) gx[r * D + i] += y[r * D + i] * (go[r * D + i] - dot);
    }
  });
}

#define MIXNET_INSTANTIATE(T)                                                \
  template Var<T> conv2d(Var<T>, Var<T>, Var<T>, int, int);                  \
  template Var<T> group_norm(Var<T>, Var<T>, Var<T>, int, T);                \
  template Var<T> layer_norm(Var<T>, Var<T>, Var<T>, T);                     \
  template Var<T> linear(Var<T>, Var<T>, Var<T>);                            \
  template Var<T> matmul(Var<T>, Var<T>, bool, bool);                        \
  template Var<T> softmax(Var<T>);

MIXNET_INSTANTIATE(float)
MIXNET_INSTANTIATE(double)
#undef MIXNET_INSTANTIATE

}  // namespace mixnet::ops
