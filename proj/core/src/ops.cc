// ops.cc

// Copyright 2026  The svsep Authors

// See LICENSE for clarification regarding multiple authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "svsep/ops.h"

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "svsep/error.h"

namespace svsep::nn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;
using Stride = Eigen::OuterStride<>;
template <typename T>
using StridedMat = Eigen::Map<RowMat<T>, 0, Stride>;
template <typename T>
using CStridedMat = Eigen::Map<const RowMat<T>, 0, Stride>;

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

template <typename T>
bool wants(const Node<T>& n, std::size_t i) {
  return n.inputs[i]->requires_grad;
}

template <typename T>
Tensor<T>& grad_of(Node<T>& n, std::size_t i) {
  return n.inputs[i]->grad_buffer();
}

// Upper bound on im2col buffer elements per chunk.
constexpr std::size_t kColBudget = std::size_t(1) << 22;

struct ConvGeom {
  int c_in, c_out, kh, kw, h, w, out_h, out_w;
  Padding2d pad;
  int K() const { return c_in * kh * kw; }
};

// Fills col[K][rows * out_w] for output rows [oy0, oy0 + rows).
template <typename T>
void im2col(const T* x, const ConvGeom& g, int oy0, int rows, T* col) {
  const std::size_t ncol = std::size_t(rows) * std::size_t(g.out_w);
  for (int ci = 0; ci < g.c_in; ++ci) {
    const T* plane = x + std::size_t(ci) * std::size_t(g.h) * std::size_t(g.w);
    for (int ky = 0; ky < g.kh; ++ky)
      for (int kx = 0; kx < g.kw; ++kx) {
        T* dst = col + std::size_t((ci * g.kh + ky) * g.kw + kx) * ncol;
        const int dx = kx - g.pad.left;
        const int x_lo = std::max(0, -dx);
        const int x_hi = std::min(g.out_w, g.w - dx);
        for (int r = 0; r < rows; ++r) {
          T* row = dst + std::size_t(r) * std::size_t(g.out_w);
          const int iy = oy0 + r + ky - g.pad.top;
          if (iy < 0 || iy >= g.h || x_lo >= x_hi) {
            std::fill(row, row + g.out_w, T(0));
            continue;
          }
          const T* src = plane + std::size_t(iy) * std::size_t(g.w);
          std::fill(row, row + x_lo, T(0));
          std::copy(src + x_lo + dx, src + x_hi + dx, row + x_lo);
          std::fill(row + x_hi, row + g.out_w, T(0));
        }
      }
  }
}

template <typename T>
void col2im(const T* col, const ConvGeom& g, int oy0, int rows, T* dx_plane) {
  const std::size_t ncol = std::size_t(rows) * std::size_t(g.out_w);
  for (int ci = 0; ci < g.c_in; ++ci) {
    T* plane = dx_plane + std::size_t(ci) * std::size_t(g.h) * std::size_t(g.w);
    for (int ky = 0; ky < g.kh; ++ky)
      for (int kx = 0; kx < g.kw; ++kx) {
        const T* src = col + std::size_t((ci * g.kh + ky) * g.kw + kx) * ncol;
        const int dx = kx - g.pad.left;
        const int x_lo = std::max(0, -dx);
        const int x_hi = std::min(g.out_w, g.w - dx);
        for (int r = 0; r < rows; ++r) {
          const int iy = oy0 + r + ky - g.pad.top;
          if (iy < 0 || iy >= g.h) continue;
          const T* row = src + std::size_t(r) * std::size_t(g.out_w);
          T* d = plane + std::size_t(iy) * std::size_t(g.w);
          for (int ox = x_lo; ox < x_hi; ++ox) d[ox + dx] += row[ox];
        }
      }
  }
}

int chunk_rows(const ConvGeom& g) {
  const std::size_t per_row = std::size_t(g.K()) * std::size_t(g.out_w);
  return int(std::clamp<std::size_t>(kColBudget / std::max<std::size_t>(per_row, 1),
                                     1, std::size_t(g.out_h)));
}

}  // namespace

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias,
              Padding2d pad) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  require(ws.c == xs.c, "conv2d: weight expects " + std::to_string(ws.c) +
                            " input channels, got " + xs.str());
  ConvGeom g{xs.c, ws.n, ws.h, ws.w, xs.h, xs.w, 0, 0, pad};
  g.out_h = xs.h + pad.top + pad.bottom - ws.h + 1;
  g.out_w = xs.w + pad.left + pad.right - ws.w + 1;
  require(g.out_h > 0 && g.out_w > 0, "conv2d: empty output for " + xs.str());
  const bool has_bias = bias.defined();
  const bool pointwise = ws.h == 1 && ws.w == 1 && pad.top == 0 &&
                         pad.bottom == 0 && pad.left == 0 && pad.right == 0;

  Tensor<T> out(Shape{xs.n, g.c_out, g.out_h, g.out_w});
  const std::size_t out_plane = std::size_t(g.out_h) * std::size_t(g.out_w);
  const std::size_t in_plane = xs.plane();
  CMapMat<T> W(weight.value().data(), g.c_out, g.K());
  std::vector<T> col;
  for (int n = 0; n < xs.n; ++n) {
    const T* xp = x.value().plane(n, 0);
    T* yp = out.plane(n, 0);
    if (pointwise) {
      CMapMat<T> X(xp, g.c_in, Eigen::Index(in_plane));
      MapMat<T>(yp, g.c_out, Eigen::Index(out_plane)).noalias() = W * X;
    } else {
      const int rows = chunk_rows(g);
      col.resize(std::size_t(g.K()) * std::size_t(rows) * std::size_t(g.out_w));
      for (int oy = 0; oy < g.out_h; oy += rows) {
        const int r = std::min(rows, g.out_h - oy);
        const Eigen::Index ncol = Eigen::Index(r) * g.out_w;
        im2col(xp, g, oy, r, col.data());
        CMapMat<T> C(col.data(), g.K(), ncol);
        StridedMat<T> Y(yp + std::size_t(oy) * std::size_t(g.out_w), g.c_out,
                        ncol, Stride(Eigen::Index(out_plane)));
        Y.noalias() = W * C;
      }
    }
    if (has_bias) {
      const T* b = bias.value().data();
      for (int co = 0; co < g.c_out; ++co) {
        T* p = yp + std::size_t(co) * out_plane;
        for (std::size_t i = 0; i < out_plane; ++i) p[i] += b[co];
      }
    }
  }

  std::vector<Var<T>> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  return make_result<T>(
      std::move(out), std::move(inputs),
      [g, pointwise, has_bias, in_plane, out_plane](Node<T>& node) {
        const Tensor<T>& gy = node.grad;
        const Tensor<T>& xv = node.inputs[0]->value;
        const Tensor<T>& wv = node.inputs[1]->value;
        const int batch = xv.shape().n;
        CMapMat<T> W(wv.data(), g.c_out, g.K());
        const bool need_x = wants(node, 0), need_w = wants(node, 1);
        T* dx = need_x ? grad_of(node, 0).data() : nullptr;
        T* dw = need_w ? grad_of(node, 1).data() : nullptr;
        std::vector<T> col, dcol;
        for (int n = 0; n < batch; ++n) {
          const T* xp = xv.plane(n, 0);
          const T* gp = gy.plane(n, 0);
          if (pointwise) {
            CMapMat<T> G(gp, g.c_out, Eigen::Index(out_plane));
            if (need_w)
              MapMat<T>(dw, g.c_out, g.K()).noalias() +=
                  G * CMapMat<T>(xp, g.c_in, Eigen::Index(in_plane)).transpose();
            if (need_x)
              MapMat<T>(dx + std::size_t(n) * std::size_t(g.c_in) * in_plane,
                        g.c_in, Eigen::Index(in_plane))
                  .noalias() += W.transpose() * G;
            continue;
          }
          const int rows = chunk_rows(g);
          col.resize(std::size_t(g.K()) * std::size_t(rows) * std::size_t(g.out_w));
          if (need_x) dcol.resize(col.size());
          for (int oy = 0; oy < g.out_h; oy += rows) {
            const int r = std::min(rows, g.out_h - oy);
            const Eigen::Index ncol = Eigen::Index(r) * g.out_w;
            CStridedMat<T> G(gp + std::size_t(oy) * std::size_t(g.out_w),
                             g.c_out, ncol, Stride(Eigen::Index(out_plane)));
            if (need_w) {
              im2col(xp, g, oy, r, col.data());
              MapMat<T>(dw, g.c_out, g.K()).noalias() +=
                  G * CMapMat<T>(col.data(), g.K(), ncol).transpose();
            }
            if (need_x) {
              MapMat<T>(dcol.data(), g.K(), ncol).noalias() = W.transpose() * G;
              col2im(dcol.data(), g, oy, r,
                     dx + std::size_t(n) * std::size_t(g.c_in) * in_plane);
            }
          }
        }
        if (has_bias && wants(node, 2)) {
          T* db = grad_of(node, 2).data();
          for (int n = 0; n < batch; ++n)
            for (int co = 0; co < g.c_out; ++co) {
              const T* p = gy.plane(n, co);
              double s = 0.0;
              for (std::size_t i = 0; i < out_plane; ++i) s += p[i];
              db[co] += T(s);
            }
        }
      });
}

template <typename T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                  BatchNormState<T>& state, bool training, double momentum,
                  double eps) {
  const Shape s = x.shape();
  require(gamma.value().size() == std::size_t(s.c) &&
              beta.value().size() == std::size_t(s.c),
          "batch_norm: parameter size mismatch for " + s.str());
  if (state.running_mean.empty()) {
    state.running_mean.assign(std::size_t(s.c), T(0));
    state.running_var.assign(std::size_t(s.c), T(1));
  }
  const std::size_t plane = s.plane();
  const double count = double(s.n) * double(plane);
  std::vector<T> mean(std::size_t(s.c)), inv_std(static_cast<std::size_t>(s.c));
  for (int c = 0; c < s.c; ++c) {
    if (training) {
      double sum = 0.0, sq = 0.0;
      for (int n = 0; n < s.n; ++n) {
        const T* p = x.value().plane(n, c);
        for (std::size_t i = 0; i < plane; ++i) sum += p[i];
      }
      const double mu = sum / count;
      for (int n = 0; n < s.n; ++n) {
        const T* p = x.value().plane(n, c);
        for (std::size_t i = 0; i < plane; ++i) {
          const double d = p[i] - mu;
          sq += d * d;
        }
      }
      const double var = sq / count;
      mean[std::size_t(c)] = T(mu);
      inv_std[std::size_t(c)] = T(1.0 / std::sqrt(var + eps));
      const double unbiased = count > 1 ? var * count / (count - 1) : var;
      auto& rm = state.running_mean[std::size_t(c)];
      auto& rv = state.running_var[std::size_t(c)];
      rm = T((1.0 - momentum) * rm + momentum * mu);
      rv = T((1.0 - momentum) * rv + momentum * unbiased);
    } else {
      mean[std::size_t(c)] = state.running_mean[std::size_t(c)];
      inv_std[std::size_t(c)] =
          T(1.0 / std::sqrt(double(state.running_var[std::size_t(c)]) + eps));
    }
  }
  Tensor<T> out(s);
  const T* gm = gamma.value().data();
  const T* bt = beta.value().data();
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const T* p = x.value().plane(n, c);
      T* q = out.plane(n, c);
      const T scale = gm[c] * inv_std[std::size_t(c)];
      const T shift = bt[c] - mean[std::size_t(c)] * scale;
      for (std::size_t i = 0; i < plane; ++i) q[i] = p[i] * scale + shift;
    }
  return make_result<T>(
      std::move(out), {x, gamma, beta},
      [mean, inv_std, training, count, plane](Node<T>& node) {
        const Tensor<T>& gy = node.grad;
        const Tensor<T>& xv = node.inputs[0]->value;
        const T* gm = node.inputs[1]->value.data();
        const Shape s = xv.shape();
        T* dgamma = wants(node, 1) ? grad_of(node, 1).data() : nullptr;
        T* dbeta = wants(node, 2) ? grad_of(node, 2).data() : nullptr;
        T* dx = wants(node, 0) ? grad_of(node, 0).data() : nullptr;
        for (int c = 0; c < s.c; ++c) {
          const double mu = mean[std::size_t(c)];
          const double is = inv_std[std::size_t(c)];
          double sum_g = 0.0, sum_gx = 0.0;
          for (int n = 0; n < s.n; ++n) {
            const T* p = xv.plane(n, c);
            const T* g = gy.plane(n, c);
            for (std::size_t i = 0; i < plane; ++i) {
              sum_g += g[i];
              sum_gx += g[i] * (p[i] - mu) * is;
            }
          }
          if (dgamma) dgamma[c] += T(sum_gx);
          if (dbeta) dbeta[c] += T(sum_g);
          if (!dx) continue;
          const double gi = gm[c] * is;
          for (int n = 0; n < s.n; ++n) {
            const T* p = xv.plane(n, c);
            const T* g = gy.plane(n, c);
            T* d = dx + xv.index(n, c, 0, 0);
            if (training) {
              const double mg = sum_g / count, mgx = sum_gx / count;
              for (std::size_t i = 0; i < plane; ++i) {
                const double xhat = (p[i] - mu) * is;
                d[i] += T(gi * (g[i] - mg - xhat * mgx));
              }
            } else {
              for (std::size_t i = 0; i < plane; ++i) d[i] += T(gi * g[i]);
            }
          }
        }
      });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  Tensor<T> out(x.shape());
  const T* p = x.value().data();
  T* q = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) q[i] = p[i] > T(0) ? p[i] : T(0);
  return make_result<T>(std::move(out), {x}, [](Node<T>& node) {
    const T* p = node.inputs[0]->value.data();
    const T* g = node.grad.data();
    T* d = grad_of(node, 0).data();
    for (std::size_t i = 0; i < node.grad.size(); ++i)
      if (p[i] > T(0)) d[i] += g[i];
  });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require(a.shape() == b.shape(),
          "add: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  Tensor<T> out = a.value();
  out.add_(b.value());
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& node) {
    for (std::size_t i = 0; i < 2; ++i)
      if (wants(node, i)) grad_of(node, i).add_(node.grad);
  });
}

template <typename T>
Var<T> concat_channels(std::span<const Var<T>> xs) {
  require(!xs.empty(), "concat_channels: no inputs");
  Shape s = xs[0].shape();
  int channels = 0;
  for (const auto& x : xs) {
    const Shape& t = x.shape();
    require(t.n == s.n && t.h == s.h && t.w == s.w,
            "concat_channels: mismatch " + t.str() + " vs " + s.str());
    channels += t.c;
  }
  const Shape os{s.n, channels, s.h, s.w};
  Tensor<T> out(os);
  const std::size_t plane = s.plane();
  for (int n = 0; n < s.n; ++n) {
    int c0 = 0;
    for (const auto& x : xs) {
      const int c = x.shape().c;
      std::copy_n(x.value().plane(n, 0), std::size_t(c) * plane, out.plane(n, c0));
      c0 += c;
    }
  }
  std::vector<Var<T>> inputs(xs.begin(), xs.end());
  return make_result<T>(std::move(out), std::move(inputs), [plane](Node<T>& node) {
    const Shape os = node.grad.shape();
    for (int n = 0; n < os.n; ++n) {
      int c0 = 0;
      for (std::size_t i = 0; i < node.inputs.size(); ++i) {
        const int c = node.inputs[i]->value.shape().c;
        if (wants(node, i)) {
          Tensor<T>& d = grad_of(node, i);
          const T* g = node.grad.plane(n, c0);
          T* dp = d.plane(n, 0);
          for (std::size_t k = 0; k < std::size_t(c) * plane; ++k) dp[k] += g[k];
        }
        c0 += c;
      }
    }
  });
}

template <typename T>
Var<T> causal_pool2(const Var<T>& x) {
  const Shape s = x.shape();
  const int oh = (s.h + 1) / 2, ow = (s.w + 1) / 2;
  Tensor<T> out(Shape{s.n, s.c, oh, ow});
  auto visit = [s, oh, ow](auto&& fn) {
    for (int to = 0; to < oh; ++to)
      for (int fo = 0; fo < ow; ++fo) {
        int cnt = 0;
        for (int t = 2 * to - 1; t <= 2 * to; ++t)
          for (int f = 2 * fo; f <= 2 * fo + 1; ++f)
            if (t >= 0 && t < s.h && f < s.w) ++cnt;
        const T inv = T(1) / T(cnt);
        for (int t = 2 * to - 1; t <= 2 * to; ++t)
          for (int f = 2 * fo; f <= 2 * fo + 1; ++f)
            if (t >= 0 && t < s.h && f < s.w)
              fn(std::size_t(t) * std::size_t(s.w) + std::size_t(f),
                 std::size_t(to) * std::size_t(ow) + std::size_t(fo), inv);
      }
  };
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const T* p = x.value().plane(n, c);
      T* q = out.plane(n, c);
      visit([&](std::size_t i, std::size_t o, T w) { q[o] += w * p[i]; });
    }
  return make_result<T>(std::move(out), {x}, [visit, s](Node<T>& node) {
    Tensor<T>& d = grad_of(node, 0);
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c) {
        const T* g = node.grad.plane(n, c);
        T* dp = d.plane(n, c);
        visit([&](std::size_t i, std::size_t o, T w) { dp[i] += w * g[o]; });
      }
  });
}

template <typename T>
Var<T> upsample2(const Var<T>& x, int h, int w) {
  const Shape s = x.shape();
  require((h + 1) / 2 == s.h && (w + 1) / 2 == s.w,
          "upsample2: cannot map " + s.str() + " to " + std::to_string(h) +
              "x" + std::to_string(w));
  Tensor<T> out(Shape{s.n, s.c, h, w});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const T* p = x.value().plane(n, c);
      T* q = out.plane(n, c);
      for (int t = 0; t < h; ++t)
        for (int f = 0; f < w; ++f)
          q[std::size_t(t) * std::size_t(w) + std::size_t(f)] =
              p[std::size_t(t / 2) * std::size_t(s.w) + std::size_t(f / 2)];
    }
  return make_result<T>(std::move(out), {x}, [s, h, w](Node<T>& node) {
    Tensor<T>& d = grad_of(node, 0);
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c) {
        const T* g = node.grad.plane(n, c);
        T* dp = d.plane(n, c);
        for (int t = 0; t < h; ++t)
          for (int f = 0; f < w; ++f)
            dp[std::size_t(t / 2) * std::size_t(s.w) + std::size_t(f / 2)] +=
                g[std::size_t(t) * std::size_t(w) + std::size_t(f)];
      }
  });
}

template <typename T>
Var<T> freq_pool(const Var<T>& x, int factor) {
  const Shape s = x.shape();
  require(factor >= 1, "freq_pool: factor must be >= 1");
  const int ow = (s.w + factor - 1) / factor;
  Tensor<T> out(Shape{s.n, s.c, s.h, ow});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const T* p = x.value().plane(n, c);
      T* q = out.plane(n, c);
      for (int t = 0; t < s.h; ++t)
        for (int fo = 0; fo < ow; ++fo) {
          const int f0 = fo * factor, f1 = std::min(s.w, f0 + factor);
          T acc = T(0);
          for (int f = f0; f < f1; ++f) acc += p[std::size_t(t) * std::size_t(s.w) + std::size_t(f)];
          q[std::size_t(t) * std::size_t(ow) + std::size_t(fo)] = acc / T(f1 - f0);
        }
    }
  return make_result<T>(std::move(out), {x}, [s, ow, factor](Node<T>& node) {
    Tensor<T>& d = grad_of(node, 0);
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c) {
        const T* g = node.grad.plane(n, c);
        T* dp = d.plane(n, c);
        for (int t = 0; t < s.h; ++t)
          for (int fo = 0; fo < ow; ++fo) {
            const int f0 = fo * factor, f1 = std::min(s.w, f0 + factor);
            const T v = g[std::size_t(t) * std::size_t(ow) + std::size_t(fo)] / T(f1 - f0);
            for (int f = f0; f < f1; ++f) dp[std::size_t(t) * std::size_t(s.w) + std::size_t(f)] += v;
          }
      }
  });
}

namespace {

// Copies channels x band bins of x[n] into a [t, c*width] matrix.
template <typename T>
void gather_band(const Tensor<T>& x, int n, int f0, int width, RowMat<T>& m) {
  const Shape s = x.shape();
  m.resize(s.h, Eigen::Index(s.c) * width);
  for (int c = 0; c < s.c; ++c) {
    const T* p = x.plane(n, c);
    for (int t = 0; t < s.h; ++t)
      for (int j = 0; j < width; ++j)
        m(t, Eigen::Index(c) * width + j) =
            p[std::size_t(t) * std::size_t(s.w) + std::size_t(f0 + j)];
  }
}

template <typename T>
void scatter_band_add(const RowMat<T>& m, int n, int f0, int width, Tensor<T>& x) {
  const Shape s = x.shape();
  for (int c = 0; c < s.c; ++c) {
    T* p = x.plane(n, c);
    for (int t = 0; t < s.h; ++t)
      for (int j = 0; j < width; ++j)
        p[std::size_t(t) * std::size_t(s.w) + std::size_t(f0 + j)] +=
            m(t, Eigen::Index(c) * width + j);
  }
}

// Row-wise softmax over the lower triangle (inclusive); the rest is zero.
template <typename T>
void causal_softmax(RowMat<T>& a) {
  const Eigen::Index rows = a.rows();
  for (Eigen::Index t = 0; t < rows; ++t) {
    T mx = a(t, 0);
    for (Eigen::Index s = 1; s <= t; ++s) mx = std::max(mx, a(t, s));
    T sum = T(0);
    for (Eigen::Index s = 0; s <= t; ++s) {
      a(t, s) = std::exp(a(t, s) - mx);
      sum += a(t, s);
    }
    for (Eigen::Index s = 0; s <= t; ++s) a(t, s) /= sum;
    for (Eigen::Index s = t + 1; s < rows; ++s) a(t, s) = T(0);
  }
}

}  // namespace

template <typename T>
Var<T> causal_attention(const Var<T>& q, const Var<T>& k, const Var<T>& v,
                        int band) {
  const Shape qs = q.shape(), ks = k.shape(), vs = v.shape();
  require(qs == ks, "attention: query/key shape mismatch");
  require(vs.n == qs.n && vs.h == qs.h && vs.w == qs.w,
          "attention: value shape mismatch");
  require(band >= 1, "attention: band must be >= 1");
  const int bands = (qs.w + band - 1) / band;
  const bool record = grad_enabled() &&
                      (q.requires_grad() || k.requires_grad() || v.requires_grad());
  Tensor<T> out(vs);
  std::vector<RowMat<T>> weights;
  if (record) weights.resize(std::size_t(qs.n) * std::size_t(bands));
  RowMat<T> Q, K, V, A, O;
  for (int n = 0; n < qs.n; ++n)
    for (int b = 0; b < bands; ++b) {
      const int f0 = b * band, width = std::min(band, qs.w - f0);
      const T scale = T(1) / std::sqrt(T(qs.c) * T(width));
      gather_band(q.value(), n, f0, width, Q);
      gather_band(k.value(), n, f0, width, K);
      gather_band(v.value(), n, f0, width, V);
      A.noalias() = (Q * K.transpose()) * scale;
      causal_softmax(A);
      O.noalias() = A * V;
      scatter_band_add(O, n, f0, width, out);
      if (record) weights[std::size_t(n) * std::size_t(bands) + std::size_t(b)] = A;
    }
  return make_result<T>(
      std::move(out), {q, k, v},
      [weights = std::move(weights), band, bands](Node<T>& node) {
        const Tensor<T>& qv = node.inputs[0]->value;
        const Tensor<T>& kv = node.inputs[1]->value;
        const Tensor<T>& vv = node.inputs[2]->value;
        const Shape qs = qv.shape();
        RowMat<T> Q, K, V, G, dA, dS, tmp;
        for (int n = 0; n < qs.n; ++n)
          for (int b = 0; b < bands; ++b) {
            const int f0 = b * band, width = std::min(band, qs.w - f0);
            const T scale = T(1) / std::sqrt(T(qs.c) * T(width));
            const RowMat<T>& A =
                weights[std::size_t(n) * std::size_t(bands) + std::size_t(b)];
            gather_band(node.grad, n, f0, width, G);
            if (wants(node, 2)) {
              tmp.noalias() = A.transpose() * G;
              scatter_band_add(tmp, n, f0, width, grad_of(node, 2));
            }
            if (!wants(node, 0) && !wants(node, 1)) continue;
            gather_band(vv, n, f0, width, V);
            dA.noalias() = G * V.transpose();
            dS = A.cwiseProduct(dA);
            const auto row = dS.rowwise().sum().eval();
            dS -= A.cwiseProduct(row.replicate(1, A.cols()));
            dS *= scale;
            if (wants(node, 0)) {
              gather_band(kv, n, f0, width, K);
              tmp.noalias() = dS * K;
              scatter_band_add(tmp, n, f0, width, grad_of(node, 0));
            }
            if (wants(node, 1)) {
              gather_band(qv, n, f0, width, Q);
              tmp.noalias() = dS.transpose() * Q;
              scatter_band_add(tmp, n, f0, width, grad_of(node, 1));
            }
          }
      });
}

template <typename T>
Var<T> frames_to_features(const Var<T>& x) {
  const Shape s = x.shape();
  const int d = s.c * s.w;
  Tensor<T> out(Shape{s.n, 1, s.h, d});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int t = 0; t < s.h; ++t)
        std::copy_n(x.value().plane(n, c) + std::size_t(t) * std::size_t(s.w),
                    s.w, &out.at(n, 0, t, c * s.w));
  return make_result<T>(std::move(out), {x}, [s](Node<T>& node) {
    Tensor<T>& dx = grad_of(node, 0);
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c)
        for (int t = 0; t < s.h; ++t) {
          const T* g = &node.grad.at(n, 0, t, c * s.w);
          T* d = dx.plane(n, c) + std::size_t(t) * std::size_t(s.w);
          for (int f = 0; f < s.w; ++f) d[f] += g[f];
        }
  });
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
  const Shape s = x.shape();
  const Shape ws = weight.shape();
  require(s.c == 1 && ws.c == s.w, "linear: input " + s.str() +
                                       " incompatible with weight " + ws.str());
  const int o = ws.n;
  Tensor<T> out(Shape{s.n, 1, s.h, o});
  CMapMat<T> W(weight.value().data(), o, s.w);
  Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(bias.value().data(), o);
  for (int n = 0; n < s.n; ++n) {
    CMapMat<T> X(x.value().plane(n, 0), s.h, s.w);
    MapMat<T> Y(out.plane(n, 0), s.h, o);
    Y.noalias() = X * W.transpose();
    Y.rowwise() += b;
  }
  return make_result<T>(std::move(out), {x, weight, bias}, [s, o](Node<T>& node) {
    CMapMat<T> W(node.inputs[1]->value.data(), o, s.w);
    for (int n = 0; n < s.n; ++n) {
      CMapMat<T> G(node.grad.plane(n, 0), s.h, o);
      if (wants(node, 0))
        MapMat<T>(grad_of(node, 0).plane(n, 0), s.h, s.w).noalias() += G * W;
      if (wants(node, 1))
        MapMat<T>(grad_of(node, 1).data(), o, s.w).noalias() +=
            G.transpose() * CMapMat<T>(node.inputs[0]->value.plane(n, 0), s.h, s.w);
      if (wants(node, 2)) {
        Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> db(grad_of(node, 2).data(), o);
        db += G.colwise().sum();
      }
    }
  });
}

template <typename T>
Var<T> concat_features(const Var<T>& a, const Var<T>& b) {
  const Shape sa = a.shape(), sb = b.shape();
  require(sa.n == sb.n && sa.c == 1 && sb.c == 1 && sa.h == sb.h,
          "concat_features: mismatch " + sa.str() + " vs " + sb.str());
  Tensor<T> out(Shape{sa.n, 1, sa.h, sa.w + sb.w});
  for (int n = 0; n < sa.n; ++n)
    for (int t = 0; t < sa.h; ++t) {
      std::copy_n(&a.value().at(n, 0, t, 0), sa.w, &out.at(n, 0, t, 0));
      std::copy_n(&b.value().at(n, 0, t, 0), sb.w, &out.at(n, 0, t, sa.w));
    }
  return make_result<T>(std::move(out), {a, b}, [sa, sb](Node<T>& node) {
    for (int n = 0; n < sa.n; ++n)
      for (int t = 0; t < sa.h; ++t) {
        const T* g = &node.grad.at(n, 0, t, 0);
        if (wants(node, 0)) {
          T* d = &grad_of(node, 0).at(n, 0, t, 0);
          for (int i = 0; i < sa.w; ++i) d[i] += g[i];
        }
        if (wants(node, 1)) {
          T* d = &grad_of(node, 1).at(n, 0, t, 0);
          for (int i = 0; i < sb.w; ++i) d[i] += g[sa.w + i];
        }
      }
  });
}

namespace {

template <typename T>
T sigm(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

}  // namespace

template <typename T>
Var<T> gru(const Var<T>& x, const GruWeights<T>& w, bool reverse) {
  const Shape s = x.shape();
  const int d = s.w, steps = s.h;
  const int h3 = w.w_ih.shape().n, h = h3 / 3;
  require(s.c == 1 && w.w_ih.shape().c == d && w.w_hh.shape().n == h3 &&
              w.w_hh.shape().c == h,
          "gru: weight shapes incompatible with input " + s.str());
  Tensor<T> out(Shape{s.n, 1, steps, h});
  // Cache per (n, t): r, z, candidate, hidden-projection of n gate, h_prev.
  const std::size_t cache_row = std::size_t(5) * std::size_t(h);
  std::vector<T> cache(std::size_t(s.n) * std::size_t(steps) * cache_row);
  CMapMat<T> Wih(w.w_ih.value().data(), h3, d);
  CMapMat<T> Whh(w.w_hh.value().data(), h3, h);
  Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> bih(w.b_ih.value().data(), h3);
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bhh(w.b_hh.value().data(), h3);
  RowMat<T> gx;
  Eigen::Matrix<T, Eigen::Dynamic, 1> hv(h), gh(h3);
  for (int n = 0; n < s.n; ++n) {
    CMapMat<T> X(x.value().plane(n, 0), steps, d);
    gx.noalias() = X * Wih.transpose();
    gx.rowwise() += bih;
    hv.setZero();
    for (int i = 0; i < steps; ++i) {
      const int t = reverse ? steps - 1 - i : i;
      gh.noalias() = Whh * hv;
      gh += bhh;
      T* c = cache.data() + (std::size_t(n) * std::size_t(steps) + std::size_t(t)) * cache_row;
      T* y = &out.at(n, 0, t, 0);
      for (int j = 0; j < h; ++j) {
        const T r = sigm(gx(t, j) + gh(j));
        const T z = sigm(gx(t, h + j) + gh(h + j));
        const T cand = std::tanh(gx(t, 2 * h + j) + r * gh(2 * h + j));
        c[j] = r;
        c[h + j] = z;
        c[2 * h + j] = cand;
        c[3 * h + j] = gh(2 * h + j);
        c[4 * h + j] = hv(j);
        y[j] = (T(1) - z) * cand + z * hv(j);
      }
      for (int j = 0; j < h; ++j) hv(j) = y[j];
    }
  }
  return make_result<T>(
      std::move(out), {x, w.w_ih, w.w_hh, w.b_ih, w.b_hh},
      [cache = std::move(cache), s, d, h, h3, steps, reverse, cache_row](Node<T>& node) {
        CMapMat<T> Wih(node.inputs[1]->value.data(), h3, d);
        CMapMat<T> Whh(node.inputs[2]->value.data(), h3, h);
        RowMat<T> dgx(steps, h3);
        Eigen::Matrix<T, Eigen::Dynamic, 1> carry(h), dgh(h3), hprev(h);
        RowMat<T> dWhh = RowMat<T>::Zero(h3, h);
        Eigen::Matrix<T, Eigen::Dynamic, 1> dbhh = Eigen::Matrix<T, Eigen::Dynamic, 1>::Zero(h3);
        for (int n = 0; n < s.n; ++n) {
          carry.setZero();
          for (int i = steps - 1; i >= 0; --i) {
            const int t = reverse ? steps - 1 - i : i;
            const T* c = cache.data() + (std::size_t(n) * std::size_t(steps) + std::size_t(t)) * cache_row;
            const T* g = &node.grad.at(n, 0, t, 0);
            for (int j = 0; j < h; ++j) {
              const T r = c[j], z = c[h + j], cand = c[2 * h + j];
              const T ghn = c[3 * h + j], hp = c[4 * h + j];
              const T dh = g[j] + carry(j);
              const T dcand = dh * (T(1) - z);
              const T dz = dh * (hp - cand);
              const T dan = dcand * (T(1) - cand * cand);
              const T dr = dan * ghn;
              const T dar = dr * r * (T(1) - r);
              const T daz = dz * z * (T(1) - z);
              dgx(t, j) = dar;
              dgx(t, h + j) = daz;
              dgx(t, 2 * h + j) = dan;
              dgh(j) = dar;
              dgh(h + j) = daz;
              dgh(2 * h + j) = dan * r;
              carry(j) = dh * z;
              hprev(j) = hp;
            }
            dWhh.noalias() += dgh * hprev.transpose();
            dbhh += dgh;
            carry.noalias() += Whh.transpose() * dgh;
          }
          CMapMat<T> X(node.inputs[0]->value.plane(n, 0), steps, d);
          if (wants(node, 0))
            MapMat<T>(grad_of(node, 0).plane(n, 0), steps, d).noalias() += dgx * Wih;
          if (wants(node, 1))
            MapMat<T>(grad_of(node, 1).data(), h3, d).noalias() += dgx.transpose() * X;
          if (wants(node, 3)) {
            Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> db(grad_of(node, 3).data(), h3);
            db += dgx.colwise().sum();
          }
        }
        if (wants(node, 2)) MapMat<T>(grad_of(node, 2).data(), h3, h) += dWhh;
        if (wants(node, 4)) {
          Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> db(grad_of(node, 4).data(), h3);
          db += dbhh;
        }
      });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = sigm(x.value().data()[i]);
  return make_result<T>(std::move(out), {x}, [](Node<T>& node) {
    const T* p = node.inputs[0]->value.data();
    T* d = grad_of(node, 0).data();
    for (std::size_t i = 0; i < node.grad.size(); ++i) {
      const T y = sigm(p[i]);
      d[i] += node.grad.data()[i] * y * (T(1) - y);
    }
  });
}

template <typename T>
Var<T> bce_with_logits(const Var<T>& logits, const Tensor<T>& targets) {
  require(logits.value().size() == targets.size() && targets.size() > 0,
          "bce_with_logits: size mismatch");
  const std::size_t m = targets.size();
  double loss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double x = logits.value().data()[i], y = targets.data()[i];
    loss += std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
  }
  Tensor<T> out(Shape{1, 1, 1, 1}, T(loss / double(m)));
  return make_result<T>(std::move(out), {logits}, [targets, m](Node<T>& node) {
    const T g = node.grad.data()[0] / T(m);
    const T* p = node.inputs[0]->value.data();
    T* d = grad_of(node, 0).data();
    for (std::size_t i = 0; i < m; ++i) d[i] += g * (sigm(p[i]) - targets.data()[i]);
  });
}

#define SVSEP_INSTANTIATE_OPS(T)                                                        \
  template Var<T> conv2d<T>(const Var<T>&, const Var<T>&, const Var<T>&, Padding2d);    \
  template Var<T> batch_norm<T>(const Var<T>&, const Var<T>&, const Var<T>&,            \
                                BatchNormState<T>&, bool, double, double);              \
  template Var<T> relu<T>(const Var<T>&);                                               \
  template Var<T> add<T>(const Var<T>&, const Var<T>&);                                 \
  template Var<T> concat_channels<T>(std::span<const Var<T>>);                          \
  template Var<T> causal_pool2<T>(const Var<T>&);                                       \
  template Var<T> upsample2<T>(const Var<T>&, int, int);                                \
  template Var<T> freq_pool<T>(const Var<T>&, int);                                     \
  template Var<T> causal_attention<T>(const Var<T>&, const Var<T>&, const Var<T>&, int);\
  template Var<T> frames_to_features<T>(const Var<T>&);                                 \
  template Var<T> linear<T>(const Var<T>&, const Var<T>&, const Var<T>&);               \
  template Var<T> concat_features<T>(const Var<T>&, const Var<T>&);                     \
  template Var<T> gru<T>(const Var<T>&, const GruWeights<T>&, bool);                    \
  template Var<T> sigmoid<T>(const Var<T>&);                                            \
  template Var<T> bce_with_logits<T>(const Var<T>&, const Tensor<T>&);

SVSEP_INSTANTIATE_OPS(float)
SVSEP_INSTANTIATE_OPS(double)

}  // namespace svsep::nn
