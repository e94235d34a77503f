// SPDX-License-Identifier: Apache-2.0

#include "vitpad/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace vitpad {
namespace {

template <typename S>
using StoragePtr = std::shared_ptr<TensorStorage<S>>;

template <typename S>
bool is_tracked(const TensorStorage<S>& s) {
  return s.requires_grad || s.on_tape;
}

template <typename S>
Tape<S>* recording_tape(std::initializer_list<const Tensor<S>*> inputs) {
  auto* tape = Tape<S>::active();
  if (tape == nullptr) return nullptr;
  for (const auto* t : inputs)
    if (t->tracked()) return tape;
  return nullptr;
}

std::string op_error(const char* op, const Shape& a, const Shape& b) {
  return std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b);
}

// Row-major kernels. All accumulate into C.
// C[M,P] += A[M,K] * B[K,P]
template <typename S>
void gemm_nn(std::size_t M, std::size_t K, std::size_t P, const S* A, const S* B, S* C) {
  for (std::size_t i = 0; i < M; ++i) {
    S* c = C + i * P;
    for (std::size_t k = 0; k < K; ++k) {
      const S aik = A[i * K + k];
      const S* b = B + k * P;
      for (std::size_t j = 0; j < P; ++j) c[j] += aik * b[j];
    }
  }
}

// C[M,K] += A[M,P] * B[K,P]^T
template <typename S>
void gemm_nt(std::size_t M, std::size_t P, std::size_t K, const S* A, const S* B, S* C) {
  for (std::size_t i = 0; i < M; ++i) {
    const S* a = A + i * P;
    for (std::size_t k = 0; k < K; ++k) {
      const S* b = B + k * P;
      S acc = 0;
      for (std::size_t j = 0; j < P; ++j) acc += a[j] * b[j];
      C[i * K + k] += acc;
    }
  }
}

// C[K,P] += A[M,K]^T * B[M,P]
template <typename S>
void gemm_tn(std::size_t M, std::size_t K, std::size_t P, const S* A, const S* B, S* C) {
  for (std::size_t i = 0; i < M; ++i) {
    const S* b = B + i * P;
    for (std::size_t k = 0; k < K; ++k) {
      const S aik = A[i * K + k];
      S* c = C + k * P;
      for (std::size_t j = 0; j < P; ++j) c[j] += aik * b[j];
    }
  }
}

struct AxisSplit {
  std::size_t outer = 1, len = 1, inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.len = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

void check_axis(const char* op, const Shape& shape, std::size_t axis) {
  if (axis >= shape.size())
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " invalid for " +
                     shape_str(shape));
}

// Shared elementwise unary op with derivative computed from input and output.
template <typename S, typename F, typename D>
Tensor<S> unary(const Tensor<S>& x, F f, D dfdx) {
  std::vector<S> out(x.numel());
  auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  Tensor<S> y(x.shape(), std::move(out));
  if (auto* tape = recording_tape<S>({&x})) {
    auto xs = x.storage();
    auto ys = y.storage();
    tape->record({xs}, ys, [xs, ys, dfdx] {
      auto& gx = xs->grad_buffer();
      const auto& gy = ys->grad;
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * dfdx(xs->data[i], ys->data[i]);
    });
  }
  return y;
}

}  // namespace

template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
  const auto& as = a.shape();
  const auto& bs = b.shape();
  if (as.size() < 2 || as.size() != bs.size() || as[as.size() - 1] != bs[bs.size() - 2])
    throw ShapeError(op_error("matmul", as, bs));
  const std::size_t r = as.size();
  const std::size_t M = as[r - 2], K = as[r - 1], P = bs[r - 1];
  Shape out_shape(r);
  std::size_t batches = 1;
  for (std::size_t i = 0; i + 2 < r; ++i) {
    if (as[i] != bs[i] && as[i] != 1 && bs[i] != 1) throw ShapeError(op_error("matmul", as, bs));
    out_shape[i] = std::max(as[i], bs[i]);
    batches *= out_shape[i];
  }
  out_shape[r - 2] = M;
  out_shape[r - 1] = P;

  // Batch offsets with broadcast extents contributing stride 0.
  std::vector<std::size_t> a_off(batches), b_off(batches);
  for (std::size_t bi = 0; bi < batches; ++bi) {
    std::size_t rem = bi, ao = 0, bo = 0, astride = M * K, bstride = K * P;
    for (std::size_t i = r - 2; i-- > 0;) {
      const std::size_t idx = rem % out_shape[i];
      rem /= out_shape[i];
      if (as[i] != 1) ao += idx * astride;
      if (bs[i] != 1) bo += idx * bstride;
      astride *= as[i];
      bstride *= bs[i];
    }
    a_off[bi] = ao;
    b_off[bi] = bo;
  }

  std::vector<S> out(batches * M * P, S(0));
  for (std::size_t bi = 0; bi < batches; ++bi)
    gemm_nn(M, K, P, a.data().data() + a_off[bi], b.data().data() + b_off[bi],
            out.data() + bi * M * P);
  Tensor<S> c(out_shape, std::move(out));

  if (auto* tape = recording_tape<S>({&a, &b})) {
    auto A = a.storage(), B = b.storage(), C = c.storage();
    tape->record({A, B}, C, [A, B, C, M, K, P, a_off, b_off] {
      const auto& gc = C->grad;
      for (std::size_t bi = 0; bi < a_off.size(); ++bi) {
        const S* dc = gc.data() + bi * M * P;
        if (is_tracked(*A))
          gemm_nt(M, P, K, dc, B->data.data() + b_off[bi], A->grad_buffer().data() + a_off[bi]);
        if (is_tracked(*B))
          gemm_tn(M, K, P, A->data.data() + a_off[bi], dc, B->grad_buffer().data() + b_off[bi]);
      }
    });
  }
  return c;
}

template <typename S>
Tensor<S> conv2d(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b, std::size_t stride,
                 std::size_t pad) {
  const auto& xs = x.shape();
  const auto& ws = w.shape();
  if (xs.size() != 4 || ws.size() != 4 || xs[1] != ws[1]) throw ShapeError(op_error("conv2d", xs, ws));
  if (b.rank() != 1 || b.dim(0) != ws[0]) throw ShapeError(op_error("conv2d bias", b.shape(), ws));
  if (stride == 0) throw ShapeError("conv2d: stride must be >= 1");
  const std::size_t N = xs[0], Cin = xs[1], H = xs[2], W = xs[3];
  const std::size_t Cout = ws[0], kh = ws[2], kw = ws[3];
  if (kh > H + 2 * pad || kw > W + 2 * pad)
    throw ShapeError("conv2d: kernel " + shape_str(ws) + " larger than padded input " +
                     shape_str(xs) + " with pad " + std::to_string(pad));
  const std::size_t Ho = (H + 2 * pad - kh) / stride + 1;
  const std::size_t Wo = (W + 2 * pad - kw) / stride + 1;
  const std::size_t rows = Cin * kh * kw;
  const std::size_t cols_n = Ho * Wo;

  // im2col per image, kept for the backward pass when recording.
  std::vector<S> cols(N * rows * cols_n, S(0));
  const S* xd = x.data().data();
  for (std::size_t n = 0; n < N; ++n) {
    S* cn = cols.data() + n * rows * cols_n;
    for (std::size_t c = 0; c < Cin; ++c)
      for (std::size_t ky = 0; ky < kh; ++ky)
        for (std::size_t kx = 0; kx < kw; ++kx) {
          S* row = cn + ((c * kh + ky) * kw + kx) * cols_n;
          for (std::size_t oy = 0; oy < Ho; ++oy) {
            const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(pad);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
            const S* xrow = xd + ((n * Cin + c) * H + static_cast<std::size_t>(iy)) * W;
            for (std::size_t ox = 0; ox < Wo; ++ox) {
              const auto ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(pad);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
              row[oy * Wo + ox] = xrow[ix];
            }
          }
        }
  }

  std::vector<S> out(N * Cout * cols_n);
  for (std::size_t n = 0; n < N; ++n) {
    S* on = out.data() + n * Cout * cols_n;
    for (std::size_t co = 0; co < Cout; ++co) std::fill_n(on + co * cols_n, cols_n, b[co]);
    gemm_nn(Cout, rows, cols_n, w.data().data(), cols.data() + n * rows * cols_n, on);
  }
  Tensor<S> y(Shape{N, Cout, Ho, Wo}, std::move(out));

  if (auto* tape = recording_tape<S>({&x, &w, &b})) {
    auto X = x.storage(), Wt = w.storage(), B = b.storage(), Y = y.storage();
    tape->record({X, Wt, B}, Y,
                 [X, Wt, B, Y, cols = std::move(cols), N, Cin, H, W, Cout, kh, kw, Ho, Wo, stride,
                  pad, rows, cols_n] {
                   const auto& gy = Y->grad;
                   if (is_tracked(*B)) {
                     auto& gb = B->grad_buffer();
                     for (std::size_t n = 0; n < N; ++n)
                       for (std::size_t co = 0; co < Cout; ++co) {
                         const S* g = gy.data() + (n * Cout + co) * cols_n;
                         S acc = 0;
                         for (std::size_t j = 0; j < cols_n; ++j) acc += g[j];
                         gb[co] += acc;
                       }
                   }
                   if (is_tracked(*Wt)) {
                     auto& gw = Wt->grad_buffer();
                     for (std::size_t n = 0; n < N; ++n)
                       gemm_nt(Cout, cols_n, rows, gy.data() + n * Cout * cols_n,
                               cols.data() + n * rows * cols_n, gw.data());
                   }
                   if (is_tracked(*X)) {
                     auto& gx = X->grad_buffer();
                     std::vector<S> dcols(rows * cols_n);
                     for (std::size_t n = 0; n < N; ++n) {
                       std::fill(dcols.begin(), dcols.end(), S(0));
                       gemm_tn(Cout, rows, cols_n, Wt->data.data(), gy.data() + n * Cout * cols_n,
                               dcols.data());
                       for (std::size_t c = 0; c < Cin; ++c)
                         for (std::size_t ky = 0; ky < kh; ++ky)
                           for (std::size_t kx = 0; kx < kw; ++kx) {
                             const S* row = dcols.data() + ((c * kh + ky) * kw + kx) * cols_n;
                             for (std::size_t oy = 0; oy < Ho; ++oy) {
                               const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                               static_cast<std::ptrdiff_t>(pad);
                               if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
                               S* grow = gx.data() + ((n * Cin + c) * H + static_cast<std::size_t>(iy)) * W;
                               for (std::size_t ox = 0; ox < Wo; ++ox) {
                                 const auto ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                                 static_cast<std::ptrdiff_t>(pad);
                                 if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
                                 grow[ix] += row[oy * Wo + ox];
                               }
                             }
                           }
                     }
                   }
                 });
  }
  return y;
}

template <typename S>
Tensor<S> softmax(const Tensor<S>& x, std::size_t axis) {
  check_axis("softmax", x.shape(), axis);
  const auto sp = split_at(x.shape(), axis);
  std::vector<S> out(x.numel());
  auto in = x.data();
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t i = 0; i < sp.inner; ++i) {
      const std::size_t base = o * sp.len * sp.inner + i;
      S mx = in[base];
      for (std::size_t j = 1; j < sp.len; ++j) mx = std::max(mx, in[base + j * sp.inner]);
      S total = 0;
      for (std::size_t j = 0; j < sp.len; ++j) {
        const S e = std::exp(in[base + j * sp.inner] - mx);
        out[base + j * sp.inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < sp.len; ++j) out[base + j * sp.inner] /= total;
    }
  Tensor<S> y(x.shape(), std::move(out));
  if (auto* tape = recording_tape<S>({&x})) {
    auto X = x.storage(), Y = y.storage();
    tape->record({X}, Y, [X, Y, sp] {
      auto& gx = X->grad_buffer();
      const auto& gy = Y->grad;
      const auto& yv = Y->data;
      for (std::size_t o = 0; o < sp.outer; ++o)
        for (std::size_t i = 0; i < sp.inner; ++i) {
          const std::size_t base = o * sp.len * sp.inner + i;
          S dot = 0;
          for (std::size_t j = 0; j < sp.len; ++j) dot += gy[base + j * sp.inner] * yv[base + j * sp.inner];
          for (std::size_t j = 0; j < sp.len; ++j) {
            const std::size_t k = base + j * sp.inner;
            gx[k] += yv[k] * (gy[k] - dot);
          }
        }
    });
  }
  return y;
}

template <typename S>
Tensor<S> layer_norm(const Tensor<S>& x, std::size_t axis, const Tensor<S>& gamma,
                     const Tensor<S>& beta, S eps) {
  check_axis("layer_norm", x.shape(), axis);
  const auto sp = split_at(x.shape(), axis);
  if (gamma.numel() != sp.len || beta.numel() != sp.len)
    throw ShapeError(op_error("layer_norm affine", gamma.shape(), x.shape()));
  std::vector<S> out(x.numel()), xhat(x.numel());
  std::vector<S> rstd(sp.outer * sp.inner);
  auto in = x.data();
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t i = 0; i < sp.inner; ++i) {
      const std::size_t base = o * sp.len * sp.inner + i;
      S mu = 0;
      for (std::size_t j = 0; j < sp.len; ++j) mu += in[base + j * sp.inner];
      mu /= static_cast<S>(sp.len);
      S var = 0;
      for (std::size_t j = 0; j < sp.len; ++j) {
        const S d = in[base + j * sp.inner] - mu;
        var += d * d;
      }
      var /= static_cast<S>(sp.len);
      const S r = S(1) / std::sqrt(var + eps);
      rstd[o * sp.inner + i] = r;
      for (std::size_t j = 0; j < sp.len; ++j) {
        const std::size_t k = base + j * sp.inner;
        xhat[k] = (in[k] - mu) * r;
        out[k] = gamma[j] * xhat[k] + beta[j];
      }
    }
  Tensor<S> y(x.shape(), std::move(out));
  if (auto* tape = recording_tape<S>({&x, &gamma, &beta})) {
    auto X = x.storage(), G = gamma.storage(), B = beta.storage(), Y = y.storage();
    tape->record({X, G, B}, Y,
                 [X, G, B, Y, sp, xhat = std::move(xhat), rstd = std::move(rstd)] {
                   const auto& gy = Y->grad;
                   const bool gx_on = is_tracked(*X);
                   const bool gg_on = is_tracked(*G);
                   const bool gb_on = is_tracked(*B);
                   const S n = static_cast<S>(sp.len);
                   for (std::size_t o = 0; o < sp.outer; ++o)
                     for (std::size_t i = 0; i < sp.inner; ++i) {
                       const std::size_t base = o * sp.len * sp.inner + i;
                       S sum_d = 0, sum_dx = 0;
                       for (std::size_t j = 0; j < sp.len; ++j) {
                         const std::size_t k = base + j * sp.inner;
                         const S d = gy[k] * G->data[j];
                         sum_d += d;
                         sum_dx += d * xhat[k];
                         if (gg_on) G->grad_buffer()[j] += gy[k] * xhat[k];
                         if (gb_on) B->grad_buffer()[j] += gy[k];
                       }
                       if (!gx_on) continue;
                       auto& gx = X->grad_buffer();
                       const S r = rstd[o * sp.inner + i];
                       for (std::size_t j = 0; j < sp.len; ++j) {
                         const std::size_t k = base + j * sp.inner;
                         const S d = gy[k] * G->data[j];
                         gx[k] += r / n * (n * d - sum_d - xhat[k] * sum_dx);
                       }
                     }
                 });
  }
  return y;
}

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.shape() != b.shape()) throw ShapeError(op_error("add", a.shape(), b.shape()));
  std::vector<S> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  Tensor<S> c(a.shape(), std::move(out));
  if (auto* tape = recording_tape<S>({&a, &b})) {
    auto A = a.storage(), B = b.storage(), C = c.storage();
    tape->record({A, B}, C, [A, B, C] {
      for (auto* t : {A.get(), B.get()}) {
        if (!is_tracked(*t)) continue;
        auto& g = t->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += C->grad[i];
      }
    });
  }
  return c;
}

template <typename S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
  return add(a, scale(b, S(-1)));
}

template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.shape() != b.shape()) throw ShapeError(op_error("mul", a.shape(), b.shape()));
  std::vector<S> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  Tensor<S> c(a.shape(), std::move(out));
  if (auto* tape = recording_tape<S>({&a, &b})) {
    auto A = a.storage(), B = b.storage(), C = c.storage();
    tape->record({A, B}, C, [A, B, C] {
      if (is_tracked(*A)) {
        auto& g = A->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += C->grad[i] * B->data[i];
      }
      if (is_tracked(*B)) {
        auto& g = B->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += C->grad[i] * A->data[i];
      }
    });
  }
  return c;
}

template <typename S>
Tensor<S> add_bias(const Tensor<S>& x, const Tensor<S>& bias, std::size_t axis) {
  check_axis("add_bias", x.shape(), axis);
  if (bias.rank() != 1 || bias.dim(0) != x.dim(axis))
    throw ShapeError(op_error("add_bias", x.shape(), bias.shape()));
  const auto sp = split_at(x.shape(), axis);
  std::vector<S> out(x.numel());
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t j = 0; j < sp.len; ++j)
      for (std::size_t i = 0; i < sp.inner; ++i) {
        const std::size_t k = (o * sp.len + j) * sp.inner + i;
        out[k] = x[k] + bias[j];
      }
  Tensor<S> y(x.shape(), std::move(out));
  if (auto* tape = recording_tape<S>({&x, &bias})) {
    auto X = x.storage(), B = bias.storage(), Y = y.storage();
    tape->record({X, B}, Y, [X, B, Y, sp] {
      const auto& gy = Y->grad;
      if (is_tracked(*X)) {
        auto& gx = X->grad_buffer();
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i];
      }
      if (is_tracked(*B)) {
        auto& gb = B->grad_buffer();
        for (std::size_t o = 0; o < sp.outer; ++o)
          for (std::size_t j = 0; j < sp.len; ++j)
            for (std::size_t i = 0; i < sp.inner; ++i) gb[j] += gy[(o * sp.len + j) * sp.inner + i];
      }
    });
  }
  return y;
}

template <typename S>
Tensor<S> scale(const Tensor<S>& x, S factor) {
  return unary(
      x, [factor](S v) { return v * factor; }, [factor](S, S) { return factor; });
}

template <typename S>
Tensor<S> relu(const Tensor<S>& x) {
  return unary(
      x, [](S v) { return v > S(0) ? v : S(0); }, [](S v, S) { return v > S(0) ? S(1) : S(0); });
}

template <typename S>
Tensor<S> gelu(const Tensor<S>& x) {
  return unary(
      x,
      [](S v) { return S(0.5) * v * (S(1) + std::erf(v / std::numbers::sqrt2_v<S>)); },
      [](S v, S) {
        const S cdf = S(0.5) * (S(1) + std::erf(v / std::numbers::sqrt2_v<S>));
        const S pdf = std::exp(S(-0.5) * v * v) * std::numbers::inv_sqrtpi_v<S> / std::numbers::sqrt2_v<S>;
        return cdf + v * pdf;
      });
}

template <typename S>
Tensor<S> reshape(const Tensor<S>& x, Shape shape) {
  if (numel(shape) != x.numel()) throw ShapeError(op_error("reshape", x.shape(), shape));
  Tensor<S> y(std::move(shape), std::vector<S>(x.data().begin(), x.data().end()));
  if (auto* tape = recording_tape<S>({&x})) {
    auto X = x.storage(), Y = y.storage();
    tape->record({X}, Y, [X, Y] {
      auto& gx = X->grad_buffer();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += Y->grad[i];
    });
  }
  return y;
}

template <typename S>
Tensor<S> permute(const Tensor<S>& x, const std::vector<std::size_t>& perm) {
  const auto& xs = x.shape();
  const std::size_t r = xs.size();
  {
    std::vector<bool> seen(r, false);
    bool ok = perm.size() == r;
    for (auto p : perm) {
      if (!ok || p >= r || seen[p]) {
        ok = false;
        break;
      }
      seen[p] = true;
    }
    if (!ok) throw ShapeError("permute: invalid permutation for " + shape_str(xs));
  }
  Shape ys(r);
  std::vector<std::size_t> in_stride(r, 1);
  for (std::size_t i = r; i-- > 1;) in_stride[i - 1] = in_stride[i] * xs[i];
  for (std::size_t i = 0; i < r; ++i) ys[i] = xs[perm[i]];

  // source[k] = input flat index of output element k
  std::vector<std::size_t> source(x.numel());
  std::vector<std::size_t> counter(r, 0);
  for (std::size_t k = 0; k < source.size(); ++k) {
    std::size_t src = 0;
    for (std::size_t i = 0; i < r; ++i) src += counter[i] * in_stride[perm[i]];
    source[k] = src;
    for (std::size_t i = r; i-- > 0;) {
      if (++counter[i] < ys[i]) break;
      counter[i] = 0;
    }
  }
  std::vector<S> out(source.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = x[source[k]];
  Tensor<S> y(ys, std::move(out));
  if (auto* tape = recording_tape<S>({&x})) {
    auto X = x.storage(), Y = y.storage();
    tape->record({X}, Y, [X, Y, source = std::move(source)] {
      auto& gx = X->grad_buffer();
      for (std::size_t k = 0; k < source.size(); ++k) gx[source[k]] += Y->grad[k];
    });
  }
  return y;
}

template <typename S>
Tensor<S> transpose(const Tensor<S>& x, std::size_t axis0, std::size_t axis1) {
  check_axis("transpose", x.shape(), axis0);
  check_axis("transpose", x.shape(), axis1);
  std::vector<std::size_t> perm(x.rank());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::swap(perm[axis0], perm[axis1]);
  return permute(x, perm);
}

template <typename S>
Tensor<S> concat(const std::vector<Tensor<S>>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const auto& first = parts.front().shape();
  check_axis("concat", first, axis);
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const auto& ps = p.shape();
    bool ok = ps.size() == first.size();
    for (std::size_t i = 0; ok && i < ps.size(); ++i) ok = i == axis || ps[i] == first[i];
    if (!ok) throw ShapeError(op_error("concat", first, ps));
    out_shape[axis] += ps[axis];
  }
  const auto sp = split_at(out_shape, axis);
  std::vector<S> out(numel(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const std::size_t chunk = p.dim(axis) * sp.inner;
    for (std::size_t o = 0; o < sp.outer; ++o)
      std::copy_n(p.data().begin() + static_cast<std::ptrdiff_t>(o * chunk), chunk,
                  out.begin() + static_cast<std::ptrdiff_t>(o * sp.len * sp.inner + off * sp.inner));
    off += p.dim(axis);
  }
  Tensor<S> y(out_shape, std::move(out));

  auto* tape = Tape<S>::active();
  bool any = false;
  for (const auto& p : parts) any = any || p.tracked();
  if (tape != nullptr && any) {
    std::vector<StoragePtr<S>> ins;
    for (const auto& p : parts) ins.push_back(p.storage());
    auto Y = y.storage();
    tape->record(ins, Y, [ins, Y, sp, offsets, axis] {
      for (std::size_t pi = 0; pi < ins.size(); ++pi) {
        auto& P = *ins[pi];
        if (!is_tracked(P)) continue;
        auto& g = P.grad_buffer();
        const std::size_t chunk = P.shape[axis] * sp.inner;
        for (std::size_t o = 0; o < sp.outer; ++o) {
          const S* src = Y->grad.data() + o * sp.len * sp.inner + offsets[pi] * sp.inner;
          S* dst = g.data() + o * chunk;
          for (std::size_t j = 0; j < chunk; ++j) dst[j] += src[j];
        }
      }
    });
  }
  return y;
}

template <typename S>
std::vector<Tensor<S>> split(const Tensor<S>& x, std::size_t axis, std::size_t parts) {
  check_axis("split", x.shape(), axis);
  if (parts == 0 || x.dim(axis) % parts != 0)
    throw ShapeError("split: extent " + std::to_string(x.dim(axis)) + " of " + shape_str(x.shape()) +
                     " not divisible into " + std::to_string(parts) + " parts");
  const auto sp = split_at(x.shape(), axis);
  const std::size_t piece = sp.len / parts;
  Shape ps = x.shape();
  ps[axis] = piece;
  std::vector<Tensor<S>> result;
  auto* tape = recording_tape<S>({&x});
  for (std::size_t p = 0; p < parts; ++p) {
    std::vector<S> out(numel(ps));
    const std::size_t chunk = piece * sp.inner;
    for (std::size_t o = 0; o < sp.outer; ++o)
      std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>(o * sp.len * sp.inner + p * chunk), chunk,
                  out.begin() + static_cast<std::ptrdiff_t>(o * chunk));
    Tensor<S> y(ps, std::move(out));
    if (tape != nullptr) {
      auto X = x.storage(), Y = y.storage();
      tape->record({X}, Y, [X, Y, sp, chunk, p] {
        auto& gx = X->grad_buffer();
        for (std::size_t o = 0; o < sp.outer; ++o) {
          S* dst = gx.data() + o * sp.len * sp.inner + p * chunk;
          const S* src = Y->grad.data() + o * chunk;
          for (std::size_t j = 0; j < chunk; ++j) dst[j] += src[j];
        }
      });
    }
    result.push_back(std::move(y));
  }
  return result;
}

template <typename S>
Tensor<S> mean(const Tensor<S>& x, const std::vector<std::size_t>& axes) {
  const auto& xs = x.shape();
  std::vector<bool> reduced(xs.size(), false);
  for (auto a : axes) {
    check_axis("mean", xs, a);
    if (reduced[a]) throw ShapeError("mean: repeated axis " + std::to_string(a));
    reduced[a] = true;
  }
  Shape ys;
  std::size_t count = 1;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (reduced[i])
      count *= xs[i];
    else
      ys.push_back(xs[i]);
  }
  std::vector<std::size_t> target(x.numel());
  std::vector<std::size_t> counter(xs.size(), 0);
  for (std::size_t k = 0; k < target.size(); ++k) {
    std::size_t t = 0;
    for (std::size_t i = 0; i < xs.size(); ++i)
      if (!reduced[i]) t = t * xs[i] + counter[i];
    target[k] = t;
    for (std::size_t i = xs.size(); i-- > 0;) {
      if (++counter[i] < xs[i]) break;
      counter[i] = 0;
    }
  }
  std::vector<S> out(numel(ys), S(0));
  for (std::size_t k = 0; k < target.size(); ++k) out[target[k]] += x[k];
  const S inv = S(1) / static_cast<S>(count);
  for (auto& v : out) v *= inv;
  Tensor<S> y(ys, std::move(out));
  if (auto* tape = recording_tape<S>({&x})) {
    auto X = x.storage(), Y = y.storage();
    tape->record({X}, Y, [X, Y, inv, target = std::move(target)] {
      auto& gx = X->grad_buffer();
      for (std::size_t k = 0; k < target.size(); ++k) gx[k] += Y->grad[target[k]] * inv;
    });
  }
  return y;
}

template <typename S>
Tensor<S> sum(const Tensor<S>& x) {
  S total = 0;
  for (auto v : x.data()) total += v;
  Tensor<S> y = Tensor<S>::scalar(total);
  if (auto* tape = recording_tape<S>({&x})) {
    auto X = x.storage(), Y = y.storage();
    tape->record({X}, Y, [X, Y] {
      auto& gx = X->grad_buffer();
      for (auto& g : gx) g += Y->grad[0];
    });
  }
  return y;
}

template <typename S>
Tensor<S> cross_entropy(const Tensor<S>& logits, std::size_t label) {
  const std::size_t K = logits.numel();
  if (label >= K)
    throw ShapeError("cross_entropy: label " + std::to_string(label) + " out of range for " +
                     shape_str(logits.shape()));
  auto z = logits.data();
  const S mx = *std::max_element(z.begin(), z.end());
  S total = 0;
  for (auto v : z) total += std::exp(v - mx);
  const S lse = mx + std::log(total);
  Tensor<S> loss = Tensor<S>::scalar(lse - z[label]);
  if (auto* tape = recording_tape<S>({&logits})) {
    auto Z = logits.storage(), L = loss.storage();
    tape->record({Z}, L, [Z, L, lse, label] {
      auto& gz = Z->grad_buffer();
      const S g = L->grad[0];
      for (std::size_t k = 0; k < gz.size(); ++k)
        gz[k] += g * (std::exp(Z->data[k] - lse) - (k == label ? S(1) : S(0)));
    });
  }
  return loss;
}

#define VITPAD_INSTANTIATE_OPS(S)                                                                   \
  template Tensor<S> matmul(const Tensor<S>&, const Tensor<S>&);                                   \
  template Tensor<S> conv2d(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, std::size_t,     \
                            std::size_t);                                                          \
  template Tensor<S> softmax(const Tensor<S>&, std::size_t);                                       \
  template Tensor<S> layer_norm(const Tensor<S>&, std::size_t, const Tensor<S>&, const Tensor<S>&, \
                                S);                                                                \
  template Tensor<S> add(const Tensor<S>&, const Tensor<S>&);                                      \
  template Tensor<S> sub(const Tensor<S>&, const Tensor<S>&);                                      \
  template Tensor<S> mul(const Tensor<S>&, const Tensor<S>&);                                      \
  template Tensor<S> add_bias(const Tensor<S>&, const Tensor<S>&, std::size_t);                    \
  template Tensor<S> scale(const Tensor<S>&, S);                                                   \
  template Tensor<S> relu(const Tensor<S>&);                                                       \
  template Tensor<S> gelu(const Tensor<S>&);                                                       \
  template Tensor<S> reshape(const Tensor<S>&, Shape);                                             \
  template Tensor<S> permute(const Tensor<S>&, const std::vector<std::size_t>&);                   \
  template Tensor<S> transpose(const Tensor<S>&, std::size_t, std::size_t);                        \
  template Tensor<S> concat(const std::vector<Tensor<S>>&, std::size_t);                           \
  template std::vector<Tensor<S>> split(const Tensor<S>&, std::size_t, std::size_t);               \
  template Tensor<S> mean(const Tensor<S>&, const std::vector<std::size_t>&);                      \
  template Tensor<S> sum(const Tensor<S>&);                                                        \
  template Tensor<S> cross_entropy(const Tensor<S>&, std::size_t);

VITPAD_INSTANTIATE_OPS(float)
VITPAD_INSTANTIATE_OPS(double)

#undef VITPAD_INSTANTIATE_OPS

}  // namespace vitpad
