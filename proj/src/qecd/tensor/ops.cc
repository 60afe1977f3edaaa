// Copyright 2026 The QECD Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "qecd/tensor/ops.h"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <string>

namespace qecd {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

template <typename T>
ConstMatMap<T> cmap(const T* p, std::size_t rows, std::size_t cols) {
  return ConstMatMap<T>(p, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

template <typename T>
MatMap<T> mmap(T* p, std::size_t rows, std::size_t cols) {
  return MatMap<T>(p, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

std::size_t normalize_axis(int axis, std::size_t rank) {
  int r = static_cast<int>(rank);
  int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for rank " +
                         std::to_string(rank));
  }
  return static_cast<std::size_t>(a);
}

bool is_suffix(const Shape& whole, const Shape& part) {
  if (part.size() > whole.size()) {
    return false;
  }
  return std::equal(part.begin(), part.end(), whole.end() - static_cast<std::ptrdiff_t>(part.size()));
}

template <typename T>
using ArrMap = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>;
template <typename T>
using ConstArrMap = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;

// Vectorized logistic function; exp overflow saturates to 0 or 1 without NaN.
template <typename T>
void sigmoid_into(const T* x, T* s, std::size_t n) {
  const auto e = static_cast<Eigen::Index>(n);
  ArrMap<T>(s, e) = (T(1) + (-ConstArrMap<T>(x, e)).exp()).inverse();
}

// In-place elementwise exp.
template <typename T>
void exp_inplace(T* x, std::size_t n) {
  ArrMap<T> m(x, static_cast<Eigen::Index>(n));
  m = m.exp();
}

template <typename T, typename F, typename G>
Tensor<T> unary(const Tensor<T>& x, F forward, G derivative) {
  Tensor<T> out(x.shape());
  auto xv = x.values();
  auto ov = out.values_mut();
  for (std::size_t i = 0; i < xv.size(); ++i) {
    ov[i] = forward(xv[i]);
  }
  record_op<T>(out, {x}, [xs = x.storage(), os = out.storage(), derivative] {
    T* gx = grad_target(xs);
    if (gx == nullptr) {
      return;
    }
    const auto& g = os->grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      gx[i] += g[i] * derivative(xs->value[i], os->value[i]);
    }
  });
  return out;
}

template <typename T>
T stable_sigmoid(T x) {
  if (x >= T(0)) {
    return T(1) / (T(1) + std::exp(-x));
  }
  T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
T stable_softplus(T x) {
  return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& x, const Tensor<T>& w) {
  if (w.rank() != 2 || x.rank() < 1 || x.dim(-1) != w.dim(0)) {
    throw DimensionError("matmul: inner dimensions disagree: x " + shape_str(x.shape()) +
                         " vs w " + shape_str(w.shape()));
  }
  std::size_t in = w.dim(0);
  std::size_t outd = w.dim(1);
  std::size_t rows = x.numel() / in;
  Shape shape = x.shape();
  shape.back() = outd;
  Tensor<T> out(shape);
  mmap(out.values_mut().data(), rows, outd).noalias() =
      cmap(x.values().data(), rows, in) * cmap(w.values().data(), in, outd);
  record_op<T>(out, {x, w}, [xs = x.storage(), ws = w.storage(), os = out.storage(), rows, in, outd] {
    auto g = cmap(os->grad.data(), rows, outd);
    if (T* gx = grad_target(xs)) {
      mmap(gx, rows, in).noalias() += g * cmap(ws->value.data(), in, outd).transpose();
    }
    if (T* gw = grad_target(ws)) {
      mmap(gw, in, outd).noalias() += cmap(xs->value.data(), rows, in).transpose() * g;
    }
  });
  return out;
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  if (b.rank() != 1 || w.rank() != 2 || b.dim(0) != w.dim(1)) {
    throw DimensionError("linear: bias " + shape_str(b.shape()) + " does not match weight " +
                         shape_str(w.shape()));
  }
  return add(matmul(x, w), b);
}

template <typename T>
Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b, bool transpose_b) {
  if (a.rank() < 2 || a.rank() != b.rank() ||
      !std::equal(a.shape().begin(), a.shape().end() - 2, b.shape().begin())) {
    throw DimensionError("bmm: batch shapes disagree: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  std::size_t n = a.dim(-2);
  std::size_t k = a.dim(-1);
  std::size_t bk = transpose_b ? b.dim(-1) : b.dim(-2);
  std::size_t m = transpose_b ? b.dim(-2) : b.dim(-1);
  if (bk != k) {
    throw DimensionError("bmm: inner dimensions disagree: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()) + (transpose_b ? " (transposed)" : ""));
  }
  std::size_t batch = a.numel() / (n * k);
  Shape shape = a.shape();
  shape.back() = m;
  Tensor<T> out(shape);
  const T* av = a.values().data();
  const T* bv = b.values().data();
  T* ov = out.values_mut().data();
  for (std::size_t i = 0; i < batch; ++i) {
    auto am = cmap(av + i * n * k, n, k);
    if (transpose_b) {
      mmap(ov + i * n * m, n, m).noalias() = am * cmap(bv + i * m * k, m, k).transpose();
    } else {
      mmap(ov + i * n * m, n, m).noalias() = am * cmap(bv + i * k * m, k, m);
    }
  }
  record_op<T>(out, {a, b},
               [as = a.storage(), bs = b.storage(), os = out.storage(), batch, n, k, m, transpose_b] {
                 T* ga = grad_target(as);
                 T* gb = grad_target(bs);
                 for (std::size_t i = 0; i < batch; ++i) {
                   auto g = cmap(os->grad.data() + i * n * m, n, m);
                   if (transpose_b) {
                     auto bm = cmap(bs->value.data() + i * m * k, m, k);
                     if (ga) mmap(ga + i * n * k, n, k).noalias() += g * bm;
                     if (gb) {
                       mmap(gb + i * m * k, m, k).noalias() +=
                           g.transpose() * cmap(as->value.data() + i * n * k, n, k);
                     }
                   } else {
                     auto bm = cmap(bs->value.data() + i * k * m, k, m);
                     if (ga) mmap(ga + i * n * k, n, k).noalias() += g * bm.transpose();
                     if (gb) {
                       mmap(gb + i * k * m, k, m).noalias() +=
                           cmap(as->value.data() + i * n * k, n, k).transpose() * g;
                     }
                   }
                 }
               });
  return out;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  if (!is_suffix(a.shape(), b.shape())) {
    throw DimensionError("add: shape " + shape_str(b.shape()) + " does not broadcast onto " +
                         shape_str(a.shape()));
  }
  std::size_t inner = b.numel();
  std::size_t outer = inner == 0 ? 0 : a.numel() / inner;
  Tensor<T> out(a.shape());
  auto av = a.values();
  auto bv = b.values();
  auto ov = out.values_mut();
  for (std::size_t i = 0; i < outer; ++i) {
    for (std::size_t j = 0; j < inner; ++j) {
      ov[i * inner + j] = av[i * inner + j] + bv[j];
    }
  }
  record_op<T>(out, {a, b}, [as = a.storage(), bs = b.storage(), os = out.storage(), outer, inner] {
    const auto& g = os->grad;
    if (T* ga = grad_target(as)) {
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (T* gb = grad_target(bs)) {
      for (std::size_t i = 0; i < outer; ++i) {
        for (std::size_t j = 0; j < inner; ++j) gb[j] += g[i * inner + j];
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  if (!is_suffix(a.shape(), b.shape())) {
    throw DimensionError("mul: shape " + shape_str(b.shape()) + " does not broadcast onto " +
                         shape_str(a.shape()));
  }
  std::size_t inner = b.numel();
  std::size_t outer = inner == 0 ? 0 : a.numel() / inner;
  Tensor<T> out(a.shape());
  auto av = a.values();
  auto bv = b.values();
  auto ov = out.values_mut();
  for (std::size_t i = 0; i < outer; ++i) {
    for (std::size_t j = 0; j < inner; ++j) {
      ov[i * inner + j] = av[i * inner + j] * bv[j];
    }
  }
  record_op<T>(out, {a, b}, [as = a.storage(), bs = b.storage(), os = out.storage(), outer, inner] {
    const auto& g = os->grad;
    if (T* ga = grad_target(as)) {
      for (std::size_t i = 0; i < outer; ++i) {
        for (std::size_t j = 0; j < inner; ++j) ga[i * inner + j] += g[i * inner + j] * bs->value[j];
      }
    }
    if (T* gb = grad_target(bs)) {
      for (std::size_t i = 0; i < outer; ++i) {
        for (std::size_t j = 0; j < inner; ++j) gb[j] += g[i * inner + j] * as->value[i * inner + j];
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  return unary<T>(
      a, [factor](T x) { return x * factor; }, [factor](T, T) { return factor; });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  sigmoid_into(x.values().data(), out.values_mut().data(), x.numel());
  record_op<T>(out, {x}, [xs = x.storage(), os = out.storage()] {
    T* gx = grad_target(xs);
    if (gx == nullptr) return;
    const auto n = static_cast<Eigen::Index>(os->value.size());
    ConstArrMap<T> y(os->value.data(), n);
    ArrMap<T>(gx, n) += ConstArrMap<T>(os->grad.data(), n) * y * (T(1) - y);
  });
  return out;
}

template <typename T>
Tensor<T> silu(const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  const std::size_t n = x.numel();
  AlignedVector<T> sig(n);
  sigmoid_into(x.values().data(), sig.data(), n);
  const auto e = static_cast<Eigen::Index>(n);
  ArrMap<T>(out.values_mut().data(), e) = ConstArrMap<T>(x.values().data(), e) * ConstArrMap<T>(sig.data(), e);
  if (Tape<T>::current() == nullptr || !x.requires_grad()) return out;
  record_op<T>(out, {x}, [xs = x.storage(), os = out.storage(), sig = std::move(sig)] {
    T* gx = grad_target(xs);
    if (gx == nullptr) return;
    const auto n = static_cast<Eigen::Index>(sig.size());
    ConstArrMap<T> s(sig.data(), n);
    ConstArrMap<T> v(xs->value.data(), n);
    ArrMap<T>(gx, n) += ConstArrMap<T>(os->grad.data(), n) * s * (T(1) + v * (T(1) - s));
  });
  return out;
}

template <typename T>
Tensor<T> softplus(const Tensor<T>& x) {
  return unary<T>(
      x, [](T v) { return stable_softplus(v); }, [](T v, T) { return stable_sigmoid(v); });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& x) {
  return unary<T>(
      x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis) {
  std::size_t ax = normalize_axis(axis, x.rank());
  std::size_t n = x.shape()[ax];
  std::size_t inner = 1;
  for (std::size_t i = ax + 1; i < x.rank(); ++i) inner *= x.shape()[i];
  std::size_t outer = n == 0 ? 0 : x.numel() / (n * inner);
  Tensor<T> out(x.shape());
  auto xv = x.values();
  auto ov = out.values_mut();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      std::size_t base = o * n * inner + i;
      T mx = xv[base];
      for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, xv[base + j * inner]);
      T total = 0;
      for (std::size_t j = 0; j < n; ++j) {
        T e = std::exp(xv[base + j * inner] - mx);
        ov[base + j * inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < n; ++j) ov[base + j * inner] /= total;
    }
  }
  record_op<T>(out, {x}, [xs = x.storage(), os = out.storage(), outer, inner, n] {
    T* gx = grad_target(xs);
    if (gx == nullptr) return;
    const auto& g = os->grad;
    const auto& y = os->value;
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t i = 0; i < inner; ++i) {
        std::size_t base = o * n * inner + i;
        T dot = 0;
        for (std::size_t j = 0; j < n; ++j) dot += g[base + j * inner] * y[base + j * inner];
        for (std::size_t j = 0; j < n; ++j) {
          std::size_t idx = base + j * inner;
          gx[idx] += y[idx] * (g[idx] - dot);
        }
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps) {
  std::size_t f = x.dim(-1);
  if (gain.shape() != Shape{f} || bias.shape() != Shape{f}) {
    throw DimensionError("layer_norm: gain " + shape_str(gain.shape()) + " / bias " +
                         shape_str(bias.shape()) + " do not match input " + shape_str(x.shape()));
  }
  std::size_t rows = x.numel() / f;
  Tensor<T> out(x.shape());
  AlignedVector<T> xhat(x.numel());
  AlignedVector<T> inv_std(rows);
  auto xv = x.values();
  auto ov = out.values_mut();
  auto gv = gain.values();
  auto bv = bias.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = xv.data() + r * f;
    T mean = 0;
    for (std::size_t j = 0; j < f; ++j) mean += row[j];
    mean /= T(f);
    T var = 0;
    for (std::size_t j = 0; j < f; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= T(f);
    T inv = T(1) / std::sqrt(var + eps);
    inv_std[r] = inv;
    for (std::size_t j = 0; j < f; ++j) {
      T h = (row[j] - mean) * inv;
      xhat[r * f + j] = h;
      ov[r * f + j] = h * gv[j] + bv[j];
    }
  }
  record_op<T>(out, {x, gain, bias},
               [xs = x.storage(), gs = gain.storage(), bs = bias.storage(), os = out.storage(),
                xhat = std::move(xhat), inv_std = std::move(inv_std), rows, f] {
                 const auto& g = os->grad;
                 T* gx = grad_target(xs);
                 T* gg = grad_target(gs);
                 T* gb = grad_target(bs);
                 AlignedVector<T> gh(f);
                 for (std::size_t r = 0; r < rows; ++r) {
                   T mean_gh = 0;
                   T mean_ghx = 0;
                   for (std::size_t j = 0; j < f; ++j) {
                     T gij = g[r * f + j];
                     if (gg) gg[j] += gij * xhat[r * f + j];
                     if (gb) gb[j] += gij;
                     gh[j] = gij * gs->value[j];
                     mean_gh += gh[j];
                     mean_ghx += gh[j] * xhat[r * f + j];
                   }
                   if (gx == nullptr) continue;
                   mean_gh /= T(f);
                   mean_ghx /= T(f);
                   for (std::size_t j = 0; j < f; ++j) {
                     gx[r * f + j] += inv_std[r] * (gh[j] - mean_gh - xhat[r * f + j] * mean_ghx);
                   }
                 }
               });
  return out;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                         shape_str(shape));
  }
  Tensor<T> out(std::move(shape), std::vector<T>(x.values().begin(), x.values().end()));
  record_op<T>(out, {x}, [xs = x.storage(), os = out.storage()] {
    if (T* gx = grad_target(xs)) {
      for (std::size_t i = 0; i < os->grad.size(); ++i) gx[i] += os->grad[i];
    }
  });
  return out;
}

template <typename T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<std::size_t>& perm) {
  std::size_t r = x.rank();
  std::vector<std::size_t> check = perm;
  std::sort(check.begin(), check.end());
  for (std::size_t i = 0; i < check.size(); ++i) {
    if (check.size() != r || check[i] != i) {
      throw DimensionError("permute: invalid permutation for shape " + shape_str(x.shape()));
    }
  }
  Shape shape(r);
  for (std::size_t i = 0; i < r; ++i) shape[i] = x.shape()[perm[i]];
  // When the last axis stays in place, whole rows move together; the index map
  // then addresses rows of length `chunk` instead of single elements.
  const bool keep_last = r > 0 && perm[r - 1] == r - 1;
  const std::size_t chunk = keep_last ? x.shape()[r - 1] : 1;
  const std::size_t vr = keep_last ? r - 1 : r;
  std::vector<std::size_t> in_strides(vr, 1);
  for (std::size_t i = vr; i-- > 1;) in_strides[i - 1] = in_strides[i] * x.shape()[i];
  // map[out_row] = in_row
  std::vector<std::size_t> map(chunk == 0 ? 0 : x.numel() / chunk);
  std::vector<std::size_t> idx(vr, 0);
  for (std::size_t o = 0; o < map.size(); ++o) {
    std::size_t src = 0;
    for (std::size_t i = 0; i < vr; ++i) src += idx[i] * in_strides[perm[i]];
    map[o] = src;
    for (std::size_t i = vr; i-- > 0;) {
      if (++idx[i] < shape[i]) break;
      idx[i] = 0;
    }
  }
  Tensor<T> out(shape);
  const T* xv = x.values().data();
  T* ov = out.values_mut().data();
  for (std::size_t o = 0; o < map.size(); ++o) std::copy_n(xv + map[o] * chunk, chunk, ov + o * chunk);
  record_op<T>(out, {x}, [xs = x.storage(), os = out.storage(), map = std::move(map), chunk] {
    if (T* gx = grad_target(xs)) {
      for (std::size_t o = 0; o < map.size(); ++o) {
        T* dst = gx + map[o] * chunk;
        const T* src = os->grad.data() + o * chunk;
        for (std::size_t c = 0; c < chunk; ++c) dst[c] += src[c];
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> narrow(const Tensor<T>& x, std::size_t start, std::size_t length) {
  std::size_t f = x.dim(-1);
  if (start + length > f) {
    throw DimensionError("narrow: range [" + std::to_string(start) + ", " +
                         std::to_string(start + length) + ") exceeds " + shape_str(x.shape()));
  }
  std::size_t rows = x.numel() / f;
  Shape shape = x.shape();
  shape.back() = length;
  Tensor<T> out(shape);
  auto xv = x.values();
  auto ov = out.values_mut();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(xv.data() + r * f + start, length, ov.data() + r * length);
  }
  record_op<T>(out, {x}, [xs = x.storage(), os = out.storage(), rows, f, start, length] {
    if (T* gx = grad_target(xs)) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < length; ++j) gx[r * f + start + j] += os->grad[r * length + j];
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> concat_last(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != b.rank() || a.rank() == 0 ||
      !std::equal(a.shape().begin(), a.shape().end() - 1, b.shape().begin())) {
    throw DimensionError("concat_last: leading shapes disagree: " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  }
  std::size_t fa = a.dim(-1);
  std::size_t fb = b.dim(-1);
  std::size_t rows = a.numel() / std::max<std::size_t>(fa, 1);
  if (fa == 0) rows = b.numel() / std::max<std::size_t>(fb, 1);
  Shape shape = a.shape();
  shape.back() = fa + fb;
  Tensor<T> out(shape);
  auto ov = out.values_mut();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(a.values().data() + r * fa, fa, ov.data() + r * (fa + fb));
    std::copy_n(b.values().data() + r * fb, fb, ov.data() + r * (fa + fb) + fa);
  }
  record_op<T>(out, {a, b}, [as = a.storage(), bs = b.storage(), os = out.storage(), rows, fa, fb] {
    T* ga = grad_target(as);
    T* gb = grad_target(bs);
    for (std::size_t r = 0; r < rows; ++r) {
      const T* g = os->grad.data() + r * (fa + fb);
      if (ga) for (std::size_t j = 0; j < fa; ++j) ga[r * fa + j] += g[j];
      if (gb) for (std::size_t j = 0; j < fb; ++j) gb[r * fb + j] += g[fa + j];
    }
  });
  return out;
}

template <typename T>
Tensor<T> mean_axis(const Tensor<T>& x, int axis) {
  std::size_t ax = normalize_axis(axis, x.rank());
  std::size_t n = x.shape()[ax];
  if (n == 0) {
    throw DimensionError("mean_axis: empty axis in " + shape_str(x.shape()));
  }
  std::size_t inner = 1;
  for (std::size_t i = ax + 1; i < x.rank(); ++i) inner *= x.shape()[i];
  std::size_t outer = x.numel() / (n * inner);
  Shape shape = x.shape();
  shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(ax));
  Tensor<T> out(shape);
  auto xv = x.values();
  auto ov = out.values_mut();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < inner; ++i) ov[o * inner + i] += xv[(o * n + j) * inner + i];
    }
    for (std::size_t i = 0; i < inner; ++i) ov[o * inner + i] /= T(n);
  }
  record_op<T>(out, {x}, [xs = x.storage(), os = out.storage(), outer, inner, n] {
    if (T* gx = grad_target(xs)) {
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t j = 0; j < n; ++j) {
          for (std::size_t i = 0; i < inner; ++i) {
            gx[(o * n + j) * inner + i] += os->grad[o * inner + i] / T(n);
          }
        }
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> sum_all(const Tensor<T>& x) {
  T total = 0;
  for (T v : x.values()) total += v;
  Tensor<T> out = Tensor<T>::scalar(total);
  record_op<T>(out, {x}, [xs = x.storage(), os = out.storage()] {
    if (T* gx = grad_target(xs)) {
      for (std::size_t i = 0; i < xs->value.size(); ++i) gx[i] += os->grad[0];
    }
  });
  return out;
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& x) {
  if (x.numel() == 0) {
    throw DimensionError("mean_all: empty tensor");
  }
  return scale(sum_all(x), T(1) / T(x.numel()));
}

template <typename T>
Tensor<T> scaled_dot_product_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                                       std::span<const std::uint8_t> mask, Tensor<T>* weights) {
  if (q.rank() < 2 || q.shape() != k.shape() || q.shape() != v.shape()) {
    throw DimensionError("attention: q " + shape_str(q.shape()) + ", k " + shape_str(k.shape()) +
                         ", v " + shape_str(v.shape()) + " must share one shape");
  }
  std::size_t n = q.dim(-2);
  std::size_t dh = q.dim(-1);
  if (n == 0) {
    throw DimensionError("attention: empty sequence");
  }
  if (dh == 0) {
    throw DimensionError("attention: head dimension must be >= 1");
  }
  Tensor<T> scores = scale(bmm(q, k, /*transpose_b=*/true), T(1) / std::sqrt(T(dh)));
  if (!mask.empty()) {
    if (mask.size() != n * n) {
      throw DimensionError("attention: mask has " + std::to_string(mask.size()) +
                           " entries, expected " + std::to_string(n * n));
    }
    std::vector<T> penalty(n * n, T(0));
    for (std::size_t i = 0; i < n * n; ++i) {
      if (mask[i] != 0) penalty[i] = T(-1e9);
    }
    scores = add(scores, Tensor<T>(Shape{n, n}, std::move(penalty)));
  }
  Tensor<T> probs = softmax(scores, -1);
  if (weights != nullptr) {
    *weights = probs;
  }
  return bmm(probs, v, /*transpose_b=*/false);
}

template <typename T>
Tensor<T> conv2d_dilated(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias,
                         int dilation) {
  if (dilation < 1) {
    throw ParameterError("conv2d_dilated: dilation must be >= 1, got " + std::to_string(dilation));
  }
  if (x.rank() != 4 || kernel.rank() != 4 || kernel.dim(0) != 3 || kernel.dim(1) != 3 ||
      kernel.dim(2) != x.dim(3)) {
    throw DimensionError("conv2d_dilated: input " + shape_str(x.shape()) +
                         " incompatible with kernel " + shape_str(kernel.shape()));
  }
  std::size_t batch = x.dim(0);
  std::size_t h = x.dim(1);
  std::size_t w = x.dim(2);
  std::size_t cin = x.dim(3);
  std::size_t cout = kernel.dim(3);
  if (h == 0 || w == 0) {
    throw DimensionError("conv2d_dilated: empty spatial extent " + shape_str(x.shape()));
  }
  if (bias.defined() && bias.shape() != Shape{cout}) {
    throw DimensionError("conv2d_dilated: bias " + shape_str(bias.shape()) + " vs " +
                         std::to_string(cout) + " output channels");
  }
  std::size_t pixels = batch * h * w;
  std::size_t patch = 9 * cin;
  // im2col buffer; taps that fall outside the grid are zeroed explicitly.
  std::shared_ptr<T[]> col = aligned_scratch<T>(pixels * patch);
  auto xv = x.values();
  const int dil = dilation;
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t xx = 0; xx < w; ++xx) {
        T* dst = col.get() + ((b * h + y) * w + xx) * patch;
        for (int ky = 0; ky < 3; ++ky) {
          long sy = static_cast<long>(y) + (ky - 1) * dil;
          const bool row_in = sy >= 0 && sy < static_cast<long>(h);
          for (int kx = 0; kx < 3; ++kx) {
            long sx = static_cast<long>(xx) + (kx - 1) * dil;
            if (!row_in || sx < 0 || sx >= static_cast<long>(w)) {
              std::fill_n(dst + static_cast<std::size_t>(ky * 3 + kx) * cin, cin, T(0));
              continue;
            }
            const T* src = xv.data() + ((b * h + static_cast<std::size_t>(sy)) * w +
                                        static_cast<std::size_t>(sx)) * cin;
            std::copy_n(src, cin, dst + static_cast<std::size_t>(ky * 3 + kx) * cin);
          }
        }
      }
    }
  }
  Tensor<T> out(Shape{batch, h, w, cout});
  auto om = mmap(out.values_mut().data(), pixels, cout);
  om.noalias() = cmap(col.get(), pixels, patch) * cmap(kernel.values().data(), patch, cout);
  if (bias.defined()) {
    om.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(
        bias.values().data(), static_cast<Eigen::Index>(cout));
  }
  std::vector<Tensor<T>> inputs{x, kernel};
  if (bias.defined()) inputs.push_back(bias);
  StoragePtr<T> bs = bias.defined() ? bias.storage() : nullptr;
  record_op<T>(out, std::move(inputs),
               [xs = x.storage(), ks = kernel.storage(), bs, os = out.storage(), col, batch, h, w,
                cin, cout, pixels, patch, dil] {
                 auto g = cmap(os->grad.data(), pixels, cout);
                 if (T* gk = grad_target(ks)) {
                   mmap(gk, patch, cout).noalias() += cmap(col.get(), pixels, patch).transpose() * g;
                 }
                 if (bs) {
                   if (T* gb = grad_target(bs)) {
                     for (std::size_t p = 0; p < pixels; ++p) {
                       for (std::size_t c = 0; c < cout; ++c) gb[c] += os->grad[p * cout + c];
                     }
                   }
                 }
                 T* gx = grad_target(xs);
                 if (gx == nullptr) return;
                 std::shared_ptr<T[]> gcol = aligned_scratch<T>(pixels * patch);
                 mmap(gcol.get(), pixels, patch).noalias() =
                     g * cmap(ks->value.data(), patch, cout).transpose();
                 for (std::size_t b = 0; b < batch; ++b) {
                   for (std::size_t y = 0; y < h; ++y) {
                     for (std::size_t xx = 0; xx < w; ++xx) {
                       const T* src = gcol.get() + ((b * h + y) * w + xx) * patch;
                       for (int ky = 0; ky < 3; ++ky) {
                         long sy = static_cast<long>(y) + (ky - 1) * dil;
                         if (sy < 0 || sy >= static_cast<long>(h)) continue;
                         for (int kx = 0; kx < 3; ++kx) {
                           long sx = static_cast<long>(xx) + (kx - 1) * dil;
                           if (sx < 0 || sx >= static_cast<long>(w)) continue;
                           T* dst = gx + ((b * h + static_cast<std::size_t>(sy)) * w +
                                          static_cast<std::size_t>(sx)) * cin;
                           const T* s = src + static_cast<std::size_t>(ky * 3 + kx) * cin;
                           for (std::size_t c = 0; c < cin; ++c) dst[c] += s[c];
                         }
                       }
                     }
                   }
                 }
               });
  return out;
}

template <typename T>
Tensor<T> scatter_rows(const Tensor<T>& x, std::span<const std::size_t> index,
                       std::size_t num_rows_out) {
  if (x.rank() != 3 || x.dim(1) != index.size()) {
    throw DimensionError("scatter_rows: input " + shape_str(x.shape()) + " vs index of size " +
                         std::to_string(index.size()));
  }
  std::size_t batch = x.dim(0);
  std::size_t rows = x.dim(1);
  std::size_t c = x.dim(2);
  std::vector<std::size_t> idx(index.begin(), index.end());
  for (std::size_t r : idx) {
    if (r >= num_rows_out) {
      throw DimensionError("scatter_rows: index " + std::to_string(r) + " out of range " +
                           std::to_string(num_rows_out));
    }
  }
  Tensor<T> out(Shape{batch, num_rows_out, c});
  auto xv = x.values();
  auto ov = out.values_mut();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(xv.data() + (b * rows + r) * c, c, ov.data() + (b * num_rows_out + idx[r]) * c);
    }
  }
  record_op<T>(out, {x}, [xs = x.storage(), os = out.storage(), idx, batch, rows, c, num_rows_out] {
    if (T* gx = grad_target(xs)) {
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t r = 0; r < rows; ++r) {
          const T* g = os->grad.data() + (b * num_rows_out + idx[r]) * c;
          for (std::size_t j = 0; j < c; ++j) gx[(b * rows + r) * c + j] += g[j];
        }
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, std::span<const std::size_t> index) {
  if (x.rank() != 3) {
    throw DimensionError("gather_rows: expected rank-3 input, got " + shape_str(x.shape()));
  }
  std::size_t batch = x.dim(0);
  std::size_t rows_in = x.dim(1);
  std::size_t c = x.dim(2);
  std::vector<std::size_t> idx(index.begin(), index.end());
  for (std::size_t r : idx) {
    if (r >= rows_in) {
      throw DimensionError("gather_rows: index " + std::to_string(r) + " out of range for " +
                           shape_str(x.shape()));
    }
  }
  std::size_t rows = idx.size();
  Tensor<T> out(Shape{batch, rows, c});
  auto xv = x.values();
  auto ov = out.values_mut();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(xv.data() + (b * rows_in + idx[r]) * c, c, ov.data() + (b * rows + r) * c);
    }
  }
  record_op<T>(out, {x}, [xs = x.storage(), os = out.storage(), idx, batch, rows, rows_in, c] {
    if (T* gx = grad_target(xs)) {
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t r = 0; r < rows; ++r) {
          T* dst = gx + (b * rows_in + idx[r]) * c;
          const T* g = os->grad.data() + (b * rows + r) * c;
          for (std::size_t j = 0; j < c; ++j) dst[j] += g[j];
        }
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> causal_depthwise_conv1d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias) {
  if (x.rank() != 3 || w.rank() != 2 || w.dim(1) != x.dim(2) || bias.shape() != Shape{x.dim(2)}) {
    throw DimensionError("causal_depthwise_conv1d: input " + shape_str(x.shape()) + ", weight " +
                         shape_str(w.shape()) + ", bias " + shape_str(bias.shape()));
  }
  std::size_t batch = x.dim(0);
  std::size_t len = x.dim(1);
  std::size_t c = x.dim(2);
  std::size_t kw = w.dim(0);
  Tensor<T> out(x.shape());
  auto xv = x.values();
  auto wv = w.values();
  auto bv = bias.values();
  auto ov = out.values_mut();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < len; ++t) {
      T* o = ov.data() + (b * len + t) * c;
      for (std::size_t j = 0; j < c; ++j) o[j] = bv[j];
      for (std::size_t k = 0; k < kw; ++k) {
        long src = static_cast<long>(t) - static_cast<long>(kw - 1) + static_cast<long>(k);
        if (src < 0) continue;
        const T* xi = xv.data() + (b * len + static_cast<std::size_t>(src)) * c;
        for (std::size_t j = 0; j < c; ++j) o[j] += wv[k * c + j] * xi[j];
      }
    }
  }
  record_op<T>(out, {x, w, bias},
               [xs = x.storage(), ws = w.storage(), bs = bias.storage(), os = out.storage(), batch,
                len, c, kw] {
                 T* gx = grad_target(xs);
                 T* gw = grad_target(ws);
                 T* gb = grad_target(bs);
                 for (std::size_t b = 0; b < batch; ++b) {
                   for (std::size_t t = 0; t < len; ++t) {
                     const T* g = os->grad.data() + (b * len + t) * c;
                     if (gb) for (std::size_t j = 0; j < c; ++j) gb[j] += g[j];
                     for (std::size_t k = 0; k < kw; ++k) {
                       long src = static_cast<long>(t) - static_cast<long>(kw - 1) + static_cast<long>(k);
                       if (src < 0) continue;
                       std::size_t si = (b * len + static_cast<std::size_t>(src)) * c;
                       for (std::size_t j = 0; j < c; ++j) {
                         if (gw) gw[k * c + j] += g[j] * xs->value[si + j];
                         if (gx) gx[si + j] += g[j] * ws->value[k * c + j];
                       }
                     }
                   }
                 }
               });
  return out;
}

template <typename T>
Tensor<T> selective_scan(const Tensor<T>& u, const Tensor<T>& delta, const Tensor<T>& a,
                         const Tensor<T>& b, const Tensor<T>& c, const Tensor<T>& d) {
  if (u.rank() != 3 || delta.shape() != u.shape() || a.rank() != 2 || a.dim(0) != u.dim(2) ||
      b.rank() != 3 || b.dim(0) != u.dim(0) || b.dim(1) != u.dim(1) || b.dim(2) != a.dim(1) ||
      c.shape() != b.shape() || d.shape() != Shape{u.dim(2)}) {
    throw DimensionError("selective_scan: u " + shape_str(u.shape()) + ", delta " +
                         shape_str(delta.shape()) + ", A " + shape_str(a.shape()) + ", B " +
                         shape_str(b.shape()) + ", C " + shape_str(c.shape()) + ", D " +
                         shape_str(d.shape()));
  }
  const std::size_t batch = u.dim(0);
  const std::size_t len = u.dim(1);
  const std::size_t ch = u.dim(2);
  const std::size_t ns = a.dim(1);
  Tensor<T> out(u.shape());
  const bool tracking = Tape<T>::current() != nullptr &&
                        (u.requires_grad() || delta.requires_grad() || a.requires_grad() ||
                         b.requires_grad() || c.requires_grad() || d.requires_grad());
  // States h_t for every (b, t), kept only when a backward pass will need them.
  AlignedVector<T> states(tracking ? batch * len * ch * ns : 0);
  AlignedVector<T> h(ch * ns);
  AlignedVector<T> decay(ch * ns);
  auto uv = u.values();
  auto dv = delta.values();
  auto av = a.values();
  auto bv = b.values();
  auto cv = c.values();
  auto skip = d.values();
  auto ov = out.values_mut();
  for (std::size_t bi = 0; bi < batch; ++bi) {
    std::fill(h.begin(), h.end(), T(0));
    for (std::size_t t = 0; t < len; ++t) {
      const std::size_t row = bi * len + t;
      const T* bt = bv.data() + row * ns;
      const T* ct = cv.data() + row * ns;
      for (std::size_t j = 0; j < ch; ++j) {
        for (std::size_t n = 0; n < ns; ++n) decay[j * ns + n] = dv[row * ch + j] * av[j * ns + n];
      }
      exp_inplace(decay.data(), decay.size());
      for (std::size_t j = 0; j < ch; ++j) {
        const T x = uv[row * ch + j];
        const T dt = dv[row * ch + j];
        T* hj = h.data() + j * ns;
        const T* dj = decay.data() + j * ns;
        T y = 0;
        for (std::size_t n = 0; n < ns; ++n) {
          hj[n] = dj[n] * hj[n] + dt * bt[n] * x;
          y += ct[n] * hj[n];
        }
        ov[row * ch + j] = y + skip[j] * x;
      }
      if (tracking) {
        std::copy(h.begin(), h.end(), states.begin() + static_cast<std::ptrdiff_t>(row * ch * ns));
      }
    }
  }
  if (tracking) {
    record_op<T>(
        out, {u, delta, a, b, c, d},
        [us = u.storage(), ds = delta.storage(), as = a.storage(), bs = b.storage(),
         cs = c.storage(), ks = d.storage(), os = out.storage(), states = std::move(states), batch,
         len, ch, ns] {
          T* gu = grad_target(us);
          T* gd = grad_target(ds);
          T* ga = grad_target(as);
          T* gb = grad_target(bs);
          T* gc = grad_target(cs);
          T* gk = grad_target(ks);
          const auto& uv = us->value;
          const auto& dv = ds->value;
          const auto& av = as->value;
          const auto& bv = bs->value;
          const auto& cv = cs->value;
          const auto& skip = ks->value;
          const auto& g = os->grad;
          AlignedVector<T> gh(ch * ns);
          AlignedVector<T> decay(ch * ns);
          for (std::size_t bi = 0; bi < batch; ++bi) {
            std::fill(gh.begin(), gh.end(), T(0));
            for (std::size_t t = len; t-- > 0;) {
              const std::size_t row = bi * len + t;
              const T* ht = states.data() + row * ch * ns;
              const T* hp = t > 0 ? states.data() + (row - 1) * ch * ns : nullptr;
              const T* bt = bv.data() + row * ns;
              const T* ct = cv.data() + row * ns;
              for (std::size_t j = 0; j < ch; ++j) {
                for (std::size_t n = 0; n < ns; ++n) decay[j * ns + n] = dv[row * ch + j] * av[j * ns + n];
              }
              exp_inplace(decay.data(), decay.size());
              for (std::size_t j = 0; j < ch; ++j) {
                const T gy = g[row * ch + j];
                const T x = uv[row * ch + j];
                const T dt = dv[row * ch + j];
                if (gk) gk[j] += gy * x;
                T gx = gy * skip[j];
                T gdt = 0;
                T* ghj = gh.data() + j * ns;
                const T* aj = av.data() + j * ns;
                for (std::size_t n = 0; n < ns; ++n) {
                  const std::size_t jn = j * ns + n;
                  ghj[n] += ct[n] * gy;
                  if (gc) gc[row * ns + n] += gy * ht[jn];
                  const T da = decay[jn];
                  const T prev = hp ? hp[jn] : T(0);
                  const T g_da = ghj[n] * prev;
                  gdt += g_da * da * aj[n] + ghj[n] * bt[n] * x;
                  if (ga) ga[jn] += g_da * da * dt;
                  if (gb) gb[row * ns + n] += ghj[n] * dt * x;
                  gx += ghj[n] * dt * bt[n];
                  ghj[n] *= da;
                }
                if (gu) gu[row * ch + j] += gx;
                if (gd) gd[row * ch + j] += gdt;
              }
            }
          }
        });
  }
  return out;
}

template <typename T>
Tensor<T> bce_with_logits(const Tensor<T>& logits, std::span<const T> labels) {
  if (logits.numel() != labels.size()) {
    throw DimensionError("bce_with_logits: " + std::to_string(logits.numel()) + " logits vs " +
                         std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) {
    throw DimensionError("bce_with_logits: empty batch");
  }
  const std::size_t n = labels.size();
  T total = 0;
  auto z = logits.values();
  for (std::size_t i = 0; i < n; ++i) total += stable_softplus(z[i]) - labels[i] * z[i];
  Tensor<T> out = Tensor<T>::scalar(total / T(n));
  AlignedVector<T> y(labels.begin(), labels.end());
  record_op<T>(out, {logits}, [zs = logits.storage(), os = out.storage(), y = std::move(y), n] {
    if (T* gz = grad_target(zs)) {
      const T g = os->grad[0] / T(n);
      for (std::size_t i = 0; i < n; ++i) gz[i] += g * (stable_sigmoid(zs->value[i]) - y[i]);
    }
  });
  return out;
}

template <typename T>
Tensor<T> bce(const Tensor<T>& probabilities, std::span<const T> labels) {
  if (probabilities.numel() != labels.size()) {
    throw DimensionError("bce: " + std::to_string(probabilities.numel()) + " probabilities vs " +
                         std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) {
    throw DimensionError("bce: empty batch");
  }
  constexpr T kEps = T(1e-7);
  const std::size_t n = labels.size();
  T total = 0;
  auto p = probabilities.values();
  for (std::size_t i = 0; i < n; ++i) {
    T q = std::clamp(p[i], kEps, T(1) - kEps);
    total -= labels[i] * std::log(q) + (T(1) - labels[i]) * std::log(T(1) - q);
  }
  Tensor<T> out = Tensor<T>::scalar(total / T(n));
  AlignedVector<T> y(labels.begin(), labels.end());
  record_op<T>(out, {probabilities}, [ps = probabilities.storage(), os = out.storage(), y = std::move(y), n] {
    if (T* gp = grad_target(ps)) {
      const T g = os->grad[0] / T(n);
      for (std::size_t i = 0; i < n; ++i) {
        T q = ps->value[i];
        if (q <= kEps || q >= T(1) - kEps) continue;  // clamped region is flat
        gp[i] += g * (q - y[i]) / (q * (T(1) - q));
      }
    }
  });
  return out;
}

#define QECD_INSTANTIATE_OPS(T)                                                                  \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);               \
  template Tensor<T> bmm(const Tensor<T>&, const Tensor<T>&, bool);                              \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> scale(const Tensor<T>&, T);                                                 \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                  \
  template Tensor<T> silu(const Tensor<T>&);                                                     \
  template Tensor<T> softplus(const Tensor<T>&);                                                 \
  template Tensor<T> exp(const Tensor<T>&);                                                      \
  template Tensor<T> softmax(const Tensor<T>&, int);                                             \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);        \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                           \
  template Tensor<T> permute(const Tensor<T>&, const std::vector<std::size_t>&);                 \
  template Tensor<T> narrow(const Tensor<T>&, std::size_t, std::size_t);                         \
  template Tensor<T> concat_last(const Tensor<T>&, const Tensor<T>&);                            \
  template Tensor<T> mean_axis(const Tensor<T>&, int);                                           \
  template Tensor<T> sum_all(const Tensor<T>&);                                                  \
  template Tensor<T> mean_all(const Tensor<T>&);                                                 \
  template Tensor<T> scaled_dot_product_attention(const Tensor<T>&, const Tensor<T>&,            \
                                                  const Tensor<T>&, std::span<const std::uint8_t>, \
                                                  Tensor<T>*);                                   \
  template Tensor<T> conv2d_dilated(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int);  \
  template Tensor<T> scatter_rows(const Tensor<T>&, std::span<const std::size_t>, std::size_t);  \
  template Tensor<T> gather_rows(const Tensor<T>&, std::span<const std::size_t>);                \
  template Tensor<T> causal_depthwise_conv1d(const Tensor<T>&, const Tensor<T>&,                 \
                                             const Tensor<T>&);                                  \
  template Tensor<T> selective_scan(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,        \
                                    const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);       \
  template Tensor<T> bce_with_logits(const Tensor<T>&, std::span<const T>);                      \
  template Tensor<T> bce(const Tensor<T>&, std::span<const T>);

QECD_INSTANTIATE_OPS(float)
QECD_INSTANTIATE_OPS(double)

#undef QECD_INSTANTIATE_OPS

}  // namespace qecd
