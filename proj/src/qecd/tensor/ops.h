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

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "qecd/tensor/tensor.h"

// Differentiable operations. Every op reads its inputs, allocates a fresh
// output and, when a Tape is active and some input requires a gradient,
// records an exact analytic backward. Reductions run in a fixed sequential
// order so forward and backward passes are bit-reproducible.
//
// Layout conventions: feature axis last; images are channels-last
// [batch, height, width, channels]; conv kernels are [3, 3, c_in, c_out].

namespace qecd {

/// x[..., in] @ w[in, out].
template <typename T>
Tensor<T> matmul(const Tensor<T>& x, const Tensor<T>& w);

/// y = x w + b.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);

/// Batched matrix product over leading axes: a[..., n, k] @ b[..., k, m], or
/// a[..., n, k] @ b[..., m, k]^T when transpose_b is set.
template <typename T>
Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b, bool transpose_b);

/// Elementwise a + b. b's shape must equal a trailing suffix of a's shape and
/// is broadcast over the leading axes.
template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

/// Elementwise a * b with the same suffix broadcasting as add().
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor);

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);

/// x * sigmoid(x).
template <typename T>
Tensor<T> silu(const Tensor<T>& x);

/// log(1 + e^x), overflow-safe.
template <typename T>
Tensor<T> softplus(const Tensor<T>& x);

template <typename T>
Tensor<T> exp(const Tensor<T>& x);

/// Max-subtracted softmax along `axis`.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis);

/// Normalizes the last axis, then applies gain and bias (both [features]).
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                     T eps = T(1e-5));

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);

/// Output axis i is input axis perm[i].
template <typename T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<std::size_t>& perm);

/// x[..., start:start+length] along the last axis.
template <typename T>
Tensor<T> narrow(const Tensor<T>& x, std::size_t start, std::size_t length);

/// Concatenation along the last axis; leading shapes must match.
template <typename T>
Tensor<T> concat_last(const Tensor<T>& a, const Tensor<T>& b);

/// Mean over one axis; the axis is removed.
template <typename T>
Tensor<T> mean_axis(const Tensor<T>& x, int axis);

template <typename T>
Tensor<T> sum_all(const Tensor<T>& x);

template <typename T>
Tensor<T> mean_all(const Tensor<T>& x);

/// softmax(q k^T / sqrt(d_h) + penalty) v over q, k, v of shape
/// [..., heads, n, d_h]. `mask`, when non-empty, is an n*n row-major table
/// where non-zero marks a disallowed (query, key) pair; those scores receive
/// an additive -1e9. If `weights` is non-null it receives the attention
/// probabilities [..., heads, n, n].
template <typename T>
Tensor<T> scaled_dot_product_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                                       std::span<const std::uint8_t> mask = {},
                                       Tensor<T>* weights = nullptr);

/// 3x3 dilated cross-correlation with zero padding `dilation` on every side,
/// so the spatial size is preserved. x: [batch, h, w, c_in];
/// kernel: [3, 3, c_in, c_out]; bias: [c_out] or undefined.
template <typename T>
Tensor<T> conv2d_dilated(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias,
                         int dilation);

/// Places row s of x[batch, rows, c] at row index[s] of a zero
/// [batch, num_rows_out, c] tensor. `index` must be injective.
template <typename T>
Tensor<T> scatter_rows(const Tensor<T>& x, std::span<const std::size_t> index,
                       std::size_t num_rows_out);

/// out[b, s, :] = x[b, index[s], :].
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, std::span<const std::size_t> index);

/// Depthwise causal 1-D convolution along axis 1 of x[batch, len, c]:
/// y[b,t,c] = bias[c] + sum_k w[k,c] x[b, t-(K-1)+k, c], zeros before t=0.
template <typename T>
Tensor<T> causal_depthwise_conv1d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias);

/// Selective state-space scan with zero initial state.
///   h_t = exp(delta_t * A) h_{t-1} + delta_t * B_t * u_t
///   y_t = C_t . h_t + D * u_t
/// u, delta: [batch, len, channels]; a: [channels, state]; b, c:
/// [batch, len, state]; d: [channels]. Runs sequentially over len.
template <typename T>
Tensor<T> selective_scan(const Tensor<T>& u, const Tensor<T>& delta, const Tensor<T>& a,
                         const Tensor<T>& b, const Tensor<T>& c, const Tensor<T>& d);

/// Mean binary cross-entropy of sigmoid(logits) against 0/1 labels, computed
/// in the overflow-free softplus form. d loss / d logit_i = (p_i - y_i) / n.
template <typename T>
Tensor<T> bce_with_logits(const Tensor<T>& logits, std::span<const T> labels);

/// Mean binary cross-entropy on probabilities, clamped to [1e-7, 1 - 1e-7].
template <typename T>
Tensor<T> bce(const Tensor<T>& probabilities, std::span<const T> labels);

}  // namespace qecd
