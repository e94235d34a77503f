// SPDX-License-Identifier: Apache-2.0
//
// Differentiable primitives. Every op checks shapes eagerly and throws
// ShapeError naming the offending shapes. Broadcasting exists only for
// bias-add (add_bias) and scalar scaling (scale); anything else must match.

#pragma once

#include <cstddef>
#include <vector>

#include "vitpad/tensor.hpp"

namespace vitpad {

// [..., M, K] x [..., K, P] -> [..., M, P]. Leading extents match or are 1.
template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b);

// x: [N, Cin, H, W], w: [Cout, Cin, kh, kw], b: [Cout]. Zero padding.
template <typename S>
Tensor<S> conv2d(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b, std::size_t stride,
                 std::size_t pad);

template <typename S>
Tensor<S> softmax(const Tensor<S>& x, std::size_t axis);

// Normalizes along `axis` independently for every other index, then applies
// gamma/beta (length = extent of `axis`).
template <typename S>
Tensor<S> layer_norm(const Tensor<S>& x, std::size_t axis, const Tensor<S>& gamma,
                     const Tensor<S>& beta, S eps);

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b);
template <typename S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b);
template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b);
// x + bias broadcast along `axis`; bias is 1-D with x.dim(axis) entries.
template <typename S>
Tensor<S> add_bias(const Tensor<S>& x, const Tensor<S>& bias, std::size_t axis);
template <typename S>
Tensor<S> scale(const Tensor<S>& x, S factor);
template <typename S>
Tensor<S> relu(const Tensor<S>& x);
// Exact (erf) GELU.
template <typename S>
Tensor<S> gelu(const Tensor<S>& x);

template <typename S>
Tensor<S> reshape(const Tensor<S>& x, Shape shape);
// General axis permutation: out.dim(i) == x.dim(perm[i]).
template <typename S>
Tensor<S> permute(const Tensor<S>& x, const std::vector<std::size_t>& perm);
template <typename S>
Tensor<S> transpose(const Tensor<S>& x, std::size_t axis0, std::size_t axis1);
template <typename S>
Tensor<S> concat(const std::vector<Tensor<S>>& parts, std::size_t axis);
template <typename S>
std::vector<Tensor<S>> split(const Tensor<S>& x, std::size_t axis, std::size_t parts);

// Mean over `axes`; reduced axes are removed from the result shape.
template <typename S>
Tensor<S> mean(const Tensor<S>& x, const std::vector<std::size_t>& axes);
// Sum of all elements, rank-0 result.
template <typename S>
Tensor<S> sum(const Tensor<S>& x);

// Softmax over the class logits followed by the negative log-likelihood of
// `label`. Rank-0 result.
template <typename S>
Tensor<S> cross_entropy(const Tensor<S>& logits, std::size_t label);

}  // namespace vitpad
