// SPDX-License-Identifier: Apache-2.0
//
// Convolutional token embedding, convolutional Q/K/V projection and the
// convolutional feed-forward block. Frames are the conv batch axis, so every
// frame of a clip goes through the same kernels. No positional parameters.

#pragma once

#include <string>

#include "vitpad/tensor.hpp"

namespace vitpad {

enum class Label : int { attack = 0, bona_fide = 1 };

template <typename S>
struct VideoClip {
  Tensor<S> frames;  // [T, 3, H, W], values in [0, 1]
  Label label = Label::attack;
  std::string clip_id;

  std::size_t num_frames() const { return frames.dim(0); }
};

// X_m: [T, C_m, H_m, W_m]
template <typename S>
struct TokenMap {
  Tensor<S> map;
};

template <typename S>
struct QKVMaps {
  Tensor<S> q, k, v;  // each [T, C_A, H_A, W_A]
};

template <typename S>
struct ConvParams {
  Tensor<S> weight;  // [Cout, Cin, kh, kw]
  Tensor<S> bias;    // [Cout]
};

template <typename S>
struct ProjectionParams {
  ConvParams<S> q, k, v;  // 3x3, stride 1, pad 1
};

template <typename S>
struct FfnParams {
  ConvParams<S> fc1;  // 1x1, C -> r*C
  ConvParams<S> fc2;  // 1x1, r*C -> C
};

// Non-overlapping convolution (kernel == stride). Throws ShapeError when the
// frame extent is not divisible by the stride or the kernel is not square
// with side `stride`.
template <typename S>
TokenMap<S> conv_token_embed(const Tensor<S>& frames, const ConvParams<S>& cte, std::size_t stride);

template <typename S>
QKVMaps<S> conv_project(const TokenMap<S>& x, const ProjectionParams<S>& params);

template <typename S>
Tensor<S> conv_ffn(const Tensor<S>& y, const FfnParams<S>& params);

}  // namespace vitpad
