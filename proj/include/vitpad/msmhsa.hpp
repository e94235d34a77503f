// SPDX-License-Identifier: Apache-2.0
//
// Multi-scale multi-head self-attention.
//
// Q/K/V maps [T, C_A, H_A, W_A] are split evenly over channels, one head per
// entry of ScaleConfig::scales. Head i cuts every frame of its slice into an
// l x l grid; each grid cell, flattened over (channel, row, col), is one token.
// Tokens of all T frames are stacked, so one N x N score matrix
// (N = T * l^2) holds both same-frame and cross-frame pairs. The attended
// tokens are written back to their (frame, cell) positions and the heads are
// concatenated on channels.

#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "vitpad/embed.hpp"
#include "vitpad/tensor.hpp"

namespace vitpad {

struct ScaleConfig {
  std::vector<std::size_t> scales{1, 2};

  std::size_t head_count() const { return scales.size(); }
  // Throws ShapeError unless every l divides height/width and channels split
  // evenly over the heads.
  void validate(std::size_t channels, std::size_t height, std::size_t width) const;
};

// Layout of one head's patch tokens. Token m belongs to frame m / l^2 and to
// grid cell ((m % l^2) / l, m % l).
struct PatchGeometry {
  std::size_t frames = 1;
  std::size_t scale = 1;
  std::size_t channels = 1;  // per-head channels C_h
  std::size_t height = 1;    // full head-map height H_A
  std::size_t width = 1;

  std::size_t tokens() const { return frames * scale * scale; }
  std::size_t cell_height() const { return height / scale; }
  std::size_t cell_width() const { return width / scale; }
  std::size_t token_dim() const { return channels * cell_height() * cell_width(); }
  std::size_t frame_of(std::size_t m) const { return m / (scale * scale); }
  std::pair<std::size_t, std::size_t> cell_of(std::size_t m) const {
    const std::size_t c = m % (scale * scale);
    return {c / scale, c % scale};
  }
  std::size_t token_index(std::size_t frame, std::size_t row, std::size_t col) const {
    return (frame * scale + row) * scale + col;
  }
  bool operator==(const PatchGeometry&) const = default;
};

template <typename S>
struct HeadPatchSet {
  Tensor<S> tokens;  // [N, D]
  PatchGeometry geometry;
};

template <typename S>
struct AttentionWeights {
  Tensor<S> alpha;  // [N, N], row-stochastic, detached
  PatchGeometry geometry;
};

template <typename S>
HeadPatchSet<S> partition_patches(const Tensor<S>& head_map, std::size_t scale);

// Inverse of partition_patches: [N, D] tokens back to [T, C_h, H_A, W_A].
template <typename S>
Tensor<S> unpartition_patches(const HeadPatchSet<S>& patches);

// Scaled dot-product attention between whole patches, scaled by 1/sqrt(D).
// When `record` is non-null it receives a detached copy of the weights.
template <typename S>
HeadPatchSet<S> head_attention(const HeadPatchSet<S>& qp, const HeadPatchSet<S>& kp,
                               const HeadPatchSet<S>& vp, AttentionWeights<S>* record = nullptr);

template <typename S>
Tensor<S> reassemble_and_concat(const std::vector<HeadPatchSet<S>>& heads);

template <typename S>
Tensor<S> msmhsa_forward(const QKVMaps<S>& qkv, const ScaleConfig& cfg,
                         std::vector<AttentionWeights<S>>* record = nullptr);

// Mean attention received by each cell of `frame` over all queries, painted
// onto the [H_A, W_A] grid (every pixel of a cell carries the cell's value).
template <typename S>
Tensor<S> attention_rollout(const AttentionWeights<S>& weights, std::size_t frame);

// Nearest-neighbour upsampling of a [H, W] map by an integer factor.
template <typename S>
Tensor<S> upsample_nearest(const Tensor<S>& map, std::size_t factor);

}  // namespace vitpad
