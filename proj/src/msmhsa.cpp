// SPDX-License-Identifier: Apache-2.0

#include "vitpad/msmhsa.hpp"

#include <cmath>
#include <string>

#include "vitpad/ops.hpp"

namespace vitpad {

void ScaleConfig::validate(std::size_t channels, std::size_t height, std::size_t width) const {
  if (scales.empty()) throw ShapeError("scale set is empty");
  if (channels % scales.size() != 0)
    throw ShapeError("channels " + std::to_string(channels) + " not divisible by " +
                     std::to_string(scales.size()) + " heads");
  for (auto l : scales)
    if (l == 0 || height % l != 0 || width % l != 0)
      throw ShapeError("scale " + std::to_string(l) + " does not divide " + std::to_string(height) +
                       "x" + std::to_string(width));
}

template <typename S>
HeadPatchSet<S> partition_patches(const Tensor<S>& head_map, std::size_t scale) {
  if (head_map.rank() != 4)
    throw ShapeError("partition_patches: expected [T,C,H,W], got " + shape_str(head_map.shape()));
  const PatchGeometry g{head_map.dim(0), scale, head_map.dim(1), head_map.dim(2), head_map.dim(3)};
  if (scale == 0 || g.height % scale != 0 || g.width % scale != 0)
    throw ShapeError("partition_patches: scale " + std::to_string(scale) + " does not divide " +
                     shape_str(head_map.shape()));
  // [T, C, l, h, l, w] -> [T, l, l, C, h, w] -> [N, D]
  auto x = reshape(head_map, {g.frames, g.channels, scale, g.cell_height(), scale, g.cell_width()});
  x = permute(x, {0, 2, 4, 1, 3, 5});
  return {reshape(x, {g.tokens(), g.token_dim()}), g};
}

template <typename S>
Tensor<S> unpartition_patches(const HeadPatchSet<S>& patches) {
  const auto& g = patches.geometry;
  if (patches.tokens.shape() != Shape{g.tokens(), g.token_dim()})
    throw ShapeError("unpartition_patches: tokens " + shape_str(patches.tokens.shape()) +
                     " inconsistent with geometry");
  auto x = reshape(patches.tokens, {g.frames, g.scale, g.scale, g.channels, g.cell_height(), g.cell_width()});
  x = permute(x, {0, 3, 1, 4, 2, 5});
  return reshape(x, {g.frames, g.channels, g.height, g.width});
}

template <typename S>
HeadPatchSet<S> head_attention(const HeadPatchSet<S>& qp, const HeadPatchSet<S>& kp,
                               const HeadPatchSet<S>& vp, AttentionWeights<S>* record) {
  if (!(qp.geometry == kp.geometry) || !(qp.geometry == vp.geometry) ||
      qp.tokens.shape() != kp.tokens.shape() || qp.tokens.shape() != vp.tokens.shape())
    throw ShapeError("head_attention: q/k/v patch sets disagree: " + shape_str(qp.tokens.shape()) + " " +
                     shape_str(kp.tokens.shape()) + " " + shape_str(vp.tokens.shape()));
  const auto d = static_cast<S>(qp.geometry.token_dim());
  auto scores = scale(matmul(qp.tokens, transpose(kp.tokens, 0, 1)), S(1) / std::sqrt(d));
  auto alpha = softmax(scores, 1);
  if (record != nullptr) *record = {alpha.detach(), qp.geometry};
  return {matmul(alpha, vp.tokens), qp.geometry};
}

template <typename S>
Tensor<S> reassemble_and_concat(const std::vector<HeadPatchSet<S>>& heads) {
  if (heads.empty()) throw ShapeError("reassemble_and_concat: no heads");
  std::vector<Tensor<S>> maps;
  maps.reserve(heads.size());
  const auto& g0 = heads.front().geometry;
  for (const auto& h : heads) {
    const auto& g = h.geometry;
    if (g.frames != g0.frames || g.height != g0.height || g.width != g0.width || g.channels != g0.channels)
      throw ShapeError("reassemble_and_concat: inconsistent head shapes");
    maps.push_back(unpartition_patches(h));
  }
  return maps.size() == 1 ? maps.front() : concat(maps, 1);
}

template <typename S>
Tensor<S> msmhsa_forward(const QKVMaps<S>& qkv, const ScaleConfig& cfg,
                         std::vector<AttentionWeights<S>>* record) {
  const auto& shape = qkv.q.shape();
  if (shape.size() != 4 || qkv.k.shape() != shape || qkv.v.shape() != shape)
    throw ShapeError("msmhsa_forward: q/k/v shapes " + shape_str(qkv.q.shape()) + " " +
                     shape_str(qkv.k.shape()) + " " + shape_str(qkv.v.shape()));
  cfg.validate(shape[1], shape[2], shape[3]);
  const std::size_t heads = cfg.head_count();
  auto qs = heads == 1 ? std::vector<Tensor<S>>{qkv.q} : split(qkv.q, 1, heads);
  auto ks = heads == 1 ? std::vector<Tensor<S>>{qkv.k} : split(qkv.k, 1, heads);
  auto vs = heads == 1 ? std::vector<Tensor<S>>{qkv.v} : split(qkv.v, 1, heads);
  if (record != nullptr) record->assign(heads, AttentionWeights<S>{});
  std::vector<HeadPatchSet<S>> outputs;
  outputs.reserve(heads);
  for (std::size_t i = 0; i < heads; ++i) {
    const auto l = cfg.scales[i];
    outputs.push_back(head_attention(partition_patches(qs[i], l), partition_patches(ks[i], l),
                                     partition_patches(vs[i], l),
                                     record != nullptr ? &(*record)[i] : nullptr));
  }
  return reassemble_and_concat(outputs);
}

template <typename S>
Tensor<S> attention_rollout(const AttentionWeights<S>& weights, std::size_t frame) {
  const auto& g = weights.geometry;
  if (frame >= g.frames)
    throw std::out_of_range("attention_rollout: frame " + std::to_string(frame) + " of " +
                            std::to_string(g.frames));
  const std::size_t n = g.tokens();
  if (weights.alpha.shape() != Shape{n, n})
    throw ShapeError("attention_rollout: weights " + shape_str(weights.alpha.shape()) +
                     " do not match geometry");
  Tensor<S> map(Shape{g.height, g.width});
  for (std::size_t r = 0; r < g.scale; ++r)
    for (std::size_t c = 0; c < g.scale; ++c) {
      const std::size_t key = g.token_index(frame, r, c);
      S received = 0;
      for (std::size_t m = 0; m < n; ++m) received += weights.alpha[m * n + key];
      received /= static_cast<S>(n);
      for (std::size_t y = r * g.cell_height(); y < (r + 1) * g.cell_height(); ++y)
        for (std::size_t x = c * g.cell_width(); x < (c + 1) * g.cell_width(); ++x)
          map[y * g.width + x] = received;
    }
  return map;
}

template <typename S>
Tensor<S> upsample_nearest(const Tensor<S>& map, std::size_t factor) {
  if (map.rank() != 2 || factor == 0) throw ShapeError("upsample_nearest: expected [H,W] map");
  const std::size_t H = map.dim(0), W = map.dim(1);
  Tensor<S> out(Shape{H * factor, W * factor});
  for (std::size_t y = 0; y < H * factor; ++y)
    for (std::size_t x = 0; x < W * factor; ++x) out[y * W * factor + x] = map[(y / factor) * W + x / factor];
  return out;
}

#define VITPAD_INSTANTIATE_MSMHSA(S)                                                              \
  template HeadPatchSet<S> partition_patches(const Tensor<S>&, std::size_t);                     \
  template Tensor<S> unpartition_patches(const HeadPatchSet<S>&);                                \
  template HeadPatchSet<S> head_attention(const HeadPatchSet<S>&, const HeadPatchSet<S>&,        \
                                          const HeadPatchSet<S>&, AttentionWeights<S>*);         \
  template Tensor<S> reassemble_and_concat(const std::vector<HeadPatchSet<S>>&);                 \
  template Tensor<S> msmhsa_forward(const QKVMaps<S>&, const ScaleConfig&,                       \
                                    std::vector<AttentionWeights<S>>*);                          \
  template Tensor<S> attention_rollout(const AttentionWeights<S>&, std::size_t);                 \
  template Tensor<S> upsample_nearest(const Tensor<S>&, std::size_t);

VITPAD_INSTANTIATE_MSMHSA(float)
VITPAD_INSTANTIATE_MSMHSA(double)

#undef VITPAD_INSTANTIATE_MSMHSA

}  // namespace vitpad
