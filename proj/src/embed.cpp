// SPDX-License-Identifier: Apache-2.0

#include "vitpad/embed.hpp"

#include "vitpad/ops.hpp"

namespace vitpad {

template <typename S>
TokenMap<S> conv_token_embed(const Tensor<S>& frames, const ConvParams<S>& cte, std::size_t stride) {
  if (frames.rank() != 4 || frames.dim(1) != 3)
    throw ShapeError("conv_token_embed: expected [T,3,H,W] frames, got " + shape_str(frames.shape()));
  if (stride == 0 || frames.dim(2) % stride != 0 || frames.dim(3) % stride != 0)
    throw ShapeError("conv_token_embed: frame extent " + shape_str(frames.shape()) +
                     " not divisible by stride " + std::to_string(stride));
  const auto& ws = cte.weight.shape();
  if (ws.size() != 4 || ws[2] != stride || ws[3] != stride)
    throw ShapeError("conv_token_embed: kernel " + shape_str(ws) + " must be stride x stride");
  return {conv2d(frames, cte.weight, cte.bias, stride, 0)};
}

template <typename S>
QKVMaps<S> conv_project(const TokenMap<S>& x, const ProjectionParams<S>& params) {
  for (const auto* c : {&params.q, &params.k, &params.v}) {
    const auto& ws = c->weight.shape();
    if (ws.size() != 4 || ws[2] != 3 || ws[3] != 3)
      throw ShapeError("conv_project: expected 3x3 kernels, got " + shape_str(ws));
  }
  return {conv2d(x.map, params.q.weight, params.q.bias, 1, 1),
          conv2d(x.map, params.k.weight, params.k.bias, 1, 1),
          conv2d(x.map, params.v.weight, params.v.bias, 1, 1)};
}

template <typename S>
Tensor<S> conv_ffn(const Tensor<S>& y, const FfnParams<S>& params) {
  auto hidden = gelu(conv2d(y, params.fc1.weight, params.fc1.bias, 1, 0));
  return conv2d(hidden, params.fc2.weight, params.fc2.bias, 1, 0);
}

template TokenMap<float> conv_token_embed(const Tensor<float>&, const ConvParams<float>&, std::size_t);
template TokenMap<double> conv_token_embed(const Tensor<double>&, const ConvParams<double>&, std::size_t);
template QKVMaps<float> conv_project(const TokenMap<float>&, const ProjectionParams<float>&);
template QKVMaps<double> conv_project(const TokenMap<double>&, const ProjectionParams<double>&);
template Tensor<float> conv_ffn(const Tensor<float>&, const FfnParams<float>&);
template Tensor<double> conv_ffn(const Tensor<double>&, const FfnParams<double>&);

}  // namespace vitpad
