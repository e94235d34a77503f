// SPDX-License-Identifier: Apache-2.0
//
// End-to-end video transformer classifier:
//
//   X_0 = CTE(clip)
//   per layer:  Q,K,V = CP(X);  Y = MsMHSA(Q,K,V) + X;  X' = FFN(Norm(Y)) + Y
//   logits = W * mean_{t,h,w}(X_depth) + b          (no class token)

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vitpad/embed.hpp"
#include "vitpad/msmhsa.hpp"
#include "vitpad/optim.hpp"
#include "vitpad/rng.hpp"
#include "vitpad/tensor.hpp"

namespace vitpad {

struct ModelConfig {
  std::size_t frames = 8;
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t cte_stride = 8;
  std::size_t channels = 12;  // C_m
  ScaleConfig scales;
  std::size_t depth = 2;
  std::size_t ffn_ratio = 4;
  std::size_t num_classes = 2;
  std::uint64_t seed = 0;
  double norm_eps = 1e-5;
  double init_std = 0.02;

  std::size_t map_height() const { return height / cte_stride; }
  std::size_t map_width() const { return width / cte_stride; }
  void validate() const;  // throws std::invalid_argument / ShapeError
};

template <typename S>
struct LayerParams {
  ProjectionParams<S> proj;
  Tensor<S> norm_gamma;  // [C_m]
  Tensor<S> norm_beta;   // [C_m]
  FfnParams<S> ffn;
};

template <typename S>
struct ModelParams {
  ConvParams<S> cte;
  std::vector<LayerParams<S>> layers;
  Tensor<S> head_weight;  // [num_classes, C_m]
  Tensor<S> head_bias;    // [num_classes]

  // Stable, ordered inventory. The tensors alias the parameters.
  std::vector<std::pair<std::string, Tensor<S>>> named() const;
  std::vector<Tensor<S>> list() const;
  std::size_t count() const;  // total scalar parameters
};

// Truncated-normal(0, init_std) weights, zero biases, unit/zero norm affine.
// Uses the "init" stream of cfg.seed.
template <typename S>
ModelParams<S> init_params(const ModelConfig& cfg);

template <typename To, typename From>
ModelParams<To> cast_params(const ModelParams<From>& params);

// Attention weights per layer, per head.
template <typename S>
using AttentionTrace = std::vector<std::vector<AttentionWeights<S>>>;

template <typename S>
Tensor<S> forward(const Tensor<S>& frames, const ModelParams<S>& params, const ModelConfig& cfg,
                  AttentionTrace<S>* trace = nullptr);

template <typename S>
Tensor<S> forward(const VideoClip<S>& clip, const ModelParams<S>& params, const ModelConfig& cfg,
                  AttentionTrace<S>* trace = nullptr) {
  return forward(clip.frames, params, cfg, trace);
}

// Mean cross-entropy over the batch, one Adam update, gradients zeroed.
template <typename S>
double train_step(std::span<const VideoClip<S>> batch, const ModelParams<S>& params, Adam<S>& opt,
                  const ModelConfig& cfg, double lr);

// Probability of the bona fide class.
template <typename S>
double predict_score(const VideoClip<S>& clip, const ModelParams<S>& params, const ModelConfig& cfg);

double bona_fide_probability(double attack_logit, double bona_fide_logit);

enum class SampleMode { uniform, random_interval };

SampleMode parse_sample_mode(const std::string& text);
std::string to_string(SampleMode mode);

// Frame indices for a T-frame clip out of `source_frames`. Uniform picks
// floor(i * S / T); random-interval draws a stride then a phase from `rng`.
std::vector<std::size_t> sample_indices(std::size_t source_frames, std::size_t count, SampleMode mode,
                                        Rng* rng = nullptr);

template <typename S>
VideoClip<S> sample_frames(const VideoClip<S>& source, std::size_t count, SampleMode mode,
                           Rng* rng = nullptr);

// Named-tensor directory of the parameters.
void save_params(const std::filesystem::path& dir, const ModelParams<float>& params);
// Loads and checks every name/shape against what `cfg` implies.
ModelParams<float> load_params(const std::filesystem::path& dir, const ModelConfig& cfg);

}  // namespace vitpad
