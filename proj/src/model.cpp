// SPDX-License-Identifier: Apache-2.0

#include "vitpad/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "vitpad/ops.hpp"
#include "vitpad/vpt1.hpp"

namespace vitpad {

void ModelConfig::validate() const {
  if (frames == 0) throw std::invalid_argument("frames must be >= 1");
  if (cte_stride == 0 || height % cte_stride != 0 || width % cte_stride != 0)
    throw ShapeError("frame size " + std::to_string(height) + "x" + std::to_string(width) +
                     " not divisible by cte_stride " + std::to_string(cte_stride));
  if (channels == 0 || ffn_ratio == 0) throw std::invalid_argument("channels and ffn_ratio must be >= 1");
  if (num_classes != 2) throw std::invalid_argument("num_classes must be 2 (bona fide vs attack)");
  scales.validate(channels, map_height(), map_width());
}

template <typename S>
std::vector<std::pair<std::string, Tensor<S>>> ModelParams<S>::named() const {
  std::vector<std::pair<std::string, Tensor<S>>> out;
  out.emplace_back("cte.weight", cte.weight);
  out.emplace_back("cte.bias", cte.bias);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string p = "layers." + std::to_string(i) + ".";
    const auto& L = layers[i];
    out.emplace_back(p + "q.weight", L.proj.q.weight);
    out.emplace_back(p + "q.bias", L.proj.q.bias);
    out.emplace_back(p + "k.weight", L.proj.k.weight);
    out.emplace_back(p + "k.bias", L.proj.k.bias);
    out.emplace_back(p + "v.weight", L.proj.v.weight);
    out.emplace_back(p + "v.bias", L.proj.v.bias);
    out.emplace_back(p + "norm.gamma", L.norm_gamma);
    out.emplace_back(p + "norm.beta", L.norm_beta);
    out.emplace_back(p + "ffn.fc1.weight", L.ffn.fc1.weight);
    out.emplace_back(p + "ffn.fc1.bias", L.ffn.fc1.bias);
    out.emplace_back(p + "ffn.fc2.weight", L.ffn.fc2.weight);
    out.emplace_back(p + "ffn.fc2.bias", L.ffn.fc2.bias);
  }
  out.emplace_back("head.weight", head_weight);
  out.emplace_back("head.bias", head_bias);
  return out;
}

template <typename S>
std::vector<Tensor<S>> ModelParams<S>::list() const {
  std::vector<Tensor<S>> out;
  for (auto& [name, t] : named()) out.push_back(t);
  return out;
}

template <typename S>
std::size_t ModelParams<S>::count() const {
  std::size_t n = 0;
  for (const auto& t : list()) n += t.numel();
  return n;
}

namespace {

template <typename S>
Tensor<S> random_weight(Shape shape, Rng& rng, double std) {
  Tensor<S> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<S>(truncated_normal(rng, std));
  t.set_requires_grad(true);
  return t;
}

template <typename S>
Tensor<S> filled(Shape shape, S value) {
  Tensor<S> t(std::move(shape), value);
  t.set_requires_grad(true);
  return t;
}

template <typename S>
ConvParams<S> conv_params(std::size_t cout, std::size_t cin, std::size_t k, Rng& rng, double std) {
  return {random_weight<S>({cout, cin, k, k}, rng, std), filled<S>({cout}, S(0))};
}

template <typename To, typename From>
Tensor<To> cast_param(const Tensor<From>& t) {
  auto out = cast<To>(t);
  out.set_requires_grad(true);
  return out;
}

template <typename To, typename From>
ConvParams<To> cast_conv(const ConvParams<From>& c) {
  return {cast_param<To>(c.weight), cast_param<To>(c.bias)};
}

}  // namespace

template <typename S>
ModelParams<S> init_params(const ModelConfig& cfg) {
  cfg.validate();
  auto rng = make_stream(cfg.seed, "init");
  const double sd = cfg.init_std;
  const std::size_t C = cfg.channels;
  ModelParams<S> p;
  p.cte = conv_params<S>(C, 3, cfg.cte_stride, rng, sd);
  for (std::size_t i = 0; i < cfg.depth; ++i) {
    LayerParams<S> L;
    L.proj.q = conv_params<S>(C, C, 3, rng, sd);
    L.proj.k = conv_params<S>(C, C, 3, rng, sd);
    L.proj.v = conv_params<S>(C, C, 3, rng, sd);
    L.norm_gamma = filled<S>({C}, S(1));
    L.norm_beta = filled<S>({C}, S(0));
    L.ffn.fc1 = conv_params<S>(C * cfg.ffn_ratio, C, 1, rng, sd);
    L.ffn.fc2 = conv_params<S>(C, C * cfg.ffn_ratio, 1, rng, sd);
    p.layers.push_back(std::move(L));
  }
  p.head_weight = random_weight<S>({cfg.num_classes, C}, rng, sd);
  p.head_bias = filled<S>({cfg.num_classes}, S(0));
  return p;
}

template <typename To, typename From>
ModelParams<To> cast_params(const ModelParams<From>& params) {
  ModelParams<To> p;
  p.cte = cast_conv<To>(params.cte);
  for (const auto& L : params.layers) {
    LayerParams<To> out;
    out.proj = {cast_conv<To>(L.proj.q), cast_conv<To>(L.proj.k), cast_conv<To>(L.proj.v)};
    out.norm_gamma = cast_param<To>(L.norm_gamma);
    out.norm_beta = cast_param<To>(L.norm_beta);
    out.ffn = {cast_conv<To>(L.ffn.fc1), cast_conv<To>(L.ffn.fc2)};
    p.layers.push_back(std::move(out));
  }
  p.head_weight = cast_param<To>(params.head_weight);
  p.head_bias = cast_param<To>(params.head_bias);
  return p;
}

template <typename S>
Tensor<S> forward(const Tensor<S>& frames, const ModelParams<S>& params, const ModelConfig& cfg,
                  AttentionTrace<S>* trace) {
  if (frames.shape() != Shape{cfg.frames, 3, cfg.height, cfg.width})
    throw ShapeError("forward: clip " + shape_str(frames.shape()) + " does not match config [" +
                     std::to_string(cfg.frames) + ",3," + std::to_string(cfg.height) + "," +
                     std::to_string(cfg.width) + "]");
  if (params.layers.size() != cfg.depth)
    throw ShapeError("forward: parameter depth " + std::to_string(params.layers.size()) +
                     " does not match config depth " + std::to_string(cfg.depth));
  if (trace != nullptr) trace->assign(cfg.depth, {});

  auto x = conv_token_embed(frames, params.cte, cfg.cte_stride).map;
  for (std::size_t i = 0; i < cfg.depth; ++i) {
    const auto& L = params.layers[i];
    auto qkv = conv_project(TokenMap<S>{x}, L.proj);
    auto h = msmhsa_forward(qkv, cfg.scales, trace != nullptr ? &(*trace)[i] : nullptr);
    auto y = add(h, x);
    auto normed = layer_norm(y, 1, L.norm_gamma, L.norm_beta, static_cast<S>(cfg.norm_eps));
    x = add(conv_ffn(normed, L.ffn), y);
  }
  auto pooled = mean(x, {0, 2, 3});
  auto logits = matmul(params.head_weight, reshape(pooled, {cfg.channels, 1}));
  return add(reshape(logits, {cfg.num_classes}), params.head_bias);
}

template <typename S>
double train_step(std::span<const VideoClip<S>> batch, const ModelParams<S>& params, Adam<S>& opt,
                  const ModelConfig& cfg, double lr) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  Tape<S> tape;
  double loss_value = 0.0;
  {
    TapeScope<S> scope(tape);
    std::optional<Tensor<S>> total;
    for (const auto& clip : batch) {
      auto loss = cross_entropy(forward(clip.frames, params, cfg), static_cast<std::size_t>(clip.label));
      total = total ? add(*total, loss) : loss;
    }
    auto mean_loss = scale(*total, S(1) / static_cast<S>(batch.size()));
    loss_value = static_cast<double>(mean_loss.item());
    tape.backward(mean_loss);
  }
  opt.step(lr);
  return loss_value;
}

double bona_fide_probability(double attack_logit, double bona_fide_logit) {
  const double d = attack_logit - bona_fide_logit;
  if (d > 0) {
    const double e = std::exp(-d);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(d));
}

template <typename S>
double predict_score(const VideoClip<S>& clip, const ModelParams<S>& params, const ModelConfig& cfg) {
  auto logits = forward(clip.frames, params, cfg);
  return bona_fide_probability(logits[0], logits[1]);
}

SampleMode parse_sample_mode(const std::string& text) {
  if (text == "uniform") return SampleMode::uniform;
  if (text == "random-interval") return SampleMode::random_interval;
  throw std::invalid_argument("unknown sample mode '" + text + "' (uniform | random-interval)");
}

std::string to_string(SampleMode mode) {
  return mode == SampleMode::uniform ? "uniform" : "random-interval";
}

std::vector<std::size_t> sample_indices(std::size_t source_frames, std::size_t count, SampleMode mode,
                                        Rng* rng) {
  if (count == 0) throw std::invalid_argument("sample_indices: count must be >= 1");
  if (source_frames < count)
    throw std::invalid_argument("sample_indices: source has " + std::to_string(source_frames) +
                                " frames, " + std::to_string(count) + " requested");
  std::vector<std::size_t> idx(count);
  if (mode == SampleMode::uniform) {
    for (std::size_t i = 0; i < count; ++i) idx[i] = i * source_frames / count;
    return idx;
  }
  if (rng == nullptr) throw std::invalid_argument("sample_indices: random-interval needs an rng");
  const std::size_t max_stride = count == 1 ? 1 : (source_frames - 1) / (count - 1);
  const auto stride = static_cast<std::size_t>(uniform_int(*rng, 1, static_cast<std::int64_t>(max_stride)));
  const std::size_t last_start = source_frames - 1 - stride * (count - 1);
  const auto phase = static_cast<std::size_t>(uniform_int(*rng, 0, static_cast<std::int64_t>(last_start)));
  for (std::size_t i = 0; i < count; ++i) idx[i] = phase + i * stride;
  return idx;
}

template <typename S>
VideoClip<S> sample_frames(const VideoClip<S>& source, std::size_t count, SampleMode mode, Rng* rng) {
  const auto& fs = source.frames.shape();
  if (fs.size() != 4) throw ShapeError("sample_frames: expected [S,3,H,W], got " + shape_str(fs));
  const auto idx = sample_indices(fs[0], count, mode, rng);
  const std::size_t frame_size = fs[1] * fs[2] * fs[3];
  std::vector<S> data(count * frame_size);
  auto src = source.frames.data();
  for (std::size_t i = 0; i < count; ++i)
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(idx[i] * frame_size), frame_size,
                data.begin() + static_cast<std::ptrdiff_t>(i * frame_size));
  return {Tensor<S>({count, fs[1], fs[2], fs[3]}, std::move(data)), source.label, source.clip_id};
}

void save_params(const std::filesystem::path& dir, const ModelParams<float>& params) {
  NamedTensors tensors;
  for (auto& [name, t] : params.named()) tensors.emplace_back(name, t);
  write_tensor_dir(dir, tensors);
}

ModelParams<float> load_params(const std::filesystem::path& dir, const ModelConfig& cfg) {
  auto params = init_params<float>(cfg);
  auto stored = read_tensor_dir(dir);
  std::map<std::string, Tensorf> by_name;
  for (auto& [name, t] : stored) by_name.emplace(name, t);
  const auto expected = params.named();
  if (by_name.size() != expected.size())
    throw ShapeError("checkpoint holds " + std::to_string(by_name.size()) + " tensors, config implies " +
                     std::to_string(expected.size()));
  for (auto& [name, t] : expected) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw ShapeError("checkpoint is missing parameter " + name);
    if (it->second.shape() != t.shape())
      throw ShapeError("checkpoint parameter " + name + " has shape " + shape_str(it->second.shape()) +
                       ", config implies " + shape_str(t.shape()));
    auto dst = t.storage();
    std::copy(it->second.data().begin(), it->second.data().end(), dst->data.begin());
  }
  return params;
}

template struct ModelParams<float>;
template struct ModelParams<double>;
template ModelParams<float> init_params<float>(const ModelConfig&);
template ModelParams<double> init_params<double>(const ModelConfig&);
template ModelParams<double> cast_params<double, float>(const ModelParams<float>&);
template ModelParams<float> cast_params<float, double>(const ModelParams<double>&);
template Tensor<float> forward(const Tensor<float>&, const ModelParams<float>&, const ModelConfig&,
                               AttentionTrace<float>*);
template Tensor<double> forward(const Tensor<double>&, const ModelParams<double>&, const ModelConfig&,
                                AttentionTrace<double>*);
template double train_step(std::span<const VideoClip<float>>, const ModelParams<float>&, Adam<float>&,
                           const ModelConfig&, double);
template double train_step(std::span<const VideoClip<double>>, const ModelParams<double>&, Adam<double>&,
                           const ModelConfig&, double);
template double predict_score(const VideoClip<float>&, const ModelParams<float>&, const ModelConfig&);
template double predict_score(const VideoClip<double>&, const ModelParams<double>&, const ModelConfig&);
template VideoClip<float> sample_frames(const VideoClip<float>&, std::size_t, SampleMode, Rng*);
template VideoClip<double> sample_frames(const VideoClip<double>&, std::size_t, SampleMode, Rng*);

}  // namespace vitpad
