// SPDX-License-Identifier: Apache-2.0

#include "vitpad/optim.hpp"

#include <cmath>

namespace vitpad {

template <typename S>
void adam_step(std::span<S> param, std::span<const S> grad, AdamMoments<S>& state, std::int64_t step,
               double lr, const AdamConfig& cfg) {
  if (param.size() != grad.size()) throw ShapeError("adam_step: parameter/gradient size mismatch");
  if (state.m.size() != param.size()) {
    state.m.assign(param.size(), S(0));
    state.v.assign(param.size(), S(0));
  }
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    const double m = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    const double v = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    state.m[i] = static_cast<S>(m);
    state.v[i] = static_cast<S>(v);
    const double mhat = m / c1;
    const double vhat = v / c2;
    param[i] = static_cast<S>(param[i] - lr * mhat / (std::sqrt(vhat) + cfg.eps));
  }
}

template <typename S>
Adam<S>::Adam(std::vector<Tensor<S>> params, AdamConfig cfg)
    : params_(std::move(params)), state_(params_.size()), cfg_(cfg) {}

template <typename S>
void Adam<S>::step(double lr) {
  ++step_;
  for (std::size_t i = 0; i < params_.size(); ++i)
    adam_step<S>(params_[i].data(), params_[i].grad(), state_[i], step_, lr, cfg_);
  zero_grad();
}

template <typename S>
void Adam<S>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

template void adam_step(std::span<float>, std::span<const float>, AdamMoments<float>&, std::int64_t,
                        double, const AdamConfig&);
template void adam_step(std::span<double>, std::span<const double>, AdamMoments<double>&,
                        std::int64_t, double, const AdamConfig&);
template class Adam<float>;
template class Adam<double>;

}  // namespace vitpad
