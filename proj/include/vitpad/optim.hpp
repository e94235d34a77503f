// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vitpad/tensor.hpp"

namespace vitpad {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename S>
struct AdamMoments {
  std::vector<S> m;
  std::vector<S> v;
};

// One bias-corrected Adam update of `param` in place. `step` is 1-based.
template <typename S>
void adam_step(std::span<S> param, std::span<const S> grad, AdamMoments<S>& state, std::int64_t step,
               double lr, const AdamConfig& cfg);

// Adam over a fixed, ordered parameter list.
template <typename S>
class Adam {
 public:
  Adam(std::vector<Tensor<S>> params, AdamConfig cfg = {});

  // Applies one update from the accumulated gradients, then zeroes them.
  void step(double lr);
  void zero_grad();

  std::int64_t steps_taken() const { return step_; }
  const std::vector<AdamMoments<S>>& moments() const { return state_; }

 private:
  std::vector<Tensor<S>> params_;
  std::vector<AdamMoments<S>> state_;
  AdamConfig cfg_;
  std::int64_t step_ = 0;
};

}  // namespace vitpad
