// SPDX-License-Identifier: Apache-2.0
//
// Central finite-difference gradient checking in f64.

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vitpad/tensor.hpp"

namespace vitpad {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_input;  // name of the input holding the worst entry
  std::size_t checked = 0;  // number of scalar entries compared
};

// `loss` builds a scalar from `inputs`. Each input is perturbed entrywise by
// +/-h; the analytic gradient comes from one taped backward pass. The error
// per entry is |a - n| / max(|a|, |n|, floor), so exact zeros do not blow up.
GradCheckResult gradcheck(const std::function<Tensord(const std::vector<Tensord>&)>& loss,
                          std::vector<Tensord> inputs, const std::vector<std::string>& names = {},
                          double h = 1e-5, double floor = 1e-6);

}  // namespace vitpad
