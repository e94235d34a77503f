// SPDX-License-Identifier: Apache-2.0

#include "vitpad/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace vitpad {

GradCheckResult gradcheck(const std::function<Tensord(const std::vector<Tensord>&)>& loss,
                          std::vector<Tensord> inputs, const std::vector<std::string>& names,
                          double h, double floor) {
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  {
    Tape<double> tape;
    TapeScope<double> scope(tape);
    tape.backward(loss(inputs));
  }
  std::vector<std::vector<double>> analytic;
  for (const auto& t : inputs) analytic.emplace_back(t.grad().begin(), t.grad().end());

  GradCheckResult result;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto data = inputs[k].data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + h;
      const double up = loss(inputs).item();
      data[i] = saved - h;
      const double down = loss(inputs).item();
      data[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[k][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      const double err = std::abs(a - numeric) / denom;
      if (err > result.max_rel_error || result.checked == 0) {
        result.max_rel_error = std::max(result.max_rel_error, err);
        result.worst_input = k < names.size() ? names[k] : "input" + std::to_string(k);
      }
      ++result.checked;
    }
  }
  return result;
}

}  // namespace vitpad
