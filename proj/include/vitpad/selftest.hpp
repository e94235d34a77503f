// SPDX-License-Identifier: Apache-2.0
//
// Fast invariant checks shipped with the library (the `selftest` verb).

#pragma once

#include <string>
#include <vector>

namespace vitpad {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

std::vector<CheckResult> run_selftest();

}  // namespace vitpad
