// SPDX-License-Identifier: Apache-2.0
//
// Command-line verbs: train, eval, export-attention, count-cost, ablate,
// gen-data, selftest. Every verb accepts --config FILE, repeated
// --set key=value, --seed N and --dump-config (print the resolved config and
// exit). Failures print one `error: ...` line on `err` and return non-zero.

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace vitpad {

// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vitpad
