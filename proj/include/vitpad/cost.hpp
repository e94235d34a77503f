// SPDX-License-Identifier: Apache-2.0
//
// Analytic per-clip cost. FLOPs = 2 * MACs for convolutions and matmuls;
// each attention head additionally charges N^2 FLOPs for its softmax.
// All counts are exact integers.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vitpad/model.hpp"

namespace vitpad {

struct CostEntry {
  std::string layer;
  std::string kind;  // conv | attention | norm | linear
  std::uint64_t macs = 0;
  std::uint64_t flops = 0;
  std::uint64_t params = 0;
};

struct CostReport {
  std::vector<CostEntry> entries;
  std::uint64_t total_macs = 0;
  std::uint64_t total_flops = 0;
  std::uint64_t total_params = 0;

  // Sum of FLOPs over attention entries.
  std::uint64_t attention_flops() const;
};

CostReport count_cost(const ModelConfig& cfg);

void write_cost_csv(const std::filesystem::path& path, const CostReport& report);
std::string format_cost_table(const CostReport& report);

}  // namespace vitpad
