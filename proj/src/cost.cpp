// SPDX-License-Identifier: Apache-2.0

#include "vitpad/cost.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace vitpad {
namespace {

using u64 = std::uint64_t;

CostEntry conv_entry(std::string name, u64 cout, u64 cin, u64 k, u64 ho, u64 wo, u64 frames) {
  const u64 macs = cout * cin * k * k * ho * wo * frames;
  return {std::move(name), "conv", macs, 2 * macs, cout * cin * k * k + cout};
}

}  // namespace

std::uint64_t CostReport::attention_flops() const {
  u64 total = 0;
  for (const auto& e : entries)
    if (e.kind == "attention") total += e.flops;
  return total;
}

CostReport count_cost(const ModelConfig& cfg) {
  cfg.validate();
  const u64 T = cfg.frames, C = cfg.channels;
  const u64 Hm = cfg.map_height(), Wm = cfg.map_width();
  const u64 k = cfg.cte_stride;
  CostReport r;
  r.entries.push_back(conv_entry("cte", C, 3, k, Hm, Wm, T));
  for (std::size_t i = 0; i < cfg.depth; ++i) {
    const std::string p = "layers." + std::to_string(i) + ".";
    for (const char* name : {"q", "k", "v"}) r.entries.push_back(conv_entry(p + name, C, C, 3, Hm, Wm, T));
    const u64 heads = cfg.scales.head_count();
    for (u64 h = 0; h < heads; ++h) {
      const u64 l = cfg.scales.scales[h];
      const u64 n = T * l * l;
      const u64 d = (C / heads) * (Hm / l) * (Wm / l);
      // scores q k^T and aggregation alpha v: N^2 D MACs each
      const u64 macs = 2 * n * n * d;
      r.entries.push_back({p + "attn.head" + std::to_string(h), "attention", macs, 2 * macs + n * n, 0});
    }
    r.entries.push_back({p + "norm", "norm", 0, 0, 2 * C});
    r.entries.push_back(conv_entry(p + "ffn.fc1", C * cfg.ffn_ratio, C, 1, Hm, Wm, T));
    r.entries.push_back(conv_entry(p + "ffn.fc2", C, C * cfg.ffn_ratio, 1, Hm, Wm, T));
  }
  const u64 K = cfg.num_classes;
  r.entries.push_back({"head", "linear", K * C, 2 * K * C, K * C + K});
  for (const auto& e : r.entries) {
    r.total_macs += e.macs;
    r.total_flops += e.flops;
    r.total_params += e.params;
  }
  return r;
}

void write_cost_csv(const std::filesystem::path& path, const CostReport& report) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "layer,kind,macs,flops,params\n";
  for (const auto& e : report.entries)
    os << e.layer << ',' << e.kind << ',' << e.macs << ',' << e.flops << ',' << e.params << '\n';
  os << "total,all," << report.total_macs << ',' << report.total_flops << ',' << report.total_params << '\n';
}

std::string format_cost_table(const CostReport& report) {
  std::ostringstream os;
  os << "# flops = 2 * macs (conv, matmul); attention heads add N^2 softmax flops\n";
  os << std::left << std::setw(22) << "layer" << std::setw(11) << "kind" << std::right << std::setw(14) << "macs"
     << std::setw(14) << "flops" << std::setw(10) << "params" << '\n';
  auto row = [&](const std::string& a, const std::string& b, u64 m, u64 f, u64 p) {
    os << std::left << std::setw(22) << a << std::setw(11) << b << std::right << std::setw(14) << m << std::setw(14)
       << f << std::setw(10) << p << '\n';
  };
  for (const auto& e : report.entries) row(e.layer, e.kind, e.macs, e.flops, e.params);
  row("total", "all", report.total_macs, report.total_flops, report.total_params);
  return os.str();
}

}  // namespace vitpad
