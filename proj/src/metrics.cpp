// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "vitpad/evalkit.hpp"

namespace vitpad {

double acer_from(double apcer, double bpcer) { return (apcer + bpcer) / 2.0; }

MetricReport compute_metrics(std::span<const ScoredSample> scores, double threshold) {
  MetricReport r;
  r.threshold = threshold;
  for (const auto& s : scores) {
    const bool accepted = s.score >= threshold;
    if (s.label == Label::attack)
      ++(accepted ? r.attacks_accepted : r.attacks_rejected);
    else
      ++(accepted ? r.bonafide_accepted : r.bonafide_rejected);
  }
  const std::size_t attacks = r.attacks_accepted + r.attacks_rejected;
  const std::size_t bonafide = r.bonafide_accepted + r.bonafide_rejected;
  if (attacks == 0 || bonafide == 0)
    throw std::invalid_argument("metrics need both attack and bona fide samples (got " +
                                std::to_string(attacks) + " attacks, " + std::to_string(bonafide) +
                                " bona fide)");
  r.apcer = 100.0 * static_cast<double>(r.attacks_accepted) / static_cast<double>(attacks);
  r.bpcer = 100.0 * static_cast<double>(r.bonafide_rejected) / static_cast<double>(bonafide);
  r.acer = acer_from(r.apcer, r.bpcer);
  // At the supplied operating point FAR and FRR are the attack-accept and
  // bona-fide-reject rates.
  r.hter = (r.apcer + r.bpcer) / 2.0;
  return r;
}

double select_threshold(std::span<const ScoredSample> dev) {
  std::vector<ScoredSample> sorted(dev.begin(), dev.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const ScoredSample& a, const ScoredSample& b) { return a.score < b.score; });
  std::int64_t attacks = 0, bonafide = 0;
  for (const auto& s : sorted) (s.label == Label::attack ? attacks : bonafide) += 1;
  if (attacks == 0 || bonafide == 0)
    throw std::invalid_argument("threshold selection needs both attack and bona fide dev samples");

  // Sweep the gaps between distinct scores. Below a gap: rejected.
  std::int64_t attacks_below = 0, bonafide_below = 0;
  double best = sorted.front().score;
  bool found = false;
  std::int64_t best_num = 0;  // |FAR - FRR| * attacks * bonafide, exact
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    (sorted[i].label == Label::attack ? attacks_below : bonafide_below) += 1;
    if (i + 1 == sorted.size() || sorted[i + 1].score == sorted[i].score) continue;
    const std::int64_t far_num = (attacks - attacks_below) * bonafide;
    const std::int64_t frr_num = bonafide_below * attacks;
    const std::int64_t diff = far_num > frr_num ? far_num - frr_num : frr_num - far_num;
    if (!found || diff < best_num) {
      found = true;
      best_num = diff;
      best = sorted[i].score + (sorted[i + 1].score - sorted[i].score) / 2.0;
    }
  }
  return best;
}

std::string format_fixed(double value, int digits) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << value;
  return os.str();
}

void write_report_csv(const std::filesystem::path& path, const std::string& run_id, const MetricReport& r) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "run_id,threshold,apcer,bpcer,acer,hter\n";
  os << run_id << ',' << format_fixed(r.threshold) << ',' << format_fixed(r.apcer) << ',' << format_fixed(r.bpcer)
     << ',' << format_fixed(r.acer) << ',' << format_fixed(r.hter) << '\n';
}

}  // namespace vitpad
