// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "vitpad/evalkit.hpp"
#include "vitpad/rng.hpp"

using namespace vitpad;

namespace {

std::vector<ScoredSample> make_scores(const std::vector<double>& attacks, const std::vector<double>& bonafide) {
  std::vector<ScoredSample> out;
  for (double s : attacks) out.push_back({s, Label::attack});
  for (double s : bonafide) out.push_back({s, Label::bona_fide});
  return out;
}

std::string two_dp(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

// |FAR - FRR| in percent at threshold t, counted directly.
double eer_gap(const std::vector<ScoredSample>& s, double t) {
  double a = 0, aa = 0, b = 0, br = 0;
  for (const auto& x : s) {
    if (x.label == Label::attack) {
      a += 1;
      aa += x.score >= t;
    } else {
      b += 1;
      br += x.score < t;
    }
  }
  return std::abs(aa / a - br / b);
}

}  // namespace

TEST_CASE("ACER of APCER 1.98 and BPCER 0.40 is 1.19") {
  CHECK(two_dp(acer_from(1.98, 0.40)) == "1.19");
  // Same operating point through the counter: 99 of 5000 attacks accepted,
  // 2 of 500 bona fide rejected.
  std::vector<ScoredSample> s;
  for (int i = 0; i < 5000; ++i) s.push_back({i < 99 ? 0.9 : 0.1, Label::attack});
  for (int i = 0; i < 500; ++i) s.push_back({i < 2 ? 0.1 : 0.9, Label::bona_fide});
  auto r = compute_metrics(s, 0.5);
  CHECK(two_dp(r.apcer) == "1.98");
  CHECK(two_dp(r.bpcer) == "0.40");
  CHECK(two_dp(r.acer) == "1.19");
}

TEST_CASE("hand-counted confusion: 1 of 10 attacks accepted, 2 of 10 bona fide rejected") {
  std::vector<double> attacks(10, 0.2), bonafide(10, 0.8);
  attacks[3] = 0.7;
  bonafide[1] = bonafide[7] = 0.3;
  auto r = compute_metrics(make_scores(attacks, bonafide), 0.5);
  CHECK(r.attacks_accepted == 1);
  CHECK(r.attacks_rejected == 9);
  CHECK(r.bonafide_rejected == 2);
  CHECK(r.bonafide_accepted == 8);
  CHECK(r.apcer == 10.0);
  CHECK(r.bpcer == 20.0);
  CHECK(r.acer == 15.0);
  CHECK(r.hter == 15.0);
}

TEST_CASE("perfect separation gives zero error everywhere") {
  auto r = compute_metrics(make_scores({0.1, 0.2}, {0.8, 0.9}), 0.5);
  CHECK(r.apcer == 0.0);
  CHECK(r.bpcer == 0.0);
  CHECK(r.acer == 0.0);
  CHECK(r.hter == 0.0);
}

TEST_CASE("score equal to the threshold counts as bona fide") {
  auto r = compute_metrics(make_scores({0.5}, {0.5}), 0.5);
  CHECK(r.attacks_accepted == 1);
  CHECK(r.bonafide_accepted == 1);
}

TEST_CASE("single-class input is rejected") {
  CHECK_THROWS_AS(compute_metrics(make_scores({0.1, 0.2}, {}), 0.5), std::invalid_argument);
  CHECK_THROWS_AS(compute_metrics(make_scores({}, {0.9}), 0.5), std::invalid_argument);
  CHECK_THROWS_AS(select_threshold(make_scores({0.1}, {})), std::invalid_argument);
}

TEST_CASE("compute_metrics matches a brute-force recount on 1000 random score sets") {
  auto rng = make_stream(1, "metrics");
  for (int trial = 0; trial < 1000; ++trial) {
    const auto n = static_cast<std::size_t>(uniform_int(rng, 2, 60));
    std::vector<ScoredSample> s(n);
    for (std::size_t i = 0; i < n; ++i) {
      // coarse grid so ties with the threshold happen
      s[i].score = static_cast<double>(uniform_int(rng, 0, 20)) / 20.0;
      s[i].label = i == 0 ? Label::attack : i == 1 ? Label::bona_fide
                          : (uniform01(rng) < 0.5 ? Label::attack : Label::bona_fide);
    }
    const double t = static_cast<double>(uniform_int(rng, 0, 20)) / 20.0;
    std::size_t aa = 0, ar = 0, ba = 0, br = 0;
    for (const auto& x : s) {
      if (x.label == Label::attack) (x.score >= t ? aa : ar)++;
      else (x.score >= t ? ba : br)++;
    }
    const auto r = compute_metrics(s, t);
    CHECK(r.attacks_accepted == aa);
    CHECK(r.attacks_rejected == ar);
    CHECK(r.bonafide_accepted == ba);
    CHECK(r.bonafide_rejected == br);
    CHECK(r.apcer == 100.0 * static_cast<double>(aa) / static_cast<double>(aa + ar));
    CHECK(r.bpcer == 100.0 * static_cast<double>(br) / static_cast<double>(ba + br));
    CHECK(r.acer == (r.apcer + r.bpcer) / 2.0);
  }
}

TEST_CASE("threshold for separated dev scores is the midpoint 0.5") {
  CHECK(select_threshold(make_scores({0.1, 0.2}, {0.8, 0.9})) == doctest::Approx(0.5));
}

TEST_CASE("threshold minimises |FAR - FRR| over every midpoint; ties go low") {
  auto rng = make_stream(2, "sweep");
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<ScoredSample> s;
    const auto n = uniform_int(rng, 2, 40);
    for (std::int64_t i = 0; i < n; ++i)
      s.push_back({static_cast<double>(uniform_int(rng, 0, 30)) / 30.0,
                   i == 0 ? Label::attack : i == 1 ? Label::bona_fide
                          : (uniform01(rng) < 0.5 ? Label::attack : Label::bona_fide)});
    std::set<double> distinct;
    for (const auto& x : s) distinct.insert(x.score);
    if (distinct.size() < 2) continue;
    std::vector<double> d(distinct.begin(), distinct.end());
    double best_gap = 1e9, best_t = 0;
    for (std::size_t i = 0; i + 1 < d.size(); ++i) {
      const double t = d[i] + (d[i + 1] - d[i]) / 2.0;
      const double g = eer_gap(s, t);
      if (g < best_gap - 1e-12) {
        best_gap = g;
        best_t = t;
      }
    }
    CHECK(select_threshold(s) == best_t);
  }
}

TEST_CASE("symmetric overlapping scores put the threshold at the crossing") {
  // Mirror images around 0.5: one attack above, one bona fide below.
  auto s = make_scores({0.1, 0.2, 0.3, 0.6}, {0.4, 0.7, 0.8, 0.9});
  const double t = select_threshold(s);
  CHECK(eer_gap(s, t) == 0.0);
  CHECK(t == doctest::Approx(0.5));
}

TEST_CASE("shifting every score shifts the threshold; HTER unchanged") {
  auto rng = make_stream(3, "shift");
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<ScoredSample> s;
    for (int i = 0; i < 30; ++i)
      s.push_back({static_cast<double>(uniform_int(rng, 0, 64)) / 64.0, i % 2 ? Label::attack : Label::bona_fide});
    auto shifted = s;
    const double c = 0.25;  // exact in binary, keeps the sums exact
    for (auto& x : shifted) x.score += c;
    const double t = select_threshold(s), ts = select_threshold(shifted);
    CHECK(ts == doctest::Approx(t + c).epsilon(1e-12));
    CHECK(compute_metrics(shifted, ts).hter == compute_metrics(s, t).hter);
  }
}

TEST_CASE("HTER is invariant under strictly monotone transforms with re-selected threshold") {
  auto rng = make_stream(4, "mono");
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ScoredSample> dev;
    for (int i = 0; i < 40; ++i) dev.push_back({uniform01(rng), i % 3 ? Label::attack : Label::bona_fide});
    auto transformed = dev;
    for (auto& x : transformed) x.score = std::exp(3 * x.score) - 7;
    const auto a = compute_metrics(dev, select_threshold(dev));
    const auto b = compute_metrics(transformed, select_threshold(transformed));
    CHECK(a.hter == b.hter);
  }
}

TEST_CASE("report CSV layout") {
  auto path = std::filesystem::temp_directory_path() / "vitpad_report.csv";
  MetricReport r;
  r.threshold = 0.5;
  r.apcer = 10;
  r.bpcer = 20;
  r.acer = 15;
  r.hter = 15;
  write_report_csv(path, "run0", r);
  std::ifstream is(path);
  std::string header, row;
  std::getline(is, header);
  std::getline(is, row);
  CHECK(header == "run_id,threshold,apcer,bpcer,acer,hter");
  CHECK(row == "run0,0.500000,10.000000,20.000000,15.000000,15.000000");
}
