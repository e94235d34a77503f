// SPDX-License-Identifier: Apache-2.0

#include "vitpad/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "vitpad/cost.hpp"
#include "vitpad/evalkit.hpp"
#include "vitpad/gradcheck.hpp"
#include "vitpad/model.hpp"
#include "vitpad/msmhsa.hpp"
#include "vitpad/ops.hpp"

namespace vitpad {
namespace {

Tensord random_tensor(Shape shape, Rng& rng) {
  Tensord t(std::move(shape));
  for (auto& v : t.data()) v = uniform(rng, -1.0, 1.0);
  return t;
}

CheckResult check(std::string name, const std::function<std::string()>& body) {
  try {
    auto failure = body();
    return {std::move(name), failure.empty(), failure.empty() ? "ok" : failure};
  } catch (const std::exception& e) {
    return {std::move(name), false, std::string("exception: ") + e.what()};
  }
}

std::string grad_failure(const GradCheckResult& r, double tol) {
  if (r.max_rel_error < tol) return {};
  std::ostringstream os;
  os << "max rel error " << r.max_rel_error << " at " << r.worst_input;
  return os.str();
}

}  // namespace

std::vector<CheckResult> run_selftest() {
  std::vector<CheckResult> out;
  auto rng = make_stream(20240601, "selftest");

  out.push_back(check("gradient: matmul/conv2d/softmax/layer_norm/gelu", [&] {
    std::string fail;
    auto r = gradcheck([](const std::vector<Tensord>& in) { return sum(mul(matmul(in[0], in[1]), matmul(in[0], in[1]))); },
                       {random_tensor({3, 4}, rng), random_tensor({4, 2}, rng)});
    if (fail = grad_failure(r, 1e-4); !fail.empty()) return "matmul " + fail;
    auto w = random_tensor({4, 3, 3, 3}, rng);
    r = gradcheck([&](const std::vector<Tensord>& in) { auto y = conv2d(in[0], in[1], in[2], 1, 1); return sum(mul(y, y)); },
                  {random_tensor({2, 3, 8, 8}, rng), w, random_tensor({4}, rng)});
    if (fail = grad_failure(r, 1e-4); !fail.empty()) return "conv2d " + fail;
    auto weights = random_tensor({7}, rng);
    r = gradcheck([&](const std::vector<Tensord>& in) { return sum(mul(softmax(in[0], 0), weights)); },
                  {random_tensor({7}, rng)});
    if (fail = grad_failure(r, 1e-4); !fail.empty()) return "softmax " + fail;
    auto target = random_tensor({2, 5, 3}, rng);
    r = gradcheck([&](const std::vector<Tensord>& in) {
                    return sum(mul(layer_norm(in[0], 1, in[1], in[2], 1e-5), target));
                  },
                  {random_tensor({2, 5, 3}, rng), random_tensor({5}, rng), random_tensor({5}, rng)});
    if (fail = grad_failure(r, 1e-4); !fail.empty()) return "layer_norm " + fail;
    r = gradcheck([](const std::vector<Tensord>& in) { return sum(gelu(in[0])); },
                  {Tensord({3}, std::vector<double>{-2.0, 0.5, 3.0})});
    return fail = grad_failure(r, 1e-4), fail.empty() ? fail : "gelu " + fail;
  }));

  out.push_back(check("softmax rows sum to one", [&] {
    auto y = softmax(random_tensor({6, 9}, rng), 1);
    for (std::size_t i = 0; i < 6; ++i) {
      double s = 0;
      for (std::size_t j = 0; j < 9; ++j) s += y[i * 9 + j];
      if (std::abs(s - 1.0) > 1e-10) return std::string("row sum off by ") + std::to_string(s - 1.0);
    }
    return std::string{};
  }));

  out.push_back(check("patch accounting N = T * l^2", [&] {
    for (std::size_t T : {1, 2, 4, 8})
      for (std::size_t l : {1, 2, 4}) {
        auto p = partition_patches(Tensord({T, 2, 4, 4}), l);
        if (p.tokens.dim(0) != T * l * l) return "wrong N for T=" + std::to_string(T) + " l=" + std::to_string(l);
      }
    return std::string{};
  }));

  out.push_back(check("partition/reassemble round trip is bitwise", [&] {
    auto x = random_tensor({3, 4, 8, 8}, rng);
    for (std::size_t l : {1, 2, 4, 8}) {
      auto back = unpartition_patches(partition_patches(x, l));
      if (!std::equal(back.data().begin(), back.data().end(), x.data().begin()))
        return "mismatch at l=" + std::to_string(l);
    }
    return std::string{};
  }));

  out.push_back(check("logits invariant to frame permutation", [&] {
    ModelConfig cfg;
    cfg.frames = 3;
    cfg.height = cfg.width = 16;
    cfg.channels = 6;
    cfg.depth = 1;
    cfg.seed = 3;
    auto params = init_params<double>(cfg);
    auto clip = random_tensor({3, 3, 16, 16}, rng);
    const std::size_t frame = 3 * 16 * 16;
    Tensord permuted(clip.shape());
    const std::size_t order[3] = {2, 0, 1};
    for (std::size_t t = 0; t < 3; ++t)
      std::copy_n(clip.data().begin() + static_cast<std::ptrdiff_t>(order[t] * frame), frame,
                  permuted.data().begin() + static_cast<std::ptrdiff_t>(t * frame));
    auto a = forward(clip, params, cfg);
    auto b = forward(permuted, params, cfg);
    for (std::size_t k = 0; k < 2; ++k)
      if (std::abs(a[k] - b[k]) > 1e-6) return std::string("logit moved under permutation");
    return std::string{};
  }));

  out.push_back(check("ACER = (APCER + BPCER) / 2 on random reports", [&] {
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<ScoredSample> s;
      for (int i = 0; i < 40; ++i)
        s.push_back({uniform01(rng), i % 2 ? Label::bona_fide : Label::attack});
      auto r = compute_metrics(s, uniform01(rng));
      if (r.acer != (r.apcer + r.bpcer) / 2.0) return std::string("identity broken");
    }
    return std::string{};
  }));

  out.push_back(check("parameter count matches cost counter", [&] {
    ModelConfig cfg;
    auto params = init_params<float>(cfg);
    auto cost = count_cost(cfg);
    if (params.count() != cost.total_params)
      return "inventory " + std::to_string(params.count()) + " vs counter " + std::to_string(cost.total_params);
    return std::string{};
  }));

  return out;
}

}  // namespace vitpad
