// SPDX-License-Identifier: Apache-2.0
//
// Reference multi-scale attention written with explicit loops.

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "vitpad/tensor.hpp"

namespace testing {

using vitpad::Tensord;

// Straight-line reference: reads Q/K/V maps by explicit index arithmetic and
// loops over every (m, n) pair. Shares no code with the library beyond Tensor.
inline Tensord brute_force_msmhsa(const Tensord& Q, const Tensord& K, const Tensord& V,
                                  const std::vector<std::size_t>& scales) {
  const std::size_t T = Q.dim(0), C = Q.dim(1), H = Q.dim(2), W = Q.dim(3);
  const std::size_t heads = scales.size(), Ch = C / heads;
  Tensord out({T, C, H, W}, 0.0);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t l = scales[h], ph = H / l, pw = W / l, N = T * l * l, D = Ch * ph * pw;
    // token m = (t, gr, gc); element e = (c, y, x) inside the cell
    auto elem = [&](const Tensord& M, std::size_t m, std::size_t e) {
      const std::size_t t = m / (l * l), gr = (m % (l * l)) / l, gc = m % l;
      const std::size_t c = e / (ph * pw), y = (e % (ph * pw)) / pw, x = e % pw;
      return M.at({t, h * Ch + c, gr * ph + y, gc * pw + x});
    };
    for (std::size_t m = 0; m < N; ++m) {
      std::vector<double> score(N);
      double mx = -1e300;
      for (std::size_t n = 0; n < N; ++n) {
        double s = 0;
        for (std::size_t e = 0; e < D; ++e) s += elem(Q, m, e) * elem(K, n, e);
        score[n] = s / std::sqrt(static_cast<double>(D));
        mx = std::max(mx, score[n]);
      }
      double z = 0;
      for (auto& s : score) z += (s = std::exp(s - mx));
      const std::size_t t = m / (l * l), gr = (m % (l * l)) / l, gc = m % l;
      for (std::size_t e = 0; e < D; ++e) {
        double acc = 0;
        for (std::size_t n = 0; n < N; ++n) acc += score[n] / z * elem(V, n, e);
        const std::size_t c = e / (ph * pw), y = (e % (ph * pw)) / pw, x = e % pw;
        out.at({t, h * Ch + c, gr * ph + y, gc * pw + x}) = acc;
      }
    }
  }
  return out;
}

}  // namespace testing
