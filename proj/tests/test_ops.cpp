// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <numeric>

#include "test_support.hpp"
#include "vitpad/ops.hpp"

using namespace vitpad;
using testing::bitwise_equal;
using testing::random_tensor;

TEST_CASE("matmul: identity and selector row") {
  Tensord I({2, 2}, {1, 0, 0, 1});
  Tensord m({2, 2}, {1, 2, 3, 4});
  CHECK(bitwise_equal(matmul(I, m), m));
  auto r = matmul(Tensord({1, 2}, {1, 0}), Tensord({2, 1}, {5, 7}));
  CHECK(r.shape() == Shape{1, 1});
  CHECK(r[0] == 5);
}

TEST_CASE("matmul: batched with broadcast from 1") {
  auto rng = make_stream(1, "t");
  auto a = random_tensor({3, 2, 4}, rng);
  auto b = random_tensor({1, 4, 5}, rng);
  auto c = matmul(a, b);
  REQUIRE(c.shape() == Shape{3, 2, 5});
  for (std::size_t n = 0; n < 3; ++n)
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 5; ++j) {
        double s = 0;
        for (std::size_t k = 0; k < 4; ++k) s += a.at({n, i, k}) * b.at({0, k, j});
        CHECK(c.at({n, i, j}) == doctest::Approx(s).epsilon(1e-12));
      }
}

TEST_CASE("matmul: mismatch names both shapes") {
  try {
    matmul(Tensord({2, 3}), Tensord({4, 2}));
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2,3]") != std::string::npos);
    CHECK(msg.find("[4,2]") != std::string::npos);
  }
  CHECK_THROWS_AS(matmul(Tensord({2, 2, 3}), Tensord({3, 3, 2})), ShapeError);
}

TEST_CASE("conv2d: scalar kernel doubles, ones kernel sum-pools") {
  auto rng = make_stream(2, "t");
  auto x = random_tensor({1, 1, 3, 3}, rng);
  auto y = conv2d(x, Tensord({1, 1, 1, 1}, 2.0), Tensord({1}, 0.0), 1, 0);
  for (std::size_t i = 0; i < 9; ++i) CHECK(y[i] == 2 * x[i]);
  auto p = conv2d(Tensord({1, 1, 4, 4}, 1.0), Tensord({1, 1, 2, 2}, 1.0), Tensord({1}, 0.0), 2, 0);
  CHECK(p.shape() == Shape{1, 1, 2, 2});
  for (double v : p.data()) CHECK(v == 4.0);
}

TEST_CASE("conv2d: kernel larger than padded input is an error") {
  CHECK_THROWS_AS(conv2d(Tensord({1, 1, 2, 2}), Tensord({1, 1, 5, 5}), Tensord({1}), 1, 1), ShapeError);
  CHECK_THROWS_AS(conv2d(Tensord({1, 2, 4, 4}), Tensord({1, 1, 3, 3}), Tensord({1}), 1, 1), ShapeError);
  CHECK_THROWS_AS(conv2d(Tensord({1, 1, 4, 4}), Tensord({1, 1, 3, 3}), Tensord({1}), 0, 1), std::invalid_argument);
}

namespace {

Tensord naive_conv(const Tensord& x, const Tensord& w, const Tensord& b, std::size_t stride, std::size_t pad) {
  const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t O = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const std::size_t Ho = (H + 2 * pad - kh) / stride + 1, Wo = (W + 2 * pad - kw) / stride + 1;
  Tensord y({N, O, Ho, Wo});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t o = 0; o < O; ++o)
      for (std::size_t i = 0; i < Ho; ++i)
        for (std::size_t j = 0; j < Wo; ++j) {
          double s = b[o];
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t u = 0; u < kh; ++u)
              for (std::size_t v = 0; v < kw; ++v) {
                const long yy = static_cast<long>(i * stride + u) - static_cast<long>(pad);
                const long xx = static_cast<long>(j * stride + v) - static_cast<long>(pad);
                if (yy < 0 || xx < 0 || yy >= static_cast<long>(H) || xx >= static_cast<long>(W)) continue;
                s += x.at({n, c, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx)}) * w.at({o, c, u, v});
              }
          y.at({n, o, i, j}) = s;
        }
  return y;
}

}  // namespace

TEST_CASE("conv2d agrees with a nested-loop oracle on random 8x8 inputs") {
  auto rng = make_stream(3, "t");
  struct Case { std::size_t cin, cout, k, stride, pad; };
  for (auto c : {Case{3, 4, 3, 1, 1}, Case{2, 5, 3, 2, 0}, Case{1, 2, 8, 8, 0}, Case{3, 3, 2, 2, 0},
                 Case{4, 2, 1, 1, 0}, Case{2, 2, 5, 1, 2}}) {
    auto x = random_tensor({2, c.cin, 8, 8}, rng);
    auto w = random_tensor({c.cout, c.cin, c.k, c.k}, rng);
    auto b = random_tensor({c.cout}, rng);
    auto fast = conv2d(x, w, b, c.stride, c.pad);
    auto slow = naive_conv(x, w, b, c.stride, c.pad);
    REQUIRE(fast.shape() == slow.shape());
    CHECK(testing::max_abs_diff(fast, slow) < 1e-6);
  }
}

TEST_CASE("softmax: symmetry, overflow safety, normalisation") {
  auto s = softmax(Tensord({2}, {0, 0}), 0);
  CHECK(s[0] == 0.5);
  CHECK(s[1] == 0.5);
  auto big = softmax(Tensord({2}, {1000, 0}), 0);
  CHECK(big[0] == 1.0);
  CHECK(big[1] == 0.0);
  CHECK(std::isfinite(big[1]));

  auto rng = make_stream(4, "t");
  auto v = softmax(random_tensor({7}, rng, -3, 3), 0);
  double total = 0;
  for (double p : v.data()) {
    CHECK(p >= 0);
    total += p;
  }
  CHECK(std::abs(total - 1.0) < 1e-12);

  auto m = softmax(random_tensor({3, 5, 4}, rng, -5, 5), 1);
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t c = 0; c < 4; ++c) {
      double t = 0;
      for (std::size_t b = 0; b < 5; ++b) t += m.at({a, b, c});
      CHECK(std::abs(t - 1.0) < 1e-10);
    }
}

TEST_CASE("layer_norm: constant input, two-point standardisation, zero mean") {
  Tensord g({4}, 1.0), b({4}, 0.0);
  auto c = layer_norm(Tensord({4}, {3, 3, 3, 3}), 0, g, b, 1e-5);
  for (double v : c.data()) CHECK(v == 0.0);
  auto two = layer_norm(Tensord({2}, {1, 3}), 0, Tensord({2}, 1.0), Tensord({2}, 0.0), 1e-14);
  CHECK(two[0] == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(two[1] == doctest::Approx(1.0).epsilon(1e-12));

  auto rng = make_stream(5, "t");
  auto x = random_tensor({2, 6, 3, 3}, rng, -4, 4);
  auto y = layer_norm(x, 1, Tensord({6}, 1.0), Tensord({6}, 0.0), 1e-5);
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) {
        double m = 0;
        for (std::size_t c = 0; c < 6; ++c) m += y.at({n, c, i, j});
        CHECK(std::abs(m / 6) < 1e-6);
      }
  CHECK_THROWS_AS(layer_norm(x, 1, Tensord({5}, 1.0), Tensord({6}, 0.0), 1e-5), ShapeError);
}

TEST_CASE("elementwise ops: no implicit broadcasting") {
  CHECK_THROWS_AS(add(Tensord({2, 3}), Tensord({3})), ShapeError);
  CHECK_THROWS_AS(mul(Tensord({2}), Tensord({3})), ShapeError);
  CHECK_THROWS_AS(add_bias(Tensord({2, 3}), Tensord({2}), 1), ShapeError);
  auto y = add_bias(Tensord({2, 3}, 1.0), Tensord({3}, {1, 2, 3}), 1);
  CHECK(y.at({1, 2}) == 4.0);
  auto s = scale(Tensord({2}, {1, -2}), 3.0);
  CHECK(s[1] == -6.0);
  auto r = relu(Tensord({3}, {-1, 0, 2}));
  CHECK(r[0] == 0.0);
  CHECK(r[2] == 2.0);
  CHECK(gelu(Tensord({1}, {0.0}))[0] == 0.0);
  CHECK(gelu(Tensord({1}, {1.0}))[0] == doctest::Approx(0.8413447460685429).epsilon(1e-12));
}

TEST_CASE("concat two 1x2 rows gives 2x2; split/concat round trip is bitwise") {
  auto c = concat<double>({Tensord({1, 2}, {1, 2}), Tensord({1, 2}, {3, 4})}, 0);
  CHECK(c.shape() == Shape{2, 2});
  CHECK(c.at({1, 0}) == 3);

  auto rng = make_stream(6, "t");
  auto x = random_tensor({2, 6, 3}, rng);
  auto parts = split(x, 1, 3);
  REQUIRE(parts.size() == 3);
  for (const auto& p : parts) CHECK(p.shape() == Shape{2, 2, 3});
  CHECK(bitwise_equal(concat(parts, 1), x));
  CHECK_THROWS_AS(split(x, 1, 4), ShapeError);
  CHECK_THROWS_AS(concat<double>({Tensord({1, 2}), Tensord({1, 3})}, 0), ShapeError);
}

TEST_CASE("reshape/transpose/permute round trips are bitwise") {
  auto rng = make_stream(7, "t");
  auto x = random_tensor({2, 3, 4}, rng);
  auto r = reshape(x, {6, 4});
  CHECK(r.shape() == Shape{6, 4});
  CHECK(std::equal(r.data().begin(), r.data().end(), x.data().begin()));
  CHECK(bitwise_equal(reshape(r, {2, 3, 4}), x));
  CHECK_THROWS_AS(reshape(x, {5, 5}), ShapeError);
  auto t = transpose(x, 0, 2);
  CHECK(t.shape() == Shape{4, 3, 2});
  CHECK(t.at({3, 1, 0}) == x.at({0, 1, 3}));
  CHECK(bitwise_equal(transpose(t, 0, 2), x));
  auto p = permute(x, {1, 2, 0});
  CHECK(p.shape() == Shape{3, 4, 2});
  CHECK(bitwise_equal(permute(p, {2, 0, 1}), x));
}

TEST_CASE("mean over axes removes them") {
  Tensord x({2, 3}, {1, 2, 3, 4, 5, 6});
  auto m0 = mean(x, {0});
  CHECK(m0.shape() == Shape{3});
  CHECK(m0[0] == 2.5);
  auto all = mean(x, {0, 1});
  CHECK(all.rank() == 0);
  CHECK(all.item() == 3.5);
}

TEST_CASE("cross_entropy matches -log softmax") {
  Tensord z({2}, {0.3, -1.2});
  const double lse = std::log(std::exp(0.3) + std::exp(-1.2));
  CHECK(cross_entropy(z, 0).item() == doctest::Approx(lse - 0.3).epsilon(1e-12));
  CHECK(cross_entropy(z, 1).item() == doctest::Approx(lse + 1.2).epsilon(1e-12));
  CHECK_THROWS(cross_entropy(z, 2));
}
