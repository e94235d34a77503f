// SPDX-License-Identifier: Apache-2.0
//
// Central finite differences (h = 1e-5, f64) against the taped backward pass
// for every differentiable primitive, five or more shapes each.

#include <doctest.h>

#include <cmath>

#include "test_support.hpp"
#include "vitpad/gradcheck.hpp"
#include "vitpad/ops.hpp"

using namespace vitpad;
using testing::random_tensor;

namespace {

constexpr double kTol = 1e-4;

// Contract the op output with fixed random weights so every output entry
// carries a distinct cotangent.
using Fn = std::function<Tensord(const std::vector<Tensord>&)>;

void expect_grad(const Fn& op, const std::vector<Tensord>& inputs, Rng& rng) {
  const auto probe = op(inputs);
  auto weights = random_tensor(probe.shape(), rng);
  auto loss = [&](const std::vector<Tensord>& in) { return sum(mul(op(in), weights)); };
  const auto r = gradcheck(loss, inputs);
  INFO("worst input " << r.worst_input << " rel err " << r.max_rel_error);
  CHECK(r.checked > 0);
  CHECK(r.max_rel_error < kTol);
}

}  // namespace

TEST_CASE("gradcheck flags a wrong gradient") {
  // relu at exactly 0 has a kink: the one-sided analytic value (0) disagrees
  // with the central difference (0.5).
  auto r = gradcheck([](const std::vector<Tensord>& in) { return sum(relu(in[0])); }, {Tensord({1}, {0.0})});
  CHECK(r.max_rel_error > 0.1);
}

TEST_CASE("matmul gradient") {
  auto rng = make_stream(10, "g");
  auto f = [](const std::vector<Tensord>& in) { return matmul(in[0], in[1]); };
  expect_grad(f, {random_tensor({3, 4}, rng), random_tensor({4, 2}, rng)}, rng);
  expect_grad(f, {random_tensor({1, 1}, rng), random_tensor({1, 3}, rng)}, rng);
  expect_grad(f, {random_tensor({2, 3, 4}, rng), random_tensor({2, 4, 2}, rng)}, rng);
  expect_grad(f, {random_tensor({3, 2, 5}, rng), random_tensor({1, 5, 3}, rng)}, rng);
  expect_grad(f, {random_tensor({1, 4, 3}, rng), random_tensor({2, 3, 3}, rng)}, rng);
  expect_grad(f, {random_tensor({2, 2, 3, 2}, rng), random_tensor({2, 1, 2, 4}, rng)}, rng);
}

TEST_CASE("sum(matmul) gradient for random 3x4 by 4x2") {
  auto rng = make_stream(11, "g");
  auto r = gradcheck([](const std::vector<Tensord>& in) { return sum(matmul(in[0], in[1])); },
                     {random_tensor({3, 4}, rng), random_tensor({4, 2}, rng)});
  CHECK(r.max_rel_error < kTol);
}

TEST_CASE("conv2d gradient") {
  auto rng = make_stream(12, "g");
  struct Case { Shape x, w; std::size_t stride, pad; };
  for (const auto& c : {Case{{2, 3, 8, 8}, {4, 3, 3, 3}, 1, 1}, Case{{1, 1, 5, 5}, {2, 1, 3, 3}, 2, 0},
                        Case{{2, 3, 8, 8}, {5, 3, 4, 4}, 4, 0}, Case{{1, 2, 4, 6}, {3, 2, 1, 1}, 1, 0},
                        Case{{3, 2, 4, 4}, {2, 2, 2, 3}, 1, 1}}) {
    auto f = [&](const std::vector<Tensord>& in) { return conv2d(in[0], in[1], in[2], c.stride, c.pad); };
    expect_grad(f, {random_tensor(c.x, rng), random_tensor(c.w, rng), random_tensor({c.w[0]}, rng)}, rng);
  }
}

TEST_CASE("softmax gradient") {
  auto rng = make_stream(13, "g");
  struct Case { Shape s; std::size_t axis; };
  for (const auto& c : {Case{{7}, 0}, Case{{3, 4}, 1}, Case{{3, 4}, 0}, Case{{2, 3, 5}, 1}, Case{{2, 2, 6}, 2},
                        Case{{1, 9}, 1}}) {
    expect_grad([&](const std::vector<Tensord>& in) { return softmax(in[0], c.axis); },
                {random_tensor(c.s, rng, -2, 2)}, rng);
  }
}

TEST_CASE("layer_norm gradient") {
  auto rng = make_stream(14, "g");
  struct Case { Shape s; std::size_t axis; };
  for (const auto& c : {Case{{5}, 0}, Case{{3, 4}, 1}, Case{{4, 3}, 0}, Case{{2, 6, 2, 2}, 1},
                        Case{{2, 3, 5}, 2}}) {
    const std::size_t n = c.s[c.axis];
    expect_grad([&](const std::vector<Tensord>& in) { return layer_norm(in[0], c.axis, in[1], in[2], 1e-5); },
                {random_tensor(c.s, rng, -2, 2), random_tensor({n}, rng), random_tensor({n}, rng)}, rng);
  }
}

TEST_CASE("add / sub / mul gradients") {
  auto rng = make_stream(15, "g");
  for (const Shape& s : {Shape{1}, Shape{4}, Shape{2, 3}, Shape{3, 1, 2}, Shape{2, 2, 2, 2}}) {
    expect_grad([](const std::vector<Tensord>& in) { return add(in[0], in[1]); },
                {random_tensor(s, rng), random_tensor(s, rng)}, rng);
    expect_grad([](const std::vector<Tensord>& in) { return sub(in[0], in[1]); },
                {random_tensor(s, rng), random_tensor(s, rng)}, rng);
    expect_grad([](const std::vector<Tensord>& in) { return mul(in[0], in[1]); },
                {random_tensor(s, rng), random_tensor(s, rng)}, rng);
    // Same tensor on both sides.
    expect_grad([](const std::vector<Tensord>& in) { return mul(in[0], in[0]); }, {random_tensor(s, rng)}, rng);
  }
}

TEST_CASE("add_bias and scale gradients") {
  auto rng = make_stream(16, "g");
  struct Case { Shape s; std::size_t axis; };
  for (const auto& c : {Case{{3}, 0}, Case{{2, 3}, 1}, Case{{2, 3}, 0}, Case{{2, 4, 3, 3}, 1}, Case{{3, 2, 5}, 2}}) {
    expect_grad([&](const std::vector<Tensord>& in) { return add_bias(in[0], in[1], c.axis); },
                {random_tensor(c.s, rng), random_tensor({c.s[c.axis]}, rng)}, rng);
    expect_grad([](const std::vector<Tensord>& in) { return scale(in[0], -0.7); }, {random_tensor(c.s, rng)}, rng);
  }
}

TEST_CASE("relu and gelu gradients") {
  auto rng = make_stream(17, "g");
  for (const Shape& s : {Shape{3}, Shape{2, 5}, Shape{4, 1, 3}, Shape{2, 2, 2}, Shape{7}}) {
    // Keep relu inputs away from the kink.
    auto x = random_tensor(s, rng, 0.1, 1.0);
    for (std::size_t i = 0; i < x.numel(); i += 2) x[i] = -x[i];
    expect_grad([](const std::vector<Tensord>& in) { return relu(in[0]); }, {x}, rng);
    expect_grad([](const std::vector<Tensord>& in) { return gelu(in[0]); }, {random_tensor(s, rng, -3, 3)}, rng);
  }
}

TEST_CASE("gelu gradient at -2, 0.5, 3") {
  auto r = gradcheck([](const std::vector<Tensord>& in) { return sum(gelu(in[0])); },
                     {Tensord({3}, {-2.0, 0.5, 3.0})});
  CHECK(r.max_rel_error < kTol);
}

TEST_CASE("reshape / transpose / permute gradients") {
  auto rng = make_stream(18, "g");
  struct Case { Shape s, r; std::vector<std::size_t> perm; };
  for (const auto& c : {Case{{6}, {2, 3}, {0}}, Case{{2, 3}, {3, 2}, {1, 0}}, Case{{2, 3, 4}, {4, 6}, {2, 0, 1}},
                        Case{{1, 2, 2, 3}, {12}, {3, 1, 0, 2}}, Case{{2, 2, 2}, {8}, {1, 2, 0}}}) {
    expect_grad([&](const std::vector<Tensord>& in) { return reshape(in[0], c.r); }, {random_tensor(c.s, rng)}, rng);
    expect_grad([&](const std::vector<Tensord>& in) { return permute(in[0], c.perm); }, {random_tensor(c.s, rng)},
                rng);
    if (c.s.size() >= 2)
      expect_grad([&](const std::vector<Tensord>& in) { return transpose(in[0], 0, c.s.size() - 1); },
                  {random_tensor(c.s, rng)}, rng);
  }
}

TEST_CASE("concat and split gradients") {
  auto rng = make_stream(19, "g");
  struct Case { Shape a, b; std::size_t axis; };
  for (const auto& c : {Case{{2}, {3}, 0}, Case{{1, 2}, {1, 2}, 0}, Case{{2, 1, 3}, {2, 4, 3}, 1},
                        Case{{2, 2}, {2, 5}, 1}, Case{{1, 2, 2, 1}, {1, 2, 2, 3}, 3}}) {
    expect_grad([&](const std::vector<Tensord>& in) { return concat<double>({in[0], in[1]}, c.axis); },
                {random_tensor(c.a, rng), random_tensor(c.b, rng)}, rng);
  }
  struct SplitCase { Shape s; std::size_t axis, parts; };
  for (const auto& c : {SplitCase{{6}, 0, 3}, SplitCase{{2, 4}, 1, 2}, SplitCase{{4, 3}, 0, 4},
                        SplitCase{{2, 6, 2}, 1, 3}, SplitCase{{3, 2, 2}, 2, 2}}) {
    // Weight the pieces differently so each piece's gradient is distinguishable.
    expect_grad(
        [&](const std::vector<Tensord>& in) {
          auto parts = split(in[0], c.axis, c.parts);
          auto acc = parts[0];
          for (std::size_t i = 1; i < parts.size(); ++i) acc = add(acc, scale(parts[i], 1.0 + static_cast<double>(i)));
          return mul(acc, acc);
        },
        {random_tensor(c.s, rng)}, rng);
  }
}

TEST_CASE("mean and sum gradients") {
  auto rng = make_stream(20, "g");
  struct Case { Shape s; std::vector<std::size_t> axes; };
  for (const auto& c : {Case{{5}, {0}}, Case{{2, 3}, {1}}, Case{{2, 3}, {0, 1}}, Case{{2, 3, 4}, {0, 2}},
                        Case{{1, 4, 2, 2}, {1, 2, 3}}}) {
    expect_grad([&](const std::vector<Tensord>& in) { return mean(in[0], c.axes); }, {random_tensor(c.s, rng)}, rng);
    expect_grad([&](const std::vector<Tensord>& in) { return sum(in[0]); }, {random_tensor(c.s, rng)}, rng);
  }
}

TEST_CASE("cross_entropy gradient") {
  auto rng = make_stream(21, "g");
  for (int i = 0; i < 5; ++i) {
    const std::size_t label = static_cast<std::size_t>(i % 2);
    auto r = gradcheck([&](const std::vector<Tensord>& in) { return cross_entropy(in[0], label); },
                       {random_tensor({2}, rng, -3, 3)});
    CHECK(r.max_rel_error < kTol);
  }
}
