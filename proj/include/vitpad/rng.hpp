// SPDX-License-Identifier: Apache-2.0
//
// Seed plumbing. One base seed fans out into named streams ("data", "init",
// "sampling", ...) so changing one consumer never perturbs another.

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace vitpad {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

// Deterministic child seed of `base` for the stream called `name`, optionally
// indexed (e.g. per clip).
std::uint64_t derive_seed(std::uint64_t base, std::string_view name, std::uint64_t index = 0);

inline Rng make_stream(std::uint64_t base, std::string_view name, std::uint64_t index = 0) {
  return Rng(derive_seed(base, name, index));
}

// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
double uniform01(Rng& rng);
double uniform(Rng& rng, double lo, double hi);
// Integer in [lo, hi] inclusive.
std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi);
// Box-Muller standard normal; platform-independent unlike std::normal_distribution.
double normal(Rng& rng);
// Normal(0, sigma) resampled until |x| <= 2 sigma.
double truncated_normal(Rng& rng, double sigma);

}  // namespace vitpad
