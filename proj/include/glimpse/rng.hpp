// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The GLIMPSE Engine Authors

#pragma once

#include <cstdint>

namespace glimpse {

// Portable generator used for every synthetic trace so that a seed produces
// the same bytes on every platform.
//
// State update is xorshift64* (Vigna 2014):
//   x ^= x >> 12; x ^= x << 25; x ^= x >> 27; out = x * 0x2545F4914F6CDD1D
// Seeds are expanded with one SplitMix64 step (increment 0x9E3779B97F4A7C15,
// multipliers 0xBF58476D1CE4E5B9 and 0x94D049BB133111EB) so nearby seeds give
// unrelated streams and a zero state is never produced.
//
// Distributions are implemented here rather than taken from <random>, whose
// distribution algorithms are implementation-defined. They use only IEEE
// basic arithmetic (no libm calls) so results are bit-identical everywhere.
class XorShift64Star {
 public:
  explicit XorShift64Star(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64() noexcept;

  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound) noexcept;

  /// Approximate standard normal: Irwin-Hall sum of 12 uniforms minus 6.
  /// Bounded to [-6, 6]; adequate for synthetic noise.
  double normal() noexcept;

 private:
  std::uint64_t state_;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace glimpse
