// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DEPSCREEN_RANDOM_H_
#define DEPSCREEN_RANDOM_H_

#include <cstdint>
#include <random>
#include <string_view>

namespace depscreen {

// Seeded generator whose outputs are identical across standard libraries.
// std::mt19937_64's sequence is fixed by the standard; the distribution
// adaptors in <random> are not, so conversions are done here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  // Standard normal via Box-Muller.
  double normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// 64-bit FNV-1a; stable hashing for tokens, split assignment and seeds.
std::uint64_t fnv1a64(std::string_view bytes);

// Derives an independent stream seed from a base seed and a tag.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag);

}  // namespace depscreen

#endif  // DEPSCREEN_RANDOM_H_
