#pragma once

#include <cstdint>
#include <random>

#include "qchunk/types.hpp"

namespace qchunk {

// Mixes a master seed with a salt to derive independent stream seeds.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t salt);

// Deterministic RNG with fully specified draw algorithms. The standard
// <random> distributions are implementation-defined, which would break
// shared-stream equality tests, so uniform/normal/int draws are spelled
// out here on top of a mt19937_64 word source.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller without caching: exactly two words per
  // draw, so interleaved streams stay reproducible.
  double normal();

  // Uniform integer in [0, n), rejection sampled (no modulo bias).
  int uniform_int(int n);
  long uniform_long(long n);

  // Derives an independent stream; advances this generator by one word.
  Rng fork(std::uint64_t salt) { return Rng(derive_seed(next_u64(), salt)); }

 private:
  std::mt19937_64 gen_;
};

// Row-by-row fills so draw order is part of the contract.
void fill_normal(Matrix& m, Rng& rng);
void fill_uniform(Matrix& m, Rng& rng, double lo, double hi);

}  // namespace qchunk
