#include "qchunk/rng.hpp"

#include <cmath>
#include <numbers>

namespace qchunk {

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t salt) {
  // splitmix64 finalizer over master ^ golden-ratio-scaled salt.
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Rng::normal() {
  // u1 in (0, 1] keeps the log finite.
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

int Rng::uniform_int(int n) {
  return static_cast<int>(uniform_long(n));
}

long Rng::uniform_long(long n) {
  const std::uint64_t un = static_cast<std::uint64_t>(n);
  const std::uint64_t lim = UINT64_MAX - UINT64_MAX % un;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= lim);
  return static_cast<long>(x % un);
}

void fill_normal(Matrix& m, Rng& rng) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rng.normal();
}

void fill_uniform(Matrix& m, Rng& rng, double lo, double hi) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rng.uniform(lo, hi);
}

}  // namespace qchunk
