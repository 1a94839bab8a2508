#ifndef MIRFS_RANDOM_HPP
#define MIRFS_RANDOM_HPP

// Portable random variates. The engine is std::mt19937_64, whose output
// sequence is fixed by the standard. The std:: distributions are not (their
// algorithms are implementation-defined), so the variates below are built
// directly on engine output to keep simulated paths identical everywhere.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace mirfs {

using Rng = std::mt19937_64;

/// Uniform on [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Standard normal by the Box–Muller transform (one variate per call).
inline double standard_normal(Rng& rng) {
  double u1 = 0.0;
  do {
    u1 = uniform01(rng);
  } while (u1 <= 0.0);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Child generator for replication `stream` of a run seeded with `seed`.
/// Splitting rule: std::seed_seq over (low word, high word, stream).
inline Rng derive_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffU),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream & 0xffffffffU),
                    static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

}  // namespace mirfs

#endif  // MIRFS_RANDOM_HPP
