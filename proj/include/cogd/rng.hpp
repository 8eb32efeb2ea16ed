#pragma once

#include <cstdint>
#include <random>

namespace cogd {

/// Deterministic random source. The engine (mt19937_64) and every
/// distribution below are fixed algorithms, so identical seeds give
/// identical streams on every platform and standard library.
///
/// std::uniform_real_distribution and friends are deliberately avoided:
/// their output is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53-bit resolution.
  double uniform();

  double uniform(double lo, double hi);

  /// Uniform integer in [0, n); n must be positive. Rejection sampling,
  /// so the result is unbiased.
  std::uint64_t below(std::uint64_t n);

  /// Standard normal via Box-Muller (the spare draw is cached).
  double normal();

  double normal(double mean, double stddev);

  /// Independent generator derived from this one's seed and a stream tag.
  /// Forking with the same tag always yields the same stream.
  Rng fork(std::uint64_t stream) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace cogd
