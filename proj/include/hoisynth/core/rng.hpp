#pragma once

#include <cstdint>
#include <random>

#include "hoisynth/core/types.hpp"

namespace hoisynth {

/// Seeded generator used by every stochastic routine.
///
/// The engine is mt19937_64; the distributions are the standard library's,
/// so streams are reproducible for a given toolchain.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal() { return normal_(engine_); }
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  std::uint64_t next_u64() { return engine_(); }
  int uniform_int(int lo, int hi_inclusive) {
    return std::uniform_int_distribution<int>(lo, hi_inclusive)(engine_);
  }

  Vec3 normal3() { return {normal(), normal(), normal()}; }

  /// Fill a matrix with standard normal draws, row by row.
  template <typename Derived>
  void fill_normal(Eigen::DenseBase<Derived>& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = normal();
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Derive an independent stage seed from a master seed (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace hoisynth
