#pragma once

#include <cmath>
#include <cstdint>

#include <Eigen/Dense>

namespace hmmlab {

/// Counter-seeded xoshiro256** stream.
///
/// The generator state is expanded from (seed, stream) with splitmix64, so a
/// stream is an O(1) pure function of its identifiers: equal (seed, stream)
/// reproduce the same draws on every platform, and distinct stream indices
/// give statistically independent sequences. Streams are single-owner; parallel
/// work derives one stream per task instead of sharing.
class RngStream {
 public:
  RngStream() : RngStream(0, 0) {}

  RngStream(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream) {
    std::uint64_t z = seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
    for (auto& word : state_) word = splitmix64(z);
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  /// A stream derived from this one; used for nested parallelism.
  RngStream child(std::uint64_t index) const {
    std::uint64_t z = seed_ ^ (0xbf58476d1ce4e5b9ULL * (stream_ + 1));
    std::uint64_t mixed = splitmix64(z);
    return RngStream(mixed ^ (0x94d049bb133111ebULL * (index + 1)), 0);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform draw in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform draw in (lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; the paired draw is cached.
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 6.283185307179586477 * u2;
    cached_ = radius * std::sin(angle);
    has_cached_ = true;
    return radius * std::cos(angle);
  }

  Eigen::VectorXd normal_vector(Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  /// Index draw proportional to non-negative weights (need not sum to one).
  /// Scans in ascending index order so results are platform-stable.
  int categorical(const Eigen::VectorXd& weights) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < weights.size(); ++i) total += weights[i];
    double u = uniform() * total;
    for (Eigen::Index i = 0; i < weights.size(); ++i) {
      u -= weights[i];
      if (u < 0.0) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size() - 1);
  }

  int bernoulli(double p) { return uniform() < p ? 1 : 0; }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  static std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t state_[4];
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace hmmlab
