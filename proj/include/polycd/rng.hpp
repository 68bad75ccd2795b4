#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace polycd {

// SplitMix64. One instance is one stream; substreams are derived by hashing
// (root seed, key), so trial t of an experiment always sees the same draws
// no matter how trials are scheduled across threads.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(mix(seed ^ 0x9E3779B97F4A7C15ull)) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    return mix(state_);
  }

  /// Uniform on [0, 1), 53-bit resolution.
  double next_uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_uniform(); }

  /// Standard normal via Box-Muller on raw 64-bit uniforms.
  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = next_uniform();
    const double u2 = next_uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  Eigen::VectorXd next_normal_vector(int n) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = next_normal();
    return v;
  }

  /// Index drawn from a probability vector by inverse CDF.
  int next_index(const Eigen::VectorXd& pmf) {
    const double u = next_uniform();
    double acc = 0.0;
    for (int i = 0; i < pmf.size() - 1; ++i) {
      acc += pmf[i];
      if (u < acc) return i;
    }
    return static_cast<int>(pmf.size()) - 1;
  }

  /// Independent substream identified by `key`.
  RngStream split(std::uint64_t key) const {
    return RngStream(mix(state_ ^ mix(key + 0xbf58476d1ce4e5b9ull)));
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ull;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebull;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace polycd
