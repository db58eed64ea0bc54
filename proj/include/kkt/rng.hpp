#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace kkt {

using Vector = std::vector<double>;

/// Per-chain random stream. Streams derived from the same seed with distinct
/// ids are seeded through std::seed_seq and are treated as independent.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) : seed_(seed), stream_(stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream),
                      static_cast<std::uint32_t>(stream >> 32), 0x6b6b74u};
    engine_.seed(seq);
  }

  /// A fresh stream keyed by (seed, id); the parent stream is not advanced.
  [[nodiscard]] Rng split(std::uint64_t id) const {
    return Rng(seed_, stream_ * 0x9e3779b97f4a7c15ULL + id + 1);
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  /// Uniform on [0, 1).
  double uniform() { return unif_(engine_); }

  double normal() { return normal_(engine_); }

  void normal(std::span<double> out) {
    for (double& v : out) v = normal_(engine_);
  }

  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  /// Index drawn from a probability row (entries summing to one).
  std::size_t categorical(std::span<const double> probs) {
    double u = uniform();
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (u < probs[i]) return i;
      u -= probs[i];
    }
    // Rounding slack: return the last state with positive mass.
    for (std::size_t i = probs.size(); i-- > 0;) {
      if (probs[i] > 0.0) return i;
    }
    return probs.size() - 1;
  }

  /// Bernoulli(p). No randomness is consumed when p is exactly 0 or 1.
  bool bernoulli(double p) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return uniform() < p;
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace kkt
