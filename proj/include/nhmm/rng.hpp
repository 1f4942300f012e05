#pragma once

#include <cstdint>
#include <random>

namespace nhmm {

// Seedable random source. Every stochastic operation takes one of these by
// reference so runs are reproducible from a single config seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on the open interval (0,1).
  double uniform() {
    double v;
    do {
      v = std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
    } while (v <= 0.0 || v >= 1.0);
    return v;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }

  double normal(double mu, double sigma) { return mu + sigma * normal(); }

  // Gamma with given shape and scale (mean = shape * scale).
  double gamma(double shape, double scale) {
    return std::gamma_distribution<double>(shape, scale)(engine_);
  }

  double exponential(double rate) {
    return std::exponential_distribution<double>(rate)(engine_);
  }

  // Index in [0, n).
  int uniform_index(int n) {
    return std::uniform_int_distribution<int>(0, n - 1)(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

// Deterministic per-replicate seed derivation: master seed plus index.
inline std::uint64_t replicate_seed(std::uint64_t master, int replicate) {
  return master + static_cast<std::uint64_t>(replicate);
}

}  // namespace nhmm
