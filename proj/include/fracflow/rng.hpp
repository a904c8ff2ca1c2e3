#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "fracflow/common.hpp"

namespace fracflow {

/// All stochastic corpora derive from one seeded 64-bit Mersenne engine with
/// draws in a fixed order, so a (config, seed) pair pins every sample.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double a, double b) {
    std::uniform_real_distribution<double> d(a, b);
    return d(engine_);
  }

  int uniform_int(int a, int b) {
    std::uniform_int_distribution<int> d(a, b);
    return d(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

/// Random smooth convex radial field h = 1 + sum_{k=2}^{kmax} e_k cos(k t + p_k)
/// with amplitudes shaped like k^{-3} so the polar curvature stays well above
/// zero (the construction keeps |u| + |u''| < ~0.3).
inline std::vector<double> random_convex_samples(std::size_t n, Rng& rng,
                                                 int kmax = 8,
                                                 double amplitude = 0.12) {
  std::vector<double> h(n, 1.0);
  for (int k = 2; k <= kmax; ++k) {
    const double eps = amplitude * rng.uniform(0.3, 1.0) /
                       (static_cast<double>(k) * k * k);
    const double phase = rng.uniform(0.0, two_pi);
    for (std::size_t j = 0; j < n; ++j) {
      const double t = two_pi * static_cast<double>(j) / static_cast<double>(n);
      h[j] += eps * std::cos(k * t + phase);
    }
  }
  return h;
}

/// Random real trigonometric polynomial with modes in [kmin, kmax] and
/// coefficients decaying like k^{-decay}.
inline std::vector<double> random_trig_samples(std::size_t n, Rng& rng,
                                               int kmin, int kmax,
                                               double decay = 1.0) {
  std::vector<double> u(n, 0.0);
  for (int k = kmin; k <= kmax; ++k) {
    const double a = rng.uniform(-1.0, 1.0) / std::pow(k, decay);
    const double p = rng.uniform(0.0, two_pi);
    for (std::size_t j = 0; j < n; ++j) {
      const double t = two_pi * static_cast<double>(j) / static_cast<double>(n);
      u[j] += a * std::cos(k * t + p);
    }
  }
  return u;
}

}  // namespace fracflow
