#pragma once

#include <functional>
#include <vector>

#include "fracflow/common.hpp"

namespace fracflow {

struct QuadratureRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

/// Gauss--Legendre rule computed by Newton iteration on the Legendre
/// polynomial, with the usual cos-based initial guesses.  Rules are cached per
/// node count.
inline const QuadratureRule& gauss_legendre(int n) {
  static std::vector<QuadratureRule> cache(2048);
  if (n < 1 || n >= static_cast<int>(cache.size()))
    throw SizeError("gauss_legendre: node count out of range");
  QuadratureRule& rule = cache[static_cast<std::size_t>(n)];
  if (!rule.nodes.empty()) return rule;

  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      // evaluate P_n and P_n' by the three-term recurrence
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    rule.nodes[static_cast<std::size_t>(i)] = -x;
    rule.nodes[static_cast<std::size_t>(n - 1 - i)] = x;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.weights[static_cast<std::size_t>(i)] = w;
    rule.weights[static_cast<std::size_t>(n - 1 - i)] = w;
  }
  return rule;
}

/// Integrate f over [a, b] with an n-point Gauss--Legendre rule.
inline double integrate_gl(const std::function<double(double)>& f, double a,
                           double b, int n) {
  const QuadratureRule& rule = gauss_legendre(n);
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i)
    acc += rule.weights[i] * f(mid + half * rule.nodes[i]);
  return acc * half;
}

/// Adaptive bisection quadrature built on nested Gauss rules; coarse but
/// dependable for the one-off constants computed at startup.
inline double integrate_adaptive(const std::function<double(double)>& f,
                                 double a, double b, double abs_tol,
                                 int depth = 0) {
  const double whole = integrate_gl(f, a, b, 16);
  const double mid = 0.5 * (a + b);
  const double left = integrate_gl(f, a, mid, 16);
  const double right = integrate_gl(f, mid, b, 16);
  const double err = std::abs(left + right - whole);
  if (err < abs_tol || depth > 48) return left + right;
  return integrate_adaptive(f, a, mid, 0.5 * abs_tol, depth + 1) +
         integrate_adaptive(f, mid, b, 0.5 * abs_tol, depth + 1);
}

}  // namespace fracflow
