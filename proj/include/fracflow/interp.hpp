#pragma once

#include <vector>

#include "fracflow/common.hpp"

namespace fracflow {

/// Periodic cubic spline on the uniform angular grid theta_j = 2*pi*j/n.
/// O(n) setup (cyclic tridiagonal via Sherman--Morrison), O(1) evaluation.
class PeriodicSpline {
 public:
  PeriodicSpline() = default;

  explicit PeriodicSpline(const std::vector<double>& y) : y_(y) {
    const std::size_t n = y.size();
    if (n < 4) throw SizeError("PeriodicSpline: need at least 4 samples");
    dx_ = two_pi / static_cast<double>(n);
    m_.assign(n, 0.0);

    // Solve (1, 4, 1) cyclic system for second derivatives m_j:
    //   m_{j-1} + 4 m_j + m_{j+1} = 6 (y_{j-1} - 2 y_j + y_{j+1}) / dx^2.
    std::vector<double> rhs(n);
    const double idx2 = 6.0 / (dx_ * dx_);
    for (std::size_t j = 0; j < n; ++j) {
      const double ym = y[(j + n - 1) % n], y0 = y[j], yp = y[(j + 1) % n];
      rhs[j] = idx2 * (ym - 2.0 * y0 + yp);
    }
    m_ = solve_cyclic(rhs);
  }

  /// Spline value at an arbitrary angle.
  double operator()(double theta) const {
    const std::size_t n = y_.size();
    double t = theta * (static_cast<double>(n) / two_pi);
    t -= std::floor(t / static_cast<double>(n)) * static_cast<double>(n);
    std::size_t j = static_cast<std::size_t>(t);
    if (j >= n) j = 0;
    const double u = (t - static_cast<double>(j)) * dx_;  // offset in [0, dx)
    const std::size_t jp = (j + 1) % n;
    const double a = (dx_ - u), b = u;
    return (m_[j] * a * a * a + m_[jp] * b * b * b) / (6.0 * dx_) +
           (y_[j] / dx_ - m_[j] * dx_ / 6.0) * a +
           (y_[jp] / dx_ - m_[jp] * dx_ / 6.0) * b;
  }

  bool valid() const { return !y_.empty(); }

 private:
  std::vector<double> solve_cyclic(const std::vector<double>& rhs) const {
    const std::size_t n = rhs.size();
    // Tridiagonal core (b=4, a=c=1) with corner entries handled by
    // Sherman--Morrison: A = T + u v^T, u = (gamma, 0..0, 1)^T,
    // v = (1, 0..0, gamma')... use the standard textbook reduction.
    const double alpha = 1.0, beta = 1.0, b = 4.0;
    const double gamma = -b;
    std::vector<double> bb(n, b);
    bb[0] = b - gamma;
    bb[n - 1] = b - alpha * beta / gamma;
    auto tridiag = [&](const std::vector<double>& d) {
      std::vector<double> c(n, 0.0), x(n, 0.0);
      c[0] = 1.0 / bb[0];
      x[0] = d[0] / bb[0];
      for (std::size_t i = 1; i < n; ++i) {
        const double m = 1.0 / (bb[i] - c[i - 1]);
        c[i] = m;                       // stores c_i / denom with c_i = 1
        x[i] = (d[i] - x[i - 1]) * m;
      }
      for (std::size_t i = n - 1; i-- > 0;) x[i] -= c[i] * x[i + 1];
      return x;
    };
    std::vector<double> u(n, 0.0);
    u[0] = gamma;
    u[n - 1] = alpha;
    auto x = tridiag(rhs);
    auto z = tridiag(u);
    const double fact =
        (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    for (std::size_t i = 0; i < n; ++i) x[i] -= fact * z[i];
    return x;
  }

  std::vector<double> y_;
  std::vector<double> m_;
  double dx_ = 0.0;
};

}  // namespace fracflow
