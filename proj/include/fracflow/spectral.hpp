#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "fracflow/common.hpp"
#include "fracflow/fft.hpp"
#include "fracflow/kernels.hpp"
#include "fracflow/norms.hpp"
#include "fracflow/quadrature.hpp"

namespace fracflow {

// ---------------------------------------------------------------------------
// The dimensional constant of the one-dimensional jump kernel,
//
//     c_s = \int_0^\infty (1 - cos 2\pi r) / r^{2+s} dr,
//
// computed by two structurally different quadratures that are cross-checked
// against each other.  Both split the range at r = 1 and r = 64; the far tail
// is summed by repeated integration by parts (the break point is an integer,
// so the boundary sine terms vanish and the cosine terms equal one).
// ---------------------------------------------------------------------------

namespace detail {

// \int_R^\infty cos(2 pi r) r^{-p} dr for integer R, asymptotic in 1/R.
inline double oscillatory_tail(double p, double R) {
  const double w = 1.0 / (two_pi * two_pi);
  const double t1 = p * w * std::pow(R, -(p + 1.0));
  const double t2 = p * (p + 1.0) * (p + 2.0) * w * w * std::pow(R, -(p + 3.0));
  const double t3 = p * (p + 1.0) * (p + 2.0) * (p + 3.0) * (p + 4.0) * w * w *
                    w * std::pow(R, -(p + 5.0));
  return t1 - t2 + t3;
}

// Small-r closure \int_0^e (1-cos 2 pi r)/r^{2+s} dr by the alternating
// Taylor series of the cosine; converges fast once 2 pi e is below one.
inline double small_r_series(double s, double e, int terms) {
  double sum = 0.0, sign = 1.0, fact = 1.0, pw = 1.0;
  for (int m = 1; m <= terms; ++m) {
    fact *= (2.0 * m - 1.0) * (2.0 * m);
    pw *= two_pi * two_pi;
    const double q = 2.0 * m - 1.0 - s;
    sum += sign * pw / fact * std::pow(e, q) / q;
    sign = -sign;
  }
  return sum;
}

inline double kernel_integrand(double s, double r) {
  return (1.0 - std::cos(two_pi * r)) / std::pow(r, 2.0 + s);
}

}  // namespace detail

/// Scheme one: full Taylor series on (0,1], one Gauss panel per period on
/// [1,64], integration-by-parts tail.
inline double kernel_constant_series(double s) {
  require_s(s);
  const double R = 64.0;
  double acc = detail::small_r_series(s, 1.0, 40);
  for (int m = 1; m < 64; ++m)
    acc += integrate_gl([s](double r) { return detail::kernel_integrand(s, r); },
                        m, m + 1.0, 20);
  const double tail = std::pow(R, -(1.0 + s)) / (1.0 + s) -
                      detail::oscillatory_tail(2.0 + s, R);
  // crude monotone bound on the same tail, kept as a consistency guard
  if (!(std::abs(tail) <= 2.0 / (1.0 + s) * std::pow(R, -(1.0 + s))))
    throw AccuracyError("kernel constant: tail estimate out of bounds");
  return acc + tail;
}

/// Scheme two: dyadically graded Gauss panels into the r = 0 singularity with
/// a short series closure below 2^-8, adaptive quadrature per period on
/// [1,64], same analytic tail.
inline double kernel_constant_dyadic(double s) {
  require_s(s);
  const double R = 64.0;
  const double eps = 1.0 / 256.0;
  double acc = detail::small_r_series(s, eps, 8);
  double hi = 1.0;
  while (hi > eps + 1e-18) {
    const double lo = 0.5 * hi;
    acc += integrate_gl([s](double r) { return detail::kernel_integrand(s, r); },
                        lo, hi, 16);
    hi = lo;
  }
  for (int m = 1; m < 64; ++m)
    acc += integrate_adaptive(
        [s](double r) { return detail::kernel_integrand(s, r); }, m, m + 1.0,
        1e-13);
  return acc + std::pow(R, -(1.0 + s)) / (1.0 + s) -
         detail::oscillatory_tail(2.0 + s, R);
}

/// Cross-checked value of c_s; the two schemes must agree to 1e-8.
inline double kernel_constant(double s) {
  const double a = kernel_constant_series(s);
  const double b = kernel_constant_dyadic(s);
  if (std::abs(a - b) > 1e-8 * std::max(1.0, std::abs(a)))
    throw AccuracyError("kernel constant: quadrature schemes disagree");
  return 0.5 * (a + b);
}

// ---------------------------------------------------------------------------
// Fourier symbol of the constant-coefficient operator.  On the line the unit
// sphere degenerates to the two-point set {-1, +1} with counting measure and
// the direction drops out; in the plane the direction integral is done with
// Gauss panels graded into the kinks of |cos|^{1+s}.
// ---------------------------------------------------------------------------

/// One-dimensional symbol: a = 2 c_s A^{-(2+s)/2} for a scalar coefficient.
inline double compute_symbol(double coefficient, double s) {
  require_s(s);
  if (!(coefficient > 0.0))
    throw DomainError("compute_symbol: coefficient must be positive");
  return 2.0 * kernel_constant(s) * std::pow(coefficient, -0.5 * (2.0 + s));
}

namespace detail {

// directional factor  \int_{S^1} |<w, xi/|xi|>|^{1+s} <A w, w>^{-(3+s)/2} dw
inline double direction_integral(const SymMat2& A, double s, Vec2 unit) {
  const double base = std::atan2(unit.y, unit.x);
  double acc = 0.0;
  // quarters around the two kink angles +-pi/2 relative to the direction
  for (double kink : {0.5 * pi, 1.5 * pi}) {
    for (double side : {-1.0, 1.0}) {
      double span = 0.5 * pi;
      for (int m = 0; m < 44; ++m) {
        const double lo = kink + side * 0.5 * span;
        const double hi = kink + side * span;
        acc += integrate_gl(
            [&](double phi) {
              const double c = std::cos(phi);
              const Vec2 w = circle_point(base + phi);
              return std::pow(std::abs(c), 1.0 + s) *
                     std::pow(A.quad(w), -0.5 * (3.0 + s));
            },
            std::min(lo, hi), std::max(lo, hi), 16);
        span *= 0.5;
      }
    }
  }
  return acc;
}

}  // namespace detail

/// Planar symbol, 0-homogeneous in xi (normalized internally).
inline double compute_symbol(const SymMat2& A, double s, Vec2 xi) {
  require_s(s);
  const double det = A.xx * A.yy - A.xy * A.xy;
  if (!(A.xx > 0.0 && det > 0.0))
    throw DomainError("compute_symbol: matrix must be positive definite");
  const double len = norm(xi);
  if (!(len > 0.0)) throw DomainError("compute_symbol: zero frequency");
  const Vec2 unit{xi.x / len, xi.y / len};
  return kernel_constant(s) * detail::direction_integral(A, s, unit);
}

/// Bundle of the symbol data: the kernel constant, the scalar coefficient
/// path used by the solver, and an optional sampled direction/time table for
/// the planar variant.
struct SpectralSymbol {
  double s = 0.5;
  double c_s = 0.0;
  std::function<double(double)> coefficient;  // scalar elliptic A(t)
  std::vector<double> directions;             // angles, planar table
  std::vector<double> times;
  std::vector<double> a_values;  // directions-major [dir * times.size() + it]
};

inline SpectralSymbol build_symbol(std::function<double(double)> coefficient,
                                   double s) {
  require_s(s);
  SpectralSymbol sym;
  sym.s = s;
  sym.c_s = kernel_constant(s);
  sym.coefficient = std::move(coefficient);
  if (!(sym.coefficient(0.0) > 0.0))
    throw DomainError("build_symbol: coefficient must be positive");
  return sym;
}

/// Planar builder: samples a(xi, t) on a direction/time grid and validates
/// the two-sided ellipticity window implied by the eigenvalue bounds of A.
inline SpectralSymbol build_symbol(
    const std::function<SymMat2(double)>& matrix, double s,
    std::size_t n_dir = 64, std::size_t n_time = 16, double horizon = 1.0) {
  require_s(s);
  if (n_dir == 0 || n_time == 0) throw SizeError("build_symbol: empty table");
  SpectralSymbol sym;
  sym.s = s;
  sym.c_s = kernel_constant(s);
  sym.directions.resize(n_dir);
  sym.times.resize(n_time);
  sym.a_values.resize(n_dir * n_time);
  for (std::size_t i = 0; i < n_dir; ++i)
    sym.directions[i] = two_pi * static_cast<double>(i) / n_dir;
  for (std::size_t j = 0; j < n_time; ++j)
    sym.times[j] = horizon * static_cast<double>(j) /
                   static_cast<double>(n_time > 1 ? n_time - 1 : 1);
  for (std::size_t j = 0; j < n_time; ++j) {
    const SymMat2 A = matrix(sym.times[j]);
    // eigenvalue window of A -> two-sided bounds for the sampled symbol
    const double tr = A.xx + A.yy;
    const double disc = std::sqrt(std::max(
        0.0, 0.25 * (A.xx - A.yy) * (A.xx - A.yy) + A.xy * A.xy));
    const double lam = 0.5 * tr - disc, Lam = 0.5 * tr + disc;
    if (!(lam > 0.0))
      throw DomainError("build_symbol: matrix must be positive definite");
    const double i0 = 2.0 * std::sqrt(pi) * std::tgamma(0.5 * (2.0 + s)) /
                      std::tgamma(0.5 * (3.0 + s));
    const double lo = sym.c_s * i0 * std::pow(Lam, -0.5 * (3.0 + s));
    const double hi = sym.c_s * i0 * std::pow(lam, -0.5 * (3.0 + s));
    for (std::size_t i = 0; i < n_dir; ++i) {
      const double a =
          compute_symbol(A, s, circle_point(sym.directions[i]));
      if (!(a >= lo * (1.0 - 1e-9) && a <= hi * (1.0 + 1e-9)))
        throw AccuracyError("build_symbol: symbol outside ellipticity window");
      sym.a_values[i * n_time + j] = a;
    }
  }
  return sym;
}

/// CSV table of the sampled planar symbol.
inline std::string symbol_table_csv(const SpectralSymbol& sym) {
  std::string out = "theta,t,a\n";
  char buf[128];
  for (std::size_t i = 0; i < sym.directions.size(); ++i)
    for (std::size_t j = 0; j < sym.times.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", sym.directions[i],
                    sym.times[j], sym.a_values[i * sym.times.size() + j]);
      out += buf;
    }
  return out;
}

// ---------------------------------------------------------------------------
// Cauchy problem with zero initial datum on the periodic line, solved mode by
// mode with the exact exponential step.  Data are frozen at each step's
// midpoint, so the integrator is exact for forcings that are piecewise
// constant in time and first order otherwise.
// ---------------------------------------------------------------------------

using Forcing = std::function<std::vector<double>(double)>;

struct SpectralState {
  std::size_t n = 0;
  double t = 0.0;
  std::vector<std::complex<double>> u_hat;
  // step history (time stamps plus coefficient snapshots)
  std::vector<double> times;
  std::vector<std::vector<std::complex<double>>> history;
};

inline SpectralState make_state(std::size_t n) {
  require_grid_size(n);
  SpectralState st;
  st.n = n;
  st.u_hat.assign(n, {0.0, 0.0});
  st.times = {0.0};
  st.history = {st.u_hat};
  return st;
}

inline std::vector<double> state_samples(const SpectralState& st) {
  return fourier_synthesis(st.u_hat);
}

inline SpectralState evolve(SpectralState st, const SpectralSymbol& sym,
                            const Forcing& f, double T, double dt) {
  if (!(dt > 0.0)) throw DomainError("evolve: step size must be positive");
  if (st.n == 0) throw SizeError("evolve: uninitialized state");
  if (!sym.coefficient)
    throw DomainError("evolve: symbol lacks a scalar coefficient");
  const double goal = T;
  const std::size_t steps =
      static_cast<std::size_t>(std::ceil((goal - st.t) / dt - 1e-9));
  if (steps * st.n > (std::size_t{1} << 24))
    throw SizeError("evolve: history would exceed the memory budget");
  st.times.reserve(st.times.size() + steps);
  st.history.reserve(st.history.size() + steps);
  while (st.t < goal - 1e-12 * std::max(1.0, goal)) {
    const double h = std::min(dt, goal - st.t);
    const double tm = st.t + 0.5 * h;
    const std::vector<double> fs = f(tm);
    if (fs.size() != st.n) throw SizeError("evolve: forcing grid mismatch");
    const auto fhat = fourier_coefficients(fs);
    const double At = sym.coefficient(tm);
    if (!(At > 0.0)) throw DomainError("evolve: coefficient must be positive");
    const double factor =
        2.0 * sym.c_s * std::pow(At, -0.5 * (2.0 + sym.s));
    for (std::size_t k = 0; k < st.n; ++k) {
      const double m = std::abs(signed_mode(k, st.n));
      if (m == 0.0) {
        st.u_hat[k] += fhat[k] * h;  // rate vanishes: pure accumulation
        continue;
      }
      const double rate = factor * std::pow(m, 1.0 + sym.s);
      const double decay = std::exp(-rate * h);
      st.u_hat[k] = st.u_hat[k] * decay +
                    fhat[k] * (-std::expm1(-rate * h) / rate);
    }
    st.t += h;
    st.times.push_back(st.t);
    st.history.push_back(st.u_hat);
  }
  return st;
}

// ---------------------------------------------------------------------------
// Reports over a completed evolution.
// ---------------------------------------------------------------------------

struct MaxPrincipleReport {
  double ratio = 0.0;
  double sup_u = 0.0;
  double sup_f = 0.0;
  double horizon = 0.0;
  bool pass = true;
};

inline MaxPrincipleReport max_principle_check(const SpectralState& st,
                                              const Forcing& f) {
  MaxPrincipleReport rep;
  rep.horizon = st.t;
  for (std::size_t i = 0; i < st.history.size(); ++i) {
    const auto u = fourier_synthesis(st.history[i]);
    for (double v : u) rep.sup_u = std::max(rep.sup_u, std::abs(v));
    for (double v : f(st.times[i])) rep.sup_f = std::max(rep.sup_f, std::abs(v));
  }
  rep.ratio =
      rep.sup_f > 0.0 ? rep.sup_u / ((1.0 + rep.horizon) * rep.sup_f) : 0.0;
  rep.pass = rep.ratio <= 1.05;
  return rep;
}

/// JSON Lines trace of a solver run: time, sup norm and the two Schauder-side
/// norms, sampled at the given cadence of stored steps.
inline std::string spectral_trace_jsonl(const SpectralState& st,
                                        const SpectralSymbol& sym,
                                        const Forcing& f, double alpha,
                                        std::size_t cadence = 16) {
  if (cadence == 0) throw SizeError("trace cadence must be positive");
  std::string out;
  char buf[256];
  for (std::size_t i = 0;;) {
    const auto u = fourier_synthesis(st.history[i]);
    double sup = 0.0;
    for (double v : u) sup = std::max(sup, std::abs(v));
    const double nu = ck_beta_norm(u, 1, sym.s + alpha);
    const double nf = ck_beta_norm(f(st.times[i]), 0, alpha);
    std::snprintf(buf, sizeof buf,
                  "{\"t\":%.17g,\"sup_u\":%.17g,\"norm_u_C1sa\":%.17g,"
                  "\"norm_f_Ca\":%.17g}\n",
                  st.times[i], sup, nu, nf);
    out += buf;
    if (i + 1 >= st.history.size()) break;
    i = std::min(i + cadence, st.history.size() - 1);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Direct principal-value quadrature of the operator on the periodic line,
// used to cross-validate the symbol.  The kernel is periodized over a finite
// number of images; the cells at and next to the diagonal are integrated
// against a fourth-order Taylor model with spectral derivatives.
// ---------------------------------------------------------------------------

inline std::vector<double> operator_quadrature(const std::vector<double>& u,
                                               double coefficient, double s,
                                               int periods = 5) {
  require_s(s);
  require_grid_size(u.size());
  if (!(coefficient > 0.0))
    throw DomainError("operator_quadrature: coefficient must be positive");
  if (periods < 1) throw SizeError("operator_quadrature: need one period");
  detail::require_resolved(u);

  const std::size_t n = u.size();
  const double dx = 1.0 / static_cast<double>(n);
  const double amp = std::pow(coefficient, -0.5 * (2.0 + s));

  // derivatives with respect to x = theta / (2 pi)
  const auto c = fourier_coefficients(u);
  auto scale = [&](std::vector<double> v, double w) {
    for (double& x : v) x *= w;
    return v;
  };
  const auto u1 = scale(derivative_from_coeff(c, 1), two_pi);
  const auto u2 = scale(derivative_from_coeff(c, 2), two_pi * two_pi);
  const auto u3 = scale(derivative_from_coeff(c, 3), std::pow(two_pi, 3));
  const auto u4 = scale(derivative_from_coeff(c, 4), std::pow(two_pi, 4));

  // signed power integral of y^p |y|^{-(2+s)} over [a, b], 0 < a < b or a < b < 0
  auto power_cell = [&](double a, double b, int p) {
    const double q = static_cast<double>(p) - 1.0 - s;
    if (a > 0.0) return (std::pow(b, q) - std::pow(a, q)) / q;
    const double sgn = (p % 2 == 0) ? 1.0 : -1.0;
    return sgn * (std::pow(-a, q) - std::pow(-b, q)) / q;
  };

  auto run = [&](int np) {
    // periodized kernel row, diagonal excluded
    std::vector<double> row(n, 0.0);
    for (std::size_t d = 1; d < n; ++d) {
      const double y = static_cast<double>(d) * dx;
      double k = 0.0;
      for (int m = -np; m <= np; ++m)
        k += std::pow(std::abs(y + m), -(2.0 + s));
      row[d] = amp * k;
    }
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t d = 1; d < n; ++d) {
        const std::size_t j = (i + d) % n;
        const int off = signed_mode(d, n);
        if (std::abs(off) <= 2) continue;  // handled by the Taylor model
        acc += (u[j] - u[i]) * row[d];
      }
      acc *= dx;
      // diagonal cell: even Taylor terms against the exact power integrals
      acc += amp * (u2[i] * power_cell(1e-300, 0.5 * dx, 2) +
                    u4[i] / 12.0 * power_cell(1e-300, 0.5 * dx, 4));
      // neighbour cells: full fourth-order model, plus the smooth image part
      const double der[4] = {u1[i], 0.5 * u2[i], u3[i] / 6.0, u4[i] / 24.0};
      for (int off = -2; off <= 2; ++off) {
        if (off == 0) continue;
        const double a = (off - 0.5) * dx, b = (off + 0.5) * dx;
        for (int p = 1; p <= 4; ++p)
          acc += amp * der[p - 1] * power_cell(a, b, p);
        const std::size_t j = (i + n + static_cast<std::size_t>(off + n)) % n;
        const double y = static_cast<double>(off) * dx;
        double images = 0.0;
        for (int m = -np; m <= np; ++m)
          if (m != 0) images += std::pow(std::abs(y + m), -(2.0 + s));
        acc += (u[j] - u[i]) * amp * images * dx;
      }
      out[i] = acc;
    }
    return out;
  };

  const auto near = run(periods);
  const auto far = run(2 * periods);
  double diff = 0.0, norm_far = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    diff = std::max(diff, std::abs(near[i] - far[i]));
    norm_far = std::max(norm_far, std::abs(far[i]));
  }
  if (diff > 0.01 * std::max(norm_far, 1e-30))
    throw AccuracyError("operator_quadrature: periodization not converged");
  return far;
}

// ---------------------------------------------------------------------------
// Empirical Schauder constant: the worst ratio of the solution norm to the
// forcing norm over a corpus of time-constant forcings.
// ---------------------------------------------------------------------------

struct SchauderReport {
  double constant = 0.0;
  std::size_t corpus_size = 0;
  std::size_t grid = 0;
  double s = 0.0;
  double alpha = 0.0;
  double horizon = 0.0;
};

inline SchauderReport schauder_constant(
    const std::function<double(double)>& coefficient, double s, double alpha,
    double T, const std::vector<std::vector<double>>& corpus,
    std::size_t steps = 1024, std::size_t norm_cadence = 16) {
  require_s(s);
  if (!(alpha > 0.0 && alpha < std::min(s, 1.0 - s)))
    throw DomainError("schauder_constant: alpha must lie below min(s, 1-s)");
  if (corpus.empty()) throw SizeError("schauder_constant: empty corpus");
  if (!(T > 0.0)) throw DomainError("schauder_constant: horizon not positive");

  const SpectralSymbol sym = build_symbol(coefficient, s);
  SchauderReport rep;
  rep.corpus_size = corpus.size();
  rep.grid = corpus.front().size();
  rep.s = s;
  rep.alpha = alpha;
  rep.horizon = T;
  const double dt = T / static_cast<double>(steps);
  for (const auto& fgrid : corpus) {
    if (fgrid.size() != rep.grid)
      throw SizeError("schauder_constant: mixed grid sizes in corpus");
    const double nf = ck_beta_norm(fgrid, 0, alpha);
    if (!(nf > 0.0))
      throw DegenerateInputError("schauder_constant: forcing with zero norm");
    const Forcing f = [&fgrid](double) { return fgrid; };
    const SpectralState st = evolve(make_state(rep.grid), sym, f, T, dt);
    for (std::size_t i = 0;;) {
      const double nu =
          ck_beta_norm(fourier_synthesis(st.history[i]), 1, s + alpha);
      rep.constant = std::max(rep.constant, nu / nf);
      if (i + 1 >= st.history.size()) break;
      i = std::min(i + norm_cadence, st.history.size() - 1);
    }
  }
  return rep;
}

}  // namespace fracflow
