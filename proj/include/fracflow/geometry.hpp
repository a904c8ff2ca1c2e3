#pragma once

#include <algorithm>
#include <complex>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fracflow/common.hpp"
#include "fracflow/fft.hpp"
#include "fracflow/interp.hpp"
#include "fracflow/rng.hpp"

namespace fracflow {

/// Radial height field over the unit circle: the boundary point at angle
/// theta_j is h_j * (cos theta_j, sin theta_j).  First and second angular
/// derivatives are computed spectrally at construction and cached, along with
/// the Fourier coefficients and a periodic cubic spline for off-grid reads.
struct HeightField {
  std::size_t n = 0;
  std::vector<double> theta;
  std::vector<double> h;
  std::vector<double> dh;    // spectral d h / d theta
  std::vector<double> d2h;   // spectral d^2 h / d theta^2
  std::vector<std::complex<double>> coeff;  // Fourier coefficients of h
  PeriodicSpline spline;

  double node_angle(std::size_t j) const { return theta[j]; }
  Vec2 point(std::size_t j) const {
    return circle_point(theta[j]) * h[j];
  }
  /// Spline read at an arbitrary angle (fast path).
  double value(double angle) const { return spline(angle); }
  /// Trigonometric-interpolation read (spectrally accurate, O(n)).
  double value_spectral(double angle) const {
    return trig_interpolate(coeff, angle);
  }
};

struct ShapeMetrics {
  double area = 0.0;
  Vec2 barycenter;
  double inradius = 0.0;      // largest r with B_r(0) inside the set
  double circumradius = 0.0;  // smallest R with the set inside B_R(0)
  double min_curvature = 0.0;
  bool convex = false;
  double slope_constant = 0.0;
};

/// Validates samples and builds the field with cached derivatives.
inline HeightField build_field(const std::vector<double>& samples) {
  require_grid_size(samples.size());
  for (double v : samples)
    if (!(v > 0.0) || !std::isfinite(v))
      throw DomainError("height samples must be strictly positive and finite");
  HeightField f;
  f.n = samples.size();
  f.h = samples;
  f.theta.resize(f.n);
  for (std::size_t j = 0; j < f.n; ++j)
    f.theta[j] = two_pi * static_cast<double>(j) / static_cast<double>(f.n);
  f.coeff = fourier_coefficients(f.h);
  f.dh = derivative_from_coeff(f.coeff, 1);
  f.d2h = derivative_from_coeff(f.coeff, 2);
  f.spline = PeriodicSpline(f.h);
  return f;
}

/// Enclosed area, (1/2) * integral of h^2 d theta (trapezoid = exact spectral
/// accuracy for periodic integrands).
inline double area(const HeightField& f) {
  double acc = 0.0;
  for (double v : f.h) acc += v * v;
  return 0.5 * acc * two_pi / static_cast<double>(f.n);
}

/// Barycenter of the enclosed region (polar moment formula).
inline Vec2 barycenter(const HeightField& f) {
  double cx = 0.0, cy = 0.0;
  for (std::size_t j = 0; j < f.n; ++j) {
    const double w = f.h[j] * f.h[j] * f.h[j];
    cx += w * std::cos(f.theta[j]);
    cy += w * std::sin(f.theta[j]);
  }
  const double dtheta = two_pi / static_cast<double>(f.n);
  const double a = area(f);
  return {cx * dtheta / (3.0 * a), cy * dtheta / (3.0 * a)};
}

struct NormalJacobian {
  Vec2 normal;     // outward unit normal
  double jacobian; // surface measure factor sqrt(h^2 + h'^2)
};

/// Outward normal nu = (h x - h' tau)/sqrt(h^2 + h'^2) and area Jacobian at a
/// grid node.
inline NormalJacobian normal_and_jacobian(const HeightField& f,
                                          std::size_t node) {
  if (node >= f.n) throw SizeError("node index out of range");
  const double h = f.h[node], dh = f.dh[node];
  const double j = std::sqrt(h * h + dh * dh);
  const Vec2 x = circle_point(f.theta[node]);
  const Vec2 t = circle_tangent(f.theta[node]);
  return {{(h * x.x - dh * t.x) / j, (h * x.y - dh * t.y) / j}, j};
}

/// Polar curvature (h^2 + 2 h'^2 - h h'') / (h^2 + h'^2)^{3/2} at every node.
inline std::vector<double> polar_curvature(const HeightField& f) {
  std::vector<double> k(f.n);
  for (std::size_t j = 0; j < f.n; ++j) {
    const double h = f.h[j], dh = f.dh[j], d2h = f.d2h[j];
    const double g = h * h + dh * dh;
    k[j] = (g + dh * dh - h * d2h) / (g * std::sqrt(g));
  }
  return k;
}

/// Convexity tolerance used everywhere a convex flag is computed.
inline double convexity_tolerance(const HeightField& f) {
  return 1e-8 / *std::max_element(f.h.begin(), f.h.end());
}

/// Full metric bundle; `s` enters only through the slope constant
/// sup_{x != y} <x - y, nu(x)> / |x - y|^{1+s} over ordered node pairs.
inline ShapeMetrics shape_metrics(const HeightField& f, double s) {
  if (!(s > 0.0 && s < 1.0)) throw DomainError("s must lie in (0, 1)");
  ShapeMetrics m;
  m.area = area(f);
  m.barycenter = barycenter(f);
  m.inradius = *std::min_element(f.h.begin(), f.h.end());
  m.circumradius = *std::max_element(f.h.begin(), f.h.end());
  const auto kappa = polar_curvature(f);
  m.min_curvature = *std::min_element(kappa.begin(), kappa.end());
  m.convex = m.min_curvature >= -convexity_tolerance(f);

  std::vector<Vec2> p(f.n), nu(f.n);
  for (std::size_t j = 0; j < f.n; ++j) {
    p[j] = f.point(j);
    nu[j] = normal_and_jacobian(f, j).normal;
  }
  double best = 0.0;
  for (std::size_t i = 0; i < f.n; ++i) {
    for (std::size_t j = 0; j < f.n; ++j) {
      if (i == j) continue;
      const Vec2 d = p[i] - p[j];
      const double r2 = norm2(d);
      const double val = dot(d, nu[i]) / std::pow(r2, 0.5 * (1.0 + s));
      best = std::max(best, val);
    }
  }
  m.slope_constant = best;
  return m;
}

/// Resamples the boundary as a radial field about `center` (which must be
/// interior).  Spectrally accurate: each new sample is a true boundary point
/// up to the 1e-14 root tolerance.
inline HeightField recenter_field(const HeightField& f, Vec2 center) {
  const double hc = f.value_spectral(std::atan2(center.y, center.x));
  if (norm(center) >= hc)
    throw GeometryError("recenter target lies outside the set");
  const double rmax =
      2.0 * *std::max_element(f.h.begin(), f.h.end()) + norm(center);
  std::vector<double> out(f.n);
  for (std::size_t j = 0; j < f.n; ++j) {
    const Vec2 dir = circle_point(two_pi * static_cast<double>(j) /
                                  static_cast<double>(f.n));
    // g(r) = |center + r dir| - h(arg(center + r dir)) changes sign once on
    // (0, rmax] for a star-shaped boundary seen from an interior point.
    auto g = [&](double r) {
      const Vec2 z = center + dir * r;
      return norm(z) - f.value_spectral(std::atan2(z.y, z.x));
    };
    double lo = 0.0, hi = rmax;
    if (g(hi) <= 0.0) throw GeometryError("resampling bracket failed");
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      (g(mid) <= 0.0 ? lo : hi) = mid;
      if (hi - lo < 1e-14 * rmax) break;
    }
    out[j] = 0.5 * (lo + hi);
  }
  return build_field(out);
}

/// Rescale about the barycenter to the target area, then recenter the
/// barycenter to the origin by radial resampling.  Scaling is exact; the
/// translation is the spectral resampling above.
inline HeightField rescale_and_center(const HeightField& f,
                                      double target_area) {
  if (!(target_area > 0.0))
    throw DomainError("target area must be positive");
  HeightField g = f;
  const Vec2 c = barycenter(g);
  if (norm(c) > 1e-15) g = recenter_field(g, c);
  const double scale = std::sqrt(target_area / area(g));
  std::vector<double> scaled = g.h;
  for (double& v : scaled) v *= scale;
  return build_field(scaled);
}

// ---------------------------------------------------------------------------
// Serialization: one "theta,h" pair per line, 17 significant digits, so the
// round trip reproduces every double exactly.

inline std::string field_to_csv(const HeightField& f) {
  std::string out = "theta,h\n";
  char buf[80];
  for (std::size_t j = 0; j < f.n; ++j) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", f.theta[j], f.h[j]);
    out += buf;
  }
  return out;
}

inline HeightField field_from_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  std::vector<double> samples;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.rfind("theta", 0) == 0) continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw ConfigError("malformed field CSV line: " + line);
    samples.push_back(std::stod(line.substr(comma + 1)));
  }
  return build_field(samples);
}

// ---------------------------------------------------------------------------
// Shape generators.

inline HeightField make_circle(std::size_t n, double radius = 1.0) {
  if (!(radius > 0.0)) throw DomainError("circle radius must be positive");
  return build_field(std::vector<double>(n, radius));
}

/// Area-pi ellipse with semi-axes (a, 1/a).
inline HeightField make_ellipse(std::size_t n, double a) {
  if (!(a > 0.0)) throw DomainError("ellipse semi-axis must be positive");
  const double b = 1.0 / a;
  std::vector<double> h(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double t = two_pi * static_cast<double>(j) / static_cast<double>(n);
    const double c = std::cos(t), s = std::sin(t);
    h[j] = a * b / std::sqrt(b * b * c * c + a * a * s * s);
  }
  return build_field(h);
}

/// Smoothed regular m-gon: support function p(phi) = 1 + eps cos(m phi)
/// (Fourier truncation), converted to a radial field.  Requires
/// eps < 1/(m^2 - 1) so the support function stays admissible.
inline HeightField make_polygon(std::size_t n, int m,
                                std::optional<double> eps_opt = {}) {
  if (m < 3) throw DomainError("polygon needs at least 3 sides");
  const double eps_max = 1.0 / (static_cast<double>(m) * m - 1.0);
  const double eps = eps_opt.value_or(0.5 * eps_max);
  if (!(eps > 0.0) || eps >= eps_max)
    throw DomainError("polygon smoothing amplitude out of range");
  // Boundary point for support function p: q(phi) = p n(phi) + p' tau(phi);
  // its polar angle theta(phi) = phi + atan2(p', p) is monotone increasing.
  auto sample = [&](double phi) {
    const double p = 1.0 + eps * std::cos(m * phi);
    const double dp = -eps * m * std::sin(m * phi);
    return std::pair<double, double>(phi + std::atan2(dp, p),
                                     std::sqrt(p * p + dp * dp));
  };
  std::vector<double> h(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double target = two_pi * static_cast<double>(j) / static_cast<double>(n);
    double lo = target - 0.5, hi = target + 0.5;
    for (int it = 0; it < 70; ++it) {
      const double mid = 0.5 * (lo + hi);
      (sample(mid).first < target ? lo : hi) = mid;
    }
    h[j] = sample(0.5 * (lo + hi)).second;
  }
  return build_field(h);
}

inline HeightField make_random_convex(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  return build_field(random_convex_samples(n, rng));
}

}  // namespace fracflow
