#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "fracflow/curvature.hpp"
#include "fracflow/flow.hpp"
#include "fracflow/geometry.hpp"
#include "fracflow/kernels.hpp"
#include "fracflow/norms.hpp"
#include "fracflow/rng.hpp"
#include "fracflow/spectral.hpp"

namespace fracflow {

struct CheckResult {
  std::string name;
  double value = 0.0;  // measured quantity (smaller is better)
  double bound = 0.0;  // pass iff value <= bound
  bool pass = false;
};

namespace detail {

inline void push_check(std::vector<CheckResult>& out, std::string name,
                       double value, double bound) {
  out.push_back(
      {std::move(name), value, bound, std::isfinite(value) && value <= bound});
}

}  // namespace detail

/// The standing property battery: every check is a pure function of the
/// seed, so two runs with the same seed produce byte-identical reports.
inline std::vector<CheckResult> run_verification(std::uint64_t seed) {
  std::vector<CheckResult> out;

  // constancy of the curvature on circles, and its scaling law
  for (double s : {0.3, 0.5, 0.7}) {
    const HeightField c = make_circle(256);
    const std::vector<double> H = curvature_field_grid(c, s);
    double mean = 0.0;
    for (double v : H) mean += v;
    mean /= static_cast<double>(H.size());
    double var = 0.0;
    for (double v : H) var += (v - mean) * (v - mean);
    var /= static_cast<double>(H.size());
    char name[64];
    std::snprintf(name, sizeof name, "alexandrov_constancy_s%.1f", s);
    detail::push_check(out, name, std::sqrt(var) / mean, 1e-6);
  }
  {
    const std::vector<double> H1 = curvature_field_grid(make_circle(256), 0.5);
    for (double r : {0.5, 2.0, 3.0}) {
      const std::vector<double> Hr =
          curvature_field_grid(make_circle(256, r), 0.5);
      double worst = 0.0;
      for (std::size_t j = 0; j < Hr.size(); ++j)
        worst = std::max(worst,
                         std::abs(Hr[j] * std::pow(r, 0.5) / H1[j] - 1.0));
      char name[64];
      std::snprintf(name, sizeof name, "circle_scaling_r%g", r);
      detail::push_check(out, name, worst, 1e-6);
    }
  }

  // chord quadrature against the direct principal-value oracle
  {
    const HeightField f = make_random_convex(128, seed);
    const std::vector<double> H = curvature_field_grid(f, 0.5);
    double worst = 0.0;
    for (std::size_t node = 0; node < 128; node += 16) {
      const double ref = pv_oracle(f, node, 0.5);
      worst = std::max(worst, std::abs(H[node] / ref - 1.0));
    }
    detail::push_check(out, "chord_vs_pv_oracle", worst, 1e-3);
  }

  // pointwise splitting identity behind the kernel expansion
  {
    double worst = 0.0;
    for (std::uint64_t k = 0; k < 2; ++k) {
      const HeightField f = make_random_convex(128, seed + k);
      worst = std::max(worst, split_data(f, 0.5).max_identity_residual);
    }
    detail::push_check(out, "splitting_identity", worst, 1e-10);
  }

  // kernel constant: two quadrature schemes, then symbol exactness
  {
    const double a = kernel_constant_series(0.5);
    const double b = kernel_constant_dyadic(0.5);
    detail::push_check(out, "kernel_constant_agreement",
                       std::abs(a - b) / std::max(1.0, std::abs(a)), 1e-8);
    const double cs = kernel_constant(0.5);
    detail::push_check(out, "symbol_exactness",
                       std::abs(compute_symbol(1.0, 0.5) / (2.0 * cs) - 1.0),
                       1e-12);
  }

  // closed-form single-mode solution of the exact integrator
  {
    const double s = 0.5;
    const double cs = kernel_constant(s);
    const double rate = 2.0 * cs * std::pow(3.0, 1.0 + s);
    const std::size_t n = 64;
    std::vector<double> f(n);
    for (std::size_t j = 0; j < n; ++j)
      f[j] = std::cos(3.0 * two_pi * static_cast<double>(j) /
                      static_cast<double>(n));
    SpectralState st = make_state(n);
    const SpectralSymbol sym = build_symbol([](double) { return 1.0; }, s);
    const double T = 0.25;
    st = evolve(st, sym, [&](double) { return f; }, T, T / 256.0);
    const std::vector<double> u = state_samples(st);
    const double amp = -std::expm1(-rate * T) / rate;
    double worst = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      worst = std::max(worst, std::abs(u[j] - amp * f[j]));
    detail::push_check(out, "duhamel_closed_form", worst, 1e-10);
  }

  // maximum principle over a seeded forcing corpus
  {
    const std::size_t n = 64;
    const SpectralSymbol sym = build_symbol([](double) { return 1.0; }, 0.5);
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
      Rng rng(seed + 100 + static_cast<std::uint64_t>(k));
      const std::vector<double> f = random_trig_samples(n, rng, 1, 12, 1.0);
      const Forcing forcing = [&](double) { return f; };
      SpectralState st = make_state(n);
      st = evolve(st, sym, forcing, 2.0, 2.0 / 512.0);
      worst = std::max(worst, max_principle_check(st, forcing).ratio);
    }
    detail::push_check(out, "max_principle_ratio", worst, 1.05);
  }

  // periodized operator matches the symbol at a resolved mode
  {
    const double s = 0.5;
    const std::size_t n = 256;
    const int k = 8;
    std::vector<double> u(n);
    for (std::size_t j = 0; j < n; ++j)
      u[j] = std::cos(k * two_pi * static_cast<double>(j) /
                      static_cast<double>(n));
    const std::vector<double> Lu = operator_quadrature(u, 1.0, s);
    double num = 0.0;
    for (std::size_t j = 0; j < n; ++j) num += -Lu[j] * u[j];
    const double lambda = 2.0 * num / static_cast<double>(n);
    const double predicted =
        2.0 * kernel_constant(s) * std::pow(static_cast<double>(k), 1.0 + s);
    detail::push_check(out, "symbol_quadrature_consistency_k8",
                       std::abs(lambda / predicted - 1.0), 0.1);
  }

  // dyadic block identity for an in-band mode
  {
    const std::size_t n = 256;
    std::vector<double> u(n);
    for (std::size_t j = 0; j < n; ++j)
      u[j] = std::cos(32.0 * two_pi * static_cast<double>(j) /
                      static_cast<double>(n));
    const std::vector<double> block = paley_block(u, 5);
    double worst = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      worst = std::max(worst, std::abs(block[j] - u[j]));
    detail::push_check(out, "paley_block_identity", worst, 1e-8);
  }

  // interpolation ratio stays bounded over a seeded corpus
  {
    double worst = 0.0;
    for (int k = 0; k < 10; ++k) {
      Rng rng(seed + 200 + static_cast<std::uint64_t>(k));
      const std::vector<double> u = random_trig_samples(128, rng, 1, 16, 1.2);
      worst = std::max(worst, interpolation_check(u, 0.25, 0.75, 0.5));
    }
    detail::push_check(out, "interpolation_ratio_bounded", worst, 100.0);
  }

  // slope constant of the circle
  {
    const ShapeMetrics m = shape_metrics(make_circle(256), 0.5);
    detail::push_check(out, "slope_constant_circle",
                       std::abs(m.slope_constant * std::pow(2.0, 0.5) - 1.0),
                       1e-2);
  }

  // flow structure: stationarity, mean-zero velocity, quadratic drift
  {
    const HeightField c = make_circle(128);
    const FlowState st1 = step(make_flow_state(c, 0.5, stable_dt(c, 0.5)));
    double dmax = 0.0;
    for (std::size_t j = 0; j < c.n; ++j)
      dmax = std::max(dmax, std::abs(st1.field.h[j] - c.h[j]));
    detail::push_check(out, "circle_stationarity", dmax, 1e-6);

    const HeightField e = make_ellipse(128, 1.3);
    const double dt = stable_dt(e, 0.5);
    const FlowState a = step(make_flow_state(e, 0.5, dt));
    const FlowState b = step(make_flow_state(e, 0.5, dt / 2.0));
    detail::push_check(out, "velocity_mean_zero", a.velocity_mean_residual,
                       1e-4);
    detail::push_check(out, "volume_drift_quadratic",
                       std::abs(a.volume_drift_raw / b.volume_drift_raw - 4.0),
                       1.2);
    detail::push_check(out, "area_renormalization",
                       std::abs(area(a.field) - pi), 1e-10);
  }

  return out;
}

inline std::string verify_jsonl(const std::vector<CheckResult>& checks) {
  std::string out;
  char buf[256];
  for (const auto& c : checks) {
    std::snprintf(buf, sizeof buf,
                  "{\"check\":\"%s\",\"value\":%.17g,\"bound\":%.17g,"
                  "\"pass\":%s}\n",
                  c.name.c_str(), c.value, c.bound,
                  c.pass ? "true" : "false");
    out += buf;
  }
  return out;
}

inline bool all_pass(const std::vector<CheckResult>& checks) {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return !checks.empty();
}

}  // namespace fracflow
