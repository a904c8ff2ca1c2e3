#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fracflow/common.hpp"
#include "fracflow/curvature.hpp"
#include "fracflow/geometry.hpp"
#include "fracflow/norms.hpp"
#include "fracflow/spectral.hpp"

namespace fracflow {

// ---------------------------------------------------------------------------
// Volume-preserving flow of convex planar sets driven by the nonlocal
// curvature: normal speed -(H - H_bar), radial update dh/dt = V J / h,
// explicit Euler with the stability rule tied to the symbol of the linearized
// operator.  The enclosed area is renormalized to pi after every step and the
// barycenter is re-pinned to the origin whenever it drifts.
// ---------------------------------------------------------------------------

struct VelocityField {
  std::vector<double> v;      // per-node normal velocity
  double h_bar = 0.0;         // surface-weighted mean curvature
  double mean_residual = 0.0; // |int V dH| / |boundary length|
};

/// Normal velocity from a curvature field: V = -(H - H_bar) with the
/// arc-length-weighted mean.  The weighted mean of V vanishes by
/// construction; the residual reports the floating-point leftover.
inline VelocityField velocity_grid(const std::vector<double>& H,
                                   const HeightField& f) {
  if (H.size() != f.n) throw SizeError("velocity: curvature grid mismatch");
  VelocityField out;
  out.v.resize(f.n);
  double wsum = 0.0, hsum = 0.0;
  std::vector<double> J(f.n);
  for (std::size_t j = 0; j < f.n; ++j) {
    J[j] = std::sqrt(f.h[j] * f.h[j] + f.dh[j] * f.dh[j]);
    wsum += J[j];
    hsum += H[j] * J[j];
  }
  out.h_bar = hsum / wsum;
  double resid = 0.0;
  for (std::size_t j = 0; j < f.n; ++j) {
    out.v[j] = -(H[j] - out.h_bar);
    resid += out.v[j] * J[j];
  }
  out.mean_residual = std::abs(resid) / wsum;
  return out;
}

inline VelocityField velocity(const std::vector<CurvatureSample>& sample,
                              const HeightField& f) {
  std::vector<double> H(sample.size());
  for (std::size_t j = 0; j < sample.size(); ++j) H[j] = sample[j].value;
  return velocity_grid(H, f);
}

/// Stability rule dt = c_cfl (2 pi / N)^{1+s} / a_ref, where a_ref is the
/// symbol scale 2 c_s (min h)^{-(2+s)/2} of the linearization.
inline double stable_dt(const HeightField& f, double s, double c_cfl = 0.2,
                        double c_s = -1.0) {
  require_s(s);
  if (!(c_cfl > 0.0)) throw DomainError("cfl factor must be positive");
  if (c_s <= 0.0) c_s = kernel_constant(s);
  const double hmin = *std::min_element(f.h.begin(), f.h.end());
  const double a_ref = 2.0 * c_s * std::pow(hmin, -0.5 * (2.0 + s));
  return c_cfl * std::pow(two_pi / static_cast<double>(f.n), 1.0 + s) / a_ref;
}

struct FlowState {
  double t = 0.0;
  HeightField field;
  double dt = 0.0;
  double s = 0.5;
  std::size_t step_index = 0;
  std::vector<double> last_sample;   // curvature at the pre-step nodes
  double volume_drift_raw = 0.0;     // area change of the last raw update
  double velocity_mean_residual = 0.0;
};

inline FlowState make_flow_state(HeightField field, double s, double dt) {
  require_s(s);
  FlowState st;
  st.field = std::move(field);
  st.s = s;
  st.dt = dt;
  return st;
}

/// One explicit Euler step followed by volume renormalization.  Convexity
/// loss or a collapsing height field halts the flow with a diagnostic error
/// rather than being silently projected away.  The input state is left
/// intact so a halted step can still be inspected.
inline FlowState step(const FlowState& prev,
                      GridChordEvaluator* shared = nullptr) {
  if (!(prev.dt > 0.0)) throw DomainError("step: dt must be positive");
  const HeightField& f = prev.field;
  std::optional<GridChordEvaluator> local;
  if (!shared) local.emplace(f.n, prev.s);
  GridChordEvaluator& eval = shared ? *shared : *local;

  FlowState st = prev;
  eval(f, st.last_sample);
  const VelocityField vel = velocity_grid(st.last_sample, f);
  st.velocity_mean_residual = vel.mean_residual;

  const double area_before = area(f);
  const double dtheta = two_pi / static_cast<double>(f.n);
  std::vector<double> h(f.n);
  double area_raw = 0.0, bx = 0.0, by = 0.0;
  for (std::size_t j = 0; j < f.n; ++j) {
    const double J = std::sqrt(f.h[j] * f.h[j] + f.dh[j] * f.dh[j]);
    h[j] = f.h[j] + st.dt * vel.v[j] * J / f.h[j];
    if (!(h[j] > 0.0))
      throw FlowHaltError("flow halted: height field lost positivity");
    area_raw += h[j] * h[j];
    const double w = h[j] * h[j] * h[j];
    bx += w * std::cos(f.theta[j]);
    by += w * std::sin(f.theta[j]);
  }
  area_raw *= 0.5 * dtheta;
  st.volume_drift_raw = area_raw - area_before;
  const Vec2 c{bx * dtheta / (3.0 * area_raw), by * dtheta / (3.0 * area_raw)};

  // renormalize: recenter first when the barycenter drifted, then the exact
  // area scaling, mirroring the proven volume preservation
  HeightField g;
  try {
    if (norm(c) > 1e-8) {
      g = recenter_field(build_field(h), c);
      const double scale = std::sqrt(pi / area(g));
      for (double& v : g.h) v *= scale;
      g = build_field(g.h);
    } else {
      const double scale = std::sqrt(pi / area_raw);
      for (double& v : h) v *= scale;
      g = build_field(h);
    }
  } catch (const Error&) {
    throw FlowHaltError("flow halted: raw update is not a valid field");
  }

  const auto kappa = polar_curvature(g);
  if (*std::min_element(kappa.begin(), kappa.end()) <
      -convexity_tolerance(g))
    throw FlowHaltError("flow halted: convexity lost");

  st.field = std::move(g);
  st.t += st.dt;
  ++st.step_index;
  return st;
}

// ---------------------------------------------------------------------------
// Trace of a run: cadenced full records plus cheap per-step invariant
// monitors, the sparse perimeter samples, and the final (or halt) state.
// ---------------------------------------------------------------------------

struct FlowRecord {
  double t = 0.0;
  std::size_t step = 0;
  double sup_H = 0.0;
  double avg_H = 0.0;
  double dissipation = 0.0;
  double sup_dev = 0.0;        // sup |h - 1|
  double slope_constant = 0.0;
  double inradius = 0.0;
  double circumradius = 0.0;
  bool convex = true;
  double volume_drift_raw = 0.0;
  double p_s = std::numeric_limits<double>::quiet_NaN();  // sparse
  double c1s_norm = 0.0;       // discrete C^{1+s} norm of h
};

struct FlowMeta {
  double s = 0.5;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::string shape;
  std::string config_hash;
};

struct FlowTrace {
  FlowMeta meta;
  std::vector<FlowRecord> records;
  std::vector<std::pair<double, double>> perimeter_samples;  // (t, P_s)
  bool halted = false;
  std::string halt_reason;
  std::size_t steps_total = 0;
  double max_area_error = 0.0;      // vs pi, checked after every step
  double max_velocity_mean = 0.0;   // weighted-mean residual of V
  HeightField final_field;
  std::vector<double> final_curvature;
  double runtime_seconds = 0.0;
};

struct FlowOptions {
  double s = 0.5;
  double T = 20.0;
  double c_cfl = 0.2;
  double dt_override = -1.0;      // > 0 overrides the stability rule
  std::size_t record_target = 2048;
  std::size_t perimeter_every = 50;   // steps; 0 disables
  std::size_t snapshot_every = 0;     // steps; 0 disables the callback
};

inline FlowTrace run_flow(
    const HeightField& initial, const FlowOptions& opt, FlowMeta meta = {},
    const std::function<void(const FlowState&)>& snapshot = {}) {
  require_s(opt.s);
  if (!(opt.T > 0.0)) throw DomainError("run_flow: horizon must be positive");
  const auto clock_start = std::chrono::steady_clock::now();

  meta.s = opt.s;
  meta.n = initial.n;
  FlowTrace trace;
  trace.meta = std::move(meta);

  const double c_s = kernel_constant(opt.s);
  GridChordEvaluator eval(initial.n, opt.s);
  FlowState st = make_flow_state(initial, opt.s, 1.0);

  const double dt0 = opt.dt_override > 0.0
                         ? opt.dt_override
                         : stable_dt(initial, opt.s, opt.c_cfl, c_s);
  const std::size_t step_estimate =
      static_cast<std::size_t>(std::ceil(opt.T / dt0));
  std::size_t cadence =
      std::max<std::size_t>(1, step_estimate / std::max<std::size_t>(
                                                   1, opt.record_target));
  // align full records with perimeter sampling so the sparse p_s column
  // lands on records instead of only in the side table
  if (opt.perimeter_every && cadence > opt.perimeter_every / 2)
    cadence = std::max<std::size_t>(
        opt.perimeter_every,
        (cadence + opt.perimeter_every / 2) / opt.perimeter_every *
            opt.perimeter_every);

  std::vector<double> H;
  const auto record_now = [&](const FlowState& state, double p_s) {
    FlowRecord rec;
    rec.t = state.t;
    rec.step = state.step_index;
    rec.volume_drift_raw = state.volume_drift_raw;
    const HeightField& f = state.field;
    eval(f, H);  // last_sample holds pre-step curvature; re-evaluate here
    const VelocityField vel = velocity_grid(H, f);
    rec.avg_H = vel.h_bar;
    double wsum = 0.0;
    for (std::size_t j = 0; j < f.n; ++j) {
      const double J = std::sqrt(f.h[j] * f.h[j] + f.dh[j] * f.dh[j]);
      rec.sup_H = std::max(rec.sup_H, std::abs(H[j]));
      rec.dissipation += (H[j] - vel.h_bar) * (H[j] - vel.h_bar) * J;
      rec.sup_dev = std::max(rec.sup_dev, std::abs(f.h[j] - 1.0));
      wsum += J;
    }
    rec.dissipation *= two_pi / static_cast<double>(f.n);
    const ShapeMetrics m = shape_metrics(f, opt.s);
    rec.slope_constant = m.slope_constant;
    rec.inradius = m.inradius;
    rec.circumradius = m.circumradius;
    rec.convex = m.convex;
    // once |h - 1| sits at the rounding floor the deviation spectrum is
    // white and the resolution guard inside the norm (rightly) rejects it;
    // the norm itself has converged to the constant-field value 1.  A live
    // field whose tail the guard still rejects (barely-resolved initial
    // data) gets a NaN monitor entry instead of killing the run.
    if (rec.sup_dev > 1e-11) {
      try {
        rec.c1s_norm = ck_beta_norm(f.h, 1, opt.s);
      } catch (const ResolutionError&) {
        rec.c1s_norm = std::numeric_limits<double>::quiet_NaN();
      }
    } else {
      rec.c1s_norm = 1.0;
    }
    rec.p_s = p_s;
    trace.records.push_back(rec);
  };

  record_now(st, opt.perimeter_every
                     ? fractional_perimeter(st.field, opt.s)
                     : std::numeric_limits<double>::quiet_NaN());
  if (opt.perimeter_every)
    trace.perimeter_samples.emplace_back(0.0, trace.records.back().p_s);

  try {
    while (st.t < opt.T - 1e-12 * std::max(1.0, opt.T)) {
      st.dt = opt.dt_override > 0.0
                  ? opt.dt_override
                  : stable_dt(st.field, opt.s, opt.c_cfl, c_s);
      st.dt = std::min(st.dt, opt.T - st.t);
      st = step(st, &eval);
      ++trace.steps_total;

      trace.max_area_error =
          std::max(trace.max_area_error, std::abs(area(st.field) - pi));
      trace.max_velocity_mean =
          std::max(trace.max_velocity_mean, st.velocity_mean_residual);

      double p_s = std::numeric_limits<double>::quiet_NaN();
      if (opt.perimeter_every && st.step_index % opt.perimeter_every == 0) {
        p_s = fractional_perimeter(st.field, opt.s);
        trace.perimeter_samples.emplace_back(st.t, p_s);
      }
      const bool final_step = !(st.t < opt.T - 1e-12 * std::max(1.0, opt.T));
      if (st.step_index % cadence == 0 || final_step) record_now(st, p_s);
      if (snapshot && opt.snapshot_every &&
          st.step_index % opt.snapshot_every == 0)
        snapshot(st);
    }
  } catch (const FlowHaltError& halt) {
    trace.halted = true;
    trace.halt_reason = halt.what();
  } catch (const ResolutionError& halt) {
    // still-convex field that left the resolvable regime
    trace.halted = true;
    trace.halt_reason = std::string("flow halted: ") + halt.what();
  }

  trace.final_field = st.field;
  eval(st.field, trace.final_curvature);
  trace.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                    clock_start)
          .count();
  return trace;
}

// ---------------------------------------------------------------------------
// Diagnostics over a finished trace.
// ---------------------------------------------------------------------------

struct RateFit {
  double c = 0.0;        // decay rate (positive = decaying)
  double C = 0.0;        // amplitude
  double residual = 0.0; // rms misfit of log sup_dev
  std::size_t count = 0;
};

/// Least-squares fit of log sup|h-1| over records with t in [t0, t1].
inline RateFit fit_exponential_rate(const FlowTrace& trace, double t0,
                                    double t1) {
  std::vector<std::pair<double, double>> pts;
  double peak = 0.0;
  for (const auto& r : trace.records)
    if (r.t >= t0 && r.t <= t1) {
      if (!(r.sup_dev > 0.0))
        throw DegenerateInputError("rate fit: non-positive signal in window");
      pts.emplace_back(r.t, std::log(r.sup_dev));
      peak = std::max(peak, r.sup_dev);
    }
  if (pts.size() < 4)
    throw DegenerateInputError("rate fit: too few records in window");
  if (peak < 1e-12)
    throw DegenerateInputError("rate fit: signal at the noise floor");
  double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
  for (const auto& [x, y] : pts) {
    st += x;
    sy += y;
    stt += x * x;
    sty += x * y;
  }
  const double m = static_cast<double>(pts.size());
  const double denom = m * stt - st * st;
  if (!(std::abs(denom) > 0.0))
    throw DegenerateInputError("rate fit: degenerate time window");
  const double slope = (m * sty - st * sy) / denom;
  const double inter = (sy - slope * st) / m;
  RateFit fit;
  fit.c = -slope;
  fit.C = std::exp(inter);
  fit.count = pts.size();
  double rss = 0.0;
  for (const auto& [x, y] : pts) {
    const double e = y - (inter + slope * x);
    rss += e * e;
  }
  fit.residual = std::sqrt(rss / m);
  return fit;
}

struct MonitorRecord {
  double sup_H = 0.0;
  double slope_constant = 0.0;
  double inradius = 0.0;
  double circumradius = 0.0;
  double c1s_norm = 0.0;
};

inline MonitorRecord monitors(const FlowState& st) {
  MonitorRecord rec;
  std::vector<double> H;
  GridChordEvaluator eval(st.field.n, st.s);
  eval(st.field, H);
  for (double v : H) rec.sup_H = std::max(rec.sup_H, std::abs(v));
  const ShapeMetrics m = shape_metrics(st.field, st.s);
  rec.slope_constant = m.slope_constant;
  rec.inradius = m.inradius;
  rec.circumradius = m.circumradius;
  rec.c1s_norm = ck_beta_norm(st.field.h, 1, st.s);
  return rec;
}

// ---------------------------------------------------------------------------
// Serialization.
// ---------------------------------------------------------------------------

inline std::string trace_to_jsonl(const FlowTrace& trace) {
  std::string out;
  char buf[640];
  for (const auto& r : trace.records) {
    std::snprintf(buf, sizeof buf,
                  "{\"t\":%.17g,\"step\":%zu,\"sup_H\":%.17g,\"avg_H\":%.17g,"
                  "\"dissipation\":%.17g,\"sup_dev\":%.17g,"
                  "\"slope_constant\":%.17g,\"r\":%.17g,\"R\":%.17g,"
                  "\"convex\":%s,\"volume_drift_raw\":%.17g,",
                  r.t, r.step, r.sup_H, r.avg_H, r.dissipation, r.sup_dev,
                  r.slope_constant, r.inradius, r.circumradius,
                  r.convex ? "true" : "false", r.volume_drift_raw);
    out += buf;
    if (std::isnan(r.p_s))
      out += "\"p_s\":null,";
    else {
      std::snprintf(buf, sizeof buf, "\"p_s\":%.17g,", r.p_s);
      out += buf;
    }
    if (std::isnan(r.c1s_norm))
      out += "\"c1s_norm\":null}\n";
    else {
      std::snprintf(buf, sizeof buf, "\"c1s_norm\":%.17g}\n", r.c1s_norm);
      out += buf;
    }
  }
  return out;
}

inline std::string flow_summary_csv(const FlowTrace& trace,
                                    const RateFit& fit) {
  std::string out = "config_hash,c,C,residual,runtime_seconds\n";
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%.17g\n",
                trace.meta.config_hash.c_str(), fit.c, fit.C, fit.residual,
                trace.runtime_seconds);
  out += buf;
  return out;
}

}  // namespace fracflow
