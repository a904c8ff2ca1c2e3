#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <functional>
#include <string>
#include <vector>

#include "fracflow/config.hpp"
#include "fracflow/curvature.hpp"
#include "fracflow/flow.hpp"
#include "fracflow/norms.hpp"
#include "fracflow/rng.hpp"
#include "fracflow/spectral.hpp"
#include "fracflow/verify.hpp"

namespace fracflow {

namespace detail {

inline std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string metrics_csv(const ShapeMetrics& m) {
  char buf[320];
  std::snprintf(buf, sizeof buf,
                "area,barycenter_x,barycenter_y,inradius,circumradius,"
                "min_curvature,convex,slope_constant\n"
                "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%.17g\n",
                m.area, m.barycenter.x, m.barycenter.y, m.inradius,
                m.circumradius, m.min_curvature, m.convex ? 1 : 0,
                m.slope_constant);
  return buf;
}

inline std::string curvature_csv_from_grid(const HeightField& f,
                                           const std::vector<double>& H) {
  std::vector<CurvatureSample> samples(f.n);
  for (std::size_t j = 0; j < f.n; ++j)
    samples[j] = {f.theta[j], H[j], CurvatureMethod::chord_quadrature, 0};
  return curvature_to_csv(samples);
}

inline int run_flow_subcommand(const RunConfig& cfg, ArtifactWriter& out,
                               std::vector<std::string>& checks) {
  const HeightField initial = make_shape(cfg);
  FlowOptions opt;
  opt.s = cfg.s;
  opt.T = cfg.T;
  opt.c_cfl = cfg.c_cfl;
  opt.dt_override = cfg.dt_override;
  opt.record_target = cfg.record_target;
  opt.perimeter_every = cfg.perimeter_every;
  opt.snapshot_every = cfg.snapshot_every;
  FlowMeta meta;
  meta.seed = cfg.seed;
  meta.shape = cfg.shape;
  meta.config_hash = config_hash(cfg);

  std::function<void(const FlowState&)> snapshot;
  if (cfg.snapshot_every)
    snapshot = [&](const FlowState& st) {
      char name[64];
      std::snprintf(name, sizeof name, "snapshot_%08zu.csv", st.step_index);
      out.write(name, field_to_csv(st.field));
    };
  const FlowTrace trace = run_flow(initial, opt, meta, snapshot);

  out.write("trace.jsonl", trace_to_jsonl(trace));
  out.write("final_shape.csv", field_to_csv(trace.final_field));
  out.write("final_curvature.csv",
            curvature_csv_from_grid(trace.final_field,
                                    trace.final_curvature));

  // summary rate fit: first window in which the deviation is resolvable
  RateFit fit;
  for (const auto& window :
       {std::pair{0.25 * cfg.T, cfg.T}, std::pair{0.05 * cfg.T, 0.5 * cfg.T},
        std::pair{0.01 * cfg.T, 0.25 * cfg.T}}) {
    try {
      fit = fit_exponential_rate(trace, window.first, window.second);
      break;
    } catch (const DegenerateInputError&) {
      fit = RateFit{};
    }
  }
  out.write("summary.csv", flow_summary_csv(trace, fit));
  if (trace.halted) out.write("halt_reason.txt", trace.halt_reason + "\n");

  checks = {"area_renormalization", "velocity_mean_zero",
            "convexity_every_step"};
  if (cfg.perimeter_every) checks.push_back("perimeter_monotonicity_sampled");
  return trace.halted ? 3 : 0;
}

inline int run_curvature_subcommand(const RunConfig& cfg, ArtifactWriter& out,
                                    std::vector<std::string>& checks) {
  const HeightField f = make_shape(cfg);
  CurvatureOptions opts;
  opts.method = cfg.method == "pv" ? CurvatureMethod::pv_oracle
                                   : CurvatureMethod::chord_quadrature;
  const std::vector<CurvatureSample> samples = curvature_field(f, cfg.s, opts);
  out.write("curvature.csv", curvature_to_csv(samples));
  out.write("metrics.csv", metrics_csv(shape_metrics(f, cfg.s)));
  out.write("shape.csv", field_to_csv(f));
  checks = {cfg.method == "pv" ? "pv_cutoff_extrapolation"
                               : "chord_declared_accuracy"};
  return 0;
}

inline int run_spectral_subcommand(const RunConfig& cfg, ArtifactWriter& out,
                                   std::vector<std::string>& checks) {
  const SpectralSymbol sym = build_symbol([](double) { return 1.0; }, cfg.s);
  Rng rng(cfg.seed);
  const int kmax = std::min<int>(24, static_cast<int>(cfg.N) / 4);
  const std::vector<double> f =
      random_trig_samples(cfg.N, rng, 1, kmax, 1.2);
  SpectralState st = make_state(cfg.N);
  st = evolve(st, sym, [&](double) { return f; }, cfg.T, cfg.T / 1024.0);
  out.write("spectral_trace.jsonl",
            spectral_trace_jsonl(st, sym, [&](double) { return f; },
                                 cfg.alpha));

  // sampled planar table for the identity coefficient field
  const SpectralSymbol table = build_symbol(
      [](double) {
        return SymMat2{1.0, 0.0, 1.0};
      },
      cfg.s, 64, 16, 1.0);
  out.write("symbol_table.csv", symbol_table_csv(table));
  checks = {"ellipticity_window", "mode_reality"};
  return 0;
}

inline int run_norms_subcommand(const RunConfig& cfg, ArtifactWriter& out,
                                std::vector<std::string>& checks) {
  std::vector<NormRow> rows;
  const double s2 = cfg.s + cfg.alpha;
  const double theta = cfg.alpha / (0.5 * cfg.s + cfg.alpha);
  for (int k = 0; k < 8; ++k) {
    Rng rng(cfg.seed + static_cast<std::uint64_t>(k));
    const int kmax = std::min<int>(16, static_cast<int>(cfg.N) / 4);
    const std::vector<double> u =
        random_trig_samples(cfg.N, rng, 1, kmax, 1.2);
    char id[32];
    std::snprintf(id, sizeof id, "rng%d", k);
    rows.push_back({id, "C0_alpha", ck_beta_norm(u, 0, cfg.alpha), cfg.N});
    rows.push_back({id, "C1", ck_beta_norm(u, 1, 0.0), cfg.N});
    rows.push_back(
        {id, "C1_s_alpha", ck_beta_norm(u, 1, cfg.s + cfg.alpha), cfg.N});
    rows.push_back({id, "LP_holder_s", fourier_holder_norm(u, cfg.s), cfg.N});
    rows.push_back({id, "interp_ratio",
                    interpolation_check(u, 0.5 * cfg.s, s2, theta), cfg.N});
  }
  out.write("norms_table.csv", norm_table_csv(rows));
  checks = {"resolution_guard"};
  return 0;
}

inline int run_verify_subcommand(const RunConfig& cfg, ArtifactWriter& out,
                                 std::vector<std::string>& checks,
                                 std::string* report_out) {
  const std::vector<CheckResult> results = run_verification(cfg.seed);
  const std::string report = verify_jsonl(results);
  out.write("verify.jsonl", report);
  for (const auto& r : results) checks.push_back(r.name);
  if (report_out) *report_out = report;
  return all_pass(results) ? 0 : 1;
}

}  // namespace detail

/// Dispatches a validated config, stages every artifact under output_dir,
/// and finishes with manifest.json (the only timestamped file).  Returns the
/// process exit status; 0 means success with all checks green.
inline int run_subcommand(const RunConfig& cfg,
                          std::string* verify_report = nullptr) {
  validate_config(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  ArtifactWriter out(cfg.output_dir);
  std::vector<std::string> checks;
  int status = 0;
  switch (cfg.subcommand) {
    case Subcommand::flow:
      status = detail::run_flow_subcommand(cfg, out, checks);
      break;
    case Subcommand::curvature:
      status = detail::run_curvature_subcommand(cfg, out, checks);
      break;
    case Subcommand::spectral:
      status = detail::run_spectral_subcommand(cfg, out, checks);
      break;
    case Subcommand::norms:
      status = detail::run_norms_subcommand(cfg, out, checks);
      break;
    case Subcommand::verify:
      status = detail::run_verify_subcommand(cfg, out, checks, verify_report);
      break;
  }
  const double runtime =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  out.write_manifest(cfg, checks, runtime, detail::utc_timestamp());
  return status;
}

}  // namespace fracflow
