// fracflow: numerical laboratory for volume-preserving fractional curvature
// flow of convex planar sets.  Subcommands stage deterministic artifacts under
// --output_dir and finish with a hashed manifest.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fracflow/runner.hpp"

namespace {

constexpr const char* kUsage = R"(usage: fracflow <subcommand> [options] [key=value ...]

subcommands
  flow       evolve a convex shape by the volume-preserving flow
  curvature  evaluate the fractional curvature of a single shape
  spectral   run the model one-dimensional evolution for a chosen symbol
  norms      tabulate function-space norms for seeded test functions
  verify     run the cross-module verification suite (exit 0 iff all pass)

options
  --config PATH     load key=value lines or a JSON object before flags
  --key VALUE       same as key=value (flags win over the config file)
  --help            print this message

keys (defaults in parentheses)
  s (0.5)            kernel order, 0 < s < 1
  alpha (0.1)        Holder exponent, 0 < alpha < min{s, 1-s}
  N (256)            grid size, power of two in [16, 4096]
  T (20)             time horizon
  dt_override (none) fixed step override; "none" restores the stability rule
  shape (ellipse:1.3) circle[:r] | ellipse:a | polygon:m[:eps] | random | file:PATH
  seed (1)           RNG seed for shapes, forcings and test functions
  output_dir (out)   artifact directory, created if absent
  method (chord)     curvature scheme: chord | pv
  threads (1)        worker hint; FRACFLOW_THREADS overrides the default
  c_cfl (0.2)        stability fraction in (0, 1]
  record_target (2048)  approximate number of trace records
  perimeter_every (50)  steps between perimeter samples; 0 disables
  snapshot_every (0)    steps between shape snapshots; 0 disables
)";

int fail_usage(const std::string& msg) {
  std::fprintf(stderr, "{\"error\":\"config\",\"detail\":\"%s\"}\n",
               msg.c_str());
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace fracflow;

  std::vector<std::string> args(argv + 1, argv + argc);
  for (const auto& a : args)
    if (a == "--help" || a == "-h") {
      std::fputs(kUsage, stdout);
      return 0;
    }
  if (args.empty()) return fail_usage("missing subcommand");

  RunConfig cfg;
  std::string verify_report;
  try {
    cfg.subcommand = subcommand_from_name(args[0]);
    apply_env(cfg);

    // pass 1: config file, pass 2: remaining flags and key=value tokens
    std::string config_path;
    std::vector<std::string> overrides;
    for (std::size_t i = 1; i < args.size(); ++i) {
      const std::string& a = args[i];
      if (a == "--config") {
        if (i + 1 >= args.size()) throw ConfigError("--config needs a path");
        config_path = args[++i];
      } else if (a.rfind("--", 0) == 0) {
        const std::string key = a.substr(2);
        const auto eq = key.find('=');
        if (eq != std::string::npos) {
          overrides.push_back(key);
        } else {
          if (i + 1 >= args.size())
            throw ConfigError("flag --" + key + " needs a value");
          overrides.push_back(key + "=" + args[++i]);
        }
      } else if (a.find('=') != std::string::npos) {
        overrides.push_back(a);
      } else {
        throw ConfigError("unrecognized argument: " + a);
      }
    }
    if (!config_path.empty()) {
      std::ifstream in(config_path, std::ios::binary);
      if (!in) throw ConfigError("cannot read config file: " + config_path);
      std::ostringstream ss;
      ss << in.rdbuf();
      apply_config_text(cfg, ss.str());
    }
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      apply_key_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    validate_config(cfg);

    const int status = run_subcommand(cfg, &verify_report);
    if (cfg.subcommand == Subcommand::verify)
      std::fputs(verify_report.c_str(), stdout);
    return status;
  } catch (const ConfigError& e) {
    return fail_usage(e.what());
  } catch (const Error& e) {
    std::fprintf(stderr, "{\"error\":\"%s\",\"detail\":\"%s\"}\n",
                 e.kind().c_str(), e.what());
    if (e.kind() == "flow-halt") return 3;
    if (e.kind() == "accuracy") return 4;
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "{\"error\":\"internal\",\"detail\":\"%s\"}\n",
                 e.what());
    return 1;
  }
}
