#pragma once

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fracflow/common.hpp"
#include "fracflow/geometry.hpp"

namespace fracflow {

enum class Subcommand { flow, curvature, spectral, norms, verify };

inline const char* subcommand_name(Subcommand c) {
  switch (c) {
    case Subcommand::flow: return "flow";
    case Subcommand::curvature: return "curvature";
    case Subcommand::spectral: return "spectral";
    case Subcommand::norms: return "norms";
    case Subcommand::verify: return "verify";
  }
  return "?";
}

inline Subcommand subcommand_from_name(const std::string& name) {
  if (name == "flow") return Subcommand::flow;
  if (name == "curvature") return Subcommand::curvature;
  if (name == "spectral") return Subcommand::spectral;
  if (name == "norms") return Subcommand::norms;
  if (name == "verify") return Subcommand::verify;
  throw ConfigError("unknown subcommand: " + name);
}

struct RunConfig {
  Subcommand subcommand = Subcommand::verify;
  double s = 0.5;
  double alpha = 0.1;
  std::size_t N = 256;
  double T = 20.0;
  double dt_override = -1.0;  // unset when <= 0
  std::string shape = "ellipse:1.3";
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  std::string method = "chord";  // curvature scheme: chord | pv
  int threads = 1;
  double c_cfl = 0.2;
  std::size_t record_target = 2048;
  std::size_t perimeter_every = 50;
  std::size_t snapshot_every = 0;
  bool alpha_set = false;  // whether alpha came from user input
};

namespace detail {

inline double to_real(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a real number, got '" + v + "'");
  }
  if (used != v.size())
    throw ConfigError(key + ": expected a real number, got '" + v + "'");
  return x;
}

inline std::uint64_t to_unsigned(const std::string& key,
                                 const std::string& v) {
  if (v.empty() || v[0] == '-')
    throw ConfigError(key + ": expected a non-negative integer, got '" + v +
                      "'");
  std::size_t used = 0;
  std::uint64_t x = 0;
  try {
    x = std::stoull(v, &used);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v +
                      "'");
  }
  if (used != v.size())
    throw ConfigError(key + ": expected a non-negative integer, got '" + v +
                      "'");
  return x;
}

}  // namespace detail

/// Applies one key=value assignment.  Unknown keys are rejected so typos
/// cannot silently fall back to defaults.
inline void apply_key_value(RunConfig& cfg, const std::string& key,
                            const std::string& value) {
  if (key == "subcommand") {
    cfg.subcommand = subcommand_from_name(value);
  } else if (key == "s") {
    cfg.s = detail::to_real(key, value);
  } else if (key == "alpha") {
    cfg.alpha = detail::to_real(key, value);
    cfg.alpha_set = true;
  } else if (key == "N") {
    cfg.N = detail::to_unsigned(key, value);
  } else if (key == "T") {
    cfg.T = detail::to_real(key, value);
  } else if (key == "dt_override") {
    if (value == "none")
      cfg.dt_override = -1.0;
    else
      cfg.dt_override = detail::to_real(key, value);
  } else if (key == "shape") {
    cfg.shape = value;
  } else if (key == "seed") {
    cfg.seed = detail::to_unsigned(key, value);
  } else if (key == "output_dir") {
    cfg.output_dir = value;
  } else if (key == "method") {
    if (value != "chord" && value != "pv")
      throw ConfigError("method: expected chord or pv, got '" + value + "'");
    cfg.method = value;
  } else if (key == "threads") {
    cfg.threads = static_cast<int>(detail::to_unsigned(key, value));
  } else if (key == "c_cfl") {
    cfg.c_cfl = detail::to_real(key, value);
  } else if (key == "record_target") {
    cfg.record_target = detail::to_unsigned(key, value);
  } else if (key == "perimeter_every") {
    cfg.perimeter_every = detail::to_unsigned(key, value);
  } else if (key == "snapshot_every") {
    cfg.snapshot_every = detail::to_unsigned(key, value);
  } else {
    throw ConfigError("unknown key: " + key);
  }
}

namespace detail {

// Minimal flat JSON object reader: string, number, bool, and null values
// only.  Deliberately rejects nesting; the config format is one level deep.
inline std::vector<std::pair<std::string, std::string>> parse_flat_json(
    const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::size_t i = 0;
  const auto skip_ws = [&] {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i])))
      ++i;
  };
  const auto parse_string = [&]() -> std::string {
    std::string s;
    ++i;  // opening quote
    while (i < text.size() && text[i] != '"') {
      if (text[i] == '\\') {
        ++i;
        if (i >= text.size()) break;
        switch (text[i]) {
          case 'n': s += '\n'; break;
          case 't': s += '\t'; break;
          default: s += text[i];
        }
      } else {
        s += text[i];
      }
      ++i;
    }
    if (i >= text.size()) throw ConfigError("json: unterminated string");
    ++i;  // closing quote
    return s;
  };

  skip_ws();
  if (i >= text.size() || text[i] != '{')
    throw ConfigError("json: expected an object");
  ++i;
  skip_ws();
  if (i < text.size() && text[i] == '}') return out;
  while (true) {
    skip_ws();
    if (i >= text.size() || text[i] != '"')
      throw ConfigError("json: expected a key string");
    const std::string key = parse_string();
    skip_ws();
    if (i >= text.size() || text[i] != ':')
      throw ConfigError("json: expected ':' after key " + key);
    ++i;
    skip_ws();
    if (i >= text.size()) throw ConfigError("json: missing value for " + key);
    std::string value;
    if (text[i] == '"') {
      value = parse_string();
    } else if (text[i] == '{' || text[i] == '[') {
      throw ConfigError("json: nested values are not supported (key " + key +
                        ")");
    } else {
      while (i < text.size() && text[i] != ',' && text[i] != '}' &&
             !std::isspace(static_cast<unsigned char>(text[i])))
        value += text[i++];
      if (value.empty()) throw ConfigError("json: missing value for " + key);
    }
    if (value == "null") {
      // explicit null leaves the default in place
    } else {
      out.emplace_back(key, value);
    }
    skip_ws();
    if (i < text.size() && text[i] == ',') {
      ++i;
      continue;
    }
    if (i < text.size() && text[i] == '}') {
      ++i;
      break;
    }
    throw ConfigError("json: expected ',' or '}' after value of " + key);
  }
  skip_ws();
  if (i != text.size()) throw ConfigError("json: trailing content");
  return out;
}

}  // namespace detail

/// Layers configuration text onto an existing config.  The text is either
/// whitespace-separated key=value tokens ('#' comments to end of line) or a
/// single flat JSON object.
inline void apply_config_text(RunConfig& cfg, const std::string& text) {
  std::size_t first = 0;
  while (first < text.size() &&
         std::isspace(static_cast<unsigned char>(text[first])))
    ++first;
  if (first < text.size() && text[first] == '{') {
    for (const auto& [k, v] : detail::parse_flat_json(text))
      apply_key_value(cfg, k, v);
    return;
  }
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream tokens(line);
    std::string tok;
    while (tokens >> tok) {
      const std::size_t eq = tok.find('=');
      if (eq == std::string::npos || eq == 0)
        throw ConfigError("expected key=value, got '" + tok + "'");
      apply_key_value(cfg, tok.substr(0, eq), tok.substr(eq + 1));
    }
  }
}

/// Validates the cross-field invariants.  alpha participates only where a
/// Holder exponent is consumed (or when the user set one explicitly).
inline void validate_config(const RunConfig& cfg) {
  if (!(cfg.s > 0.0 && cfg.s < 1.0))
    throw ConfigError("s: must lie in (0, 1)");
  if (!is_power_of_two(cfg.N) || cfg.N < 16 || cfg.N > 4096)
    throw ConfigError("N: must be a power of two in [16, 4096]");
  const bool alpha_used = cfg.alpha_set ||
                          cfg.subcommand == Subcommand::spectral ||
                          cfg.subcommand == Subcommand::norms;
  if (alpha_used) {
    const double cap = std::min(cfg.s, 1.0 - cfg.s);
    if (!(cfg.alpha > 0.0 && cfg.alpha < cap))
      throw ConfigError("alpha: must lie in (0, min{s, 1-s})");
  }
  if (!(cfg.T > 0.0)) throw ConfigError("T: must be positive");
  if (cfg.dt_override > 0.0 && !(cfg.dt_override < cfg.T))
    throw ConfigError("dt_override: must be smaller than T");
  if (cfg.threads < 1) throw ConfigError("threads: must be at least 1");
  if (!(cfg.c_cfl > 0.0 && cfg.c_cfl <= 1.0))
    throw ConfigError("c_cfl: must lie in (0, 1]");
  if (cfg.record_target == 0)
    throw ConfigError("record_target: must be positive");
  if (cfg.output_dir.empty()) throw ConfigError("output_dir: must be set");
  if (cfg.shape.empty()) throw ConfigError("shape: must be set");
}

/// Full parse: defaults, then the text, then validation.
inline RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  apply_config_text(cfg, text);
  validate_config(cfg);
  return cfg;
}

/// FRACFLOW_THREADS mirrors the threads flag (flags still win).
inline void apply_env(RunConfig& cfg) {
  if (const char* v = std::getenv("FRACFLOW_THREADS"))
    apply_key_value(cfg, "threads", v);
}

/// Canonical key=value rendering; the basis for hashing and the manifest.
inline std::vector<std::pair<std::string, std::string>> config_items(
    const RunConfig& cfg) {
  const auto real = [](double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return std::string(buf);
  };
  std::vector<std::pair<std::string, std::string>> kv;
  kv.emplace_back("N", std::to_string(cfg.N));
  kv.emplace_back("T", real(cfg.T));
  kv.emplace_back("alpha", real(cfg.alpha));
  kv.emplace_back("c_cfl", real(cfg.c_cfl));
  kv.emplace_back("dt_override",
                  cfg.dt_override > 0.0 ? real(cfg.dt_override) : "none");
  kv.emplace_back("method", cfg.method);
  kv.emplace_back("perimeter_every", std::to_string(cfg.perimeter_every));
  kv.emplace_back("record_target", std::to_string(cfg.record_target));
  kv.emplace_back("s", real(cfg.s));
  kv.emplace_back("seed", std::to_string(cfg.seed));
  kv.emplace_back("shape", cfg.shape);
  kv.emplace_back("snapshot_every", std::to_string(cfg.snapshot_every));
  kv.emplace_back("subcommand", subcommand_name(cfg.subcommand));
  kv.emplace_back("threads", std::to_string(cfg.threads));
  return kv;
}

inline std::string config_canonical_string(const RunConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : config_items(cfg)) {
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

inline std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hash_hex(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

inline std::string config_hash(const RunConfig& cfg) {
  // output_dir is a placement choice, not part of the experiment identity;
  // everything else participates
  std::string basis;
  for (const auto& [k, v] : config_items(cfg)) {
    if (k == "threads") continue;  // orchestration, not numerics
    basis += k;
    basis += '=';
    basis += v;
    basis += '\n';
  }
  return hash_hex(fnv1a64(basis));
}

// ---------------------------------------------------------------------------
// Shape descriptors: circle[:r], ellipse:a, polygon:m[:eps], random,
// file:path.
// ---------------------------------------------------------------------------

inline HeightField make_shape(const RunConfig& cfg) {
  const std::string& d = cfg.shape;
  const auto split = [&] {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
      const std::size_t colon = d.find(':', start);
      if (colon == std::string::npos) {
        parts.push_back(d.substr(start));
        return parts;
      }
      parts.push_back(d.substr(start, colon - start));
      start = colon + 1;
    }
  }();
  const std::string& kind = split[0];
  if (kind == "circle") {
    if (split.size() == 1) return make_circle(cfg.N);
    if (split.size() == 2)
      return make_circle(cfg.N, detail::to_real("shape", split[1]));
  } else if (kind == "ellipse") {
    if (split.size() == 2)
      return make_ellipse(cfg.N, detail::to_real("shape", split[1]));
  } else if (kind == "polygon") {
    if (split.size() == 2)
      return make_polygon(
          cfg.N,
          static_cast<std::size_t>(detail::to_unsigned("shape", split[1])),
          {});
    if (split.size() == 3)
      return make_polygon(
          cfg.N,
          static_cast<std::size_t>(detail::to_unsigned("shape", split[1])),
          detail::to_real("shape", split[2]));
  } else if (kind == "random") {
    if (split.size() == 1) return make_random_convex(cfg.N, cfg.seed);
  } else if (kind == "file") {
    if (split.size() >= 2) {
      const std::string path = d.substr(5);
      std::ifstream in(path, std::ios::binary);
      if (!in) throw ConfigError("shape: cannot read file " + path);
      std::ostringstream buf;
      buf << in.rdbuf();
      HeightField f = field_from_csv(buf.str());
      if (f.n != cfg.N)
        throw ConfigError("shape: file grid size " + std::to_string(f.n) +
                          " does not match N=" + std::to_string(cfg.N));
      return f;
    }
  }
  throw ConfigError("shape: unrecognized descriptor '" + d + "'");
}

// ---------------------------------------------------------------------------
// Artifact staging and the manifest.  Numerical artifacts are a pure
// function of (config, seed); wall-clock data lives only here.
// ---------------------------------------------------------------------------

struct ArtifactEntry {
  std::string name;
  std::size_t bytes = 0;
  std::string fnv1a64;
};

class ArtifactWriter {
 public:
  explicit ArtifactWriter(std::string dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec)
      throw ConfigError("output_dir: cannot create " + dir_ + ": " +
                        ec.message());
  }

  const std::string& dir() const { return dir_; }

  void write(const std::string& name, const std::string& content) {
    const std::string path = dir_ + "/" + name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot open " + path + " for writing");
    out.write(content.data(),
              static_cast<std::streamsize>(content.size()));
    if (!out) throw ConfigError("short write to " + path);
    entries_.push_back({name, content.size(), hash_hex(fnv1a64(content))});
  }

  const std::vector<ArtifactEntry>& entries() const { return entries_; }

  /// Emits manifest.json listing every artifact with its content hash; the
  /// manifest itself is the only artifact carrying timestamps.
  void write_manifest(const RunConfig& cfg,
                      const std::vector<std::string>& checks,
                      double runtime_seconds, const std::string& timestamp) {
    std::string j = "{\n  \"tool\": \"fracflow\",\n";
    j += "  \"subcommand\": \"";
    j += subcommand_name(cfg.subcommand);
    j += "\",\n  \"config_hash\": \"" + config_hash(cfg) + "\",\n";
    j += "  \"seed\": " + std::to_string(cfg.seed) + ",\n";
    j += "  \"timestamp_utc\": \"" + timestamp + "\",\n";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", runtime_seconds);
    j += "  \"runtime_seconds\": " + std::string(buf) + ",\n";
    j += "  \"config\": {\n";
    const auto items = config_items(cfg);
    for (std::size_t i = 0; i < items.size(); ++i)
      j += "    \"" + items[i].first + "\": \"" + items[i].second +
           (i + 1 < items.size() ? "\",\n" : "\"\n");
    j += "  },\n  \"checks\": [";
    for (std::size_t i = 0; i < checks.size(); ++i)
      j += "\"" + checks[i] + (i + 1 < checks.size() ? "\", " : "\"");
    j += "],\n  \"artifacts\": [\n";
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const ArtifactEntry& e = entries_[i];
      j += "    {\"name\": \"" + e.name +
           "\", \"bytes\": " + std::to_string(e.bytes) + ", \"fnv1a64\": \"" +
           e.fnv1a64 + (i + 1 < entries_.size() ? "\"},\n" : "\"}\n");
    }
    j += "  ]\n}\n";
    const std::string path = dir_ + "/manifest.json";
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot open " + path + " for writing");
    out << j;
  }

 private:
  std::string dir_;
  std::vector<ArtifactEntry> entries_;
};

}  // namespace fracflow
