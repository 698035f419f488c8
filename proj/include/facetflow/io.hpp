// Configuration parsing, CSV serialization and the run manifest.
//
// Config schema (JSON; every key optional, unknown keys are a hard error):
//
//   {
//     "nx": 200, "nt": 10, "T": 1e-2, "epsilon": 0.04,
//     "mobility": {"variant": "exact-sign"|"smoothed-sign", "slope": 10.0},
//     "pdhg": {"lambda": 500.0, "sigma": 5e-4, "delta": 5e-6,
//              "max_iter": 200000, "penalty": "h1-dot"|"l2",
//              "ergodic_tracking": false},
//     "initial": {"kind": "sine"|"jump"|"facet"|"zero"},
//     "output": {"dir": "out", "snapshot_stride": 1},
//     "run": {"continue_on_nonconvergence": false,
//             "validation": "warn"|"strict", "use_fft": true}
//   }
//
// The default output directory comes from $FACETFLOW_OUTDIR when set,
// overridable by output.dir or the --output flag.
//
// CSV layouts are fixed: snapshots are long-format `t,x,h`; diagnostics are
// `n,t,tv_energy,mob_l1,mob_inv_l1,inner_iters,converged,phi_before,
// phi_after`; studies are `param,value,variant`. Floats carry 17 significant
// digits via to_chars, '.' decimal separator, '\n' line endings, so repeated
// runs of one config are byte-identical.
#pragma once

#include <nlohmann/json.hpp>

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "facetflow/experiments.hpp"
#include "facetflow/flow.hpp"

namespace facetflow {

using json = nlohmann::json;

struct Config {
  FlowConfig flow;
  std::string output_dir;  // resolved: flag > config > $FACETFLOW_OUTDIR > "out"
};

inline const char* kOutputDirEnvVar = "FACETFLOW_OUTDIR";

inline std::string default_output_dir() {
  if (const char* env = std::getenv(kOutputDirEnvVar); env && *env) return env;
  return "out";
}

// ---------------------------------------------------------------------------
// number formatting: 17 significant digits, locale-independent
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] =
      std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

// ---------------------------------------------------------------------------
// config <-> json
// ---------------------------------------------------------------------------

namespace detail {

[[noreturn]] inline void config_fail(const std::string& path,
                                     const std::string& what) {
  throw std::invalid_argument("config error at '" + path + "': " + what);
}

inline void check_keys(const json& j, const std::string& path,
                       std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) { ok = true; break; }
    if (!ok) config_fail(path + "." + it.key(), "unknown key");
  }
}

template <typename T>
void read(const json& j, const std::string& path, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    config_fail(path + "." + key, e.what());
  }
}

inline void read_enum(const json& j, const std::string& path, const char* key,
                      SignVariant& out) {
  if (!j.contains(key)) return;
  const std::string s = j.at(key).get<std::string>();
  if (s == "exact-sign") out = SignVariant::exact_sign;
  else if (s == "smoothed-sign") out = SignVariant::smoothed_sign;
  else config_fail(path + "." + key, "expected 'exact-sign' or 'smoothed-sign'");
}

inline void read_enum(const json& j, const std::string& path, const char* key,
                      PenaltyNorm& out) {
  if (!j.contains(key)) return;
  const std::string s = j.at(key).get<std::string>();
  if (s == "h1-dot") out = PenaltyNorm::h1_dot;
  else if (s == "l2") out = PenaltyNorm::l2;
  else config_fail(path + "." + key, "expected 'h1-dot' or 'l2'");
}

inline void read_enum(const json& j, const std::string& path, const char* key,
                      InitialKind& out) {
  if (!j.contains(key)) return;
  try {
    out = initial_kind_from_string(j.at(key).get<std::string>());
  } catch (const std::invalid_argument& e) {
    config_fail(path + "." + key, e.what());
  }
}

inline void read_enum(const json& j, const std::string& path, const char* key,
                      ValidationMode& out) {
  if (!j.contains(key)) return;
  const std::string s = j.at(key).get<std::string>();
  if (s == "warn") out = ValidationMode::warn;
  else if (s == "strict") out = ValidationMode::strict;
  else config_fail(path + "." + key, "expected 'warn' or 'strict'");
}

}  // namespace detail

/// Applies a JSON document on top of the given defaults. Unknown keys and
/// type mismatches are hard errors naming the key path; constraint
/// violations surface through FlowConfig::check with the same prefix.
inline Config parse_config(const json& j, Config cfg = Config{}) {
  using namespace detail;
  if (!j.is_object()) throw std::invalid_argument("config error: root must be an object");
  check_keys(j, "$", {"nx", "nt", "T", "epsilon", "mobility", "pdhg",
                      "initial", "output", "run"});
  read(j, "$", "nx", cfg.flow.n_x);
  read(j, "$", "nt", cfg.flow.n_t);
  read(j, "$", "T", cfg.flow.final_time);
  read(j, "$", "epsilon", cfg.flow.mobility.mollifier.epsilon);
  if (j.contains("mobility")) {
    const json& m = j.at("mobility");
    check_keys(m, "$.mobility", {"variant", "slope"});
    read_enum(m, "$.mobility", "variant", cfg.flow.mobility.variant);
    read(m, "$.mobility", "slope", cfg.flow.mobility.slope);
  }
  if (j.contains("pdhg")) {
    const json& p = j.at("pdhg");
    check_keys(p, "$.pdhg", {"lambda", "sigma", "delta", "max_iter", "penalty",
                             "ergodic_tracking"});
    read(p, "$.pdhg", "lambda", cfg.flow.pdhg.lambda);
    read(p, "$.pdhg", "sigma", cfg.flow.pdhg.sigma);
    read(p, "$.pdhg", "delta", cfg.flow.pdhg.delta);
    read(p, "$.pdhg", "max_iter", cfg.flow.pdhg.max_iter);
    read_enum(p, "$.pdhg", "penalty", cfg.flow.pdhg.penalty);
    read(p, "$.pdhg", "ergodic_tracking", cfg.flow.pdhg.ergodic_tracking);
  }
  if (j.contains("initial")) {
    const json& i = j.at("initial");
    check_keys(i, "$.initial", {"kind"});
    read_enum(i, "$.initial", "kind", cfg.flow.initial);
  }
  if (j.contains("output")) {
    const json& o = j.at("output");
    check_keys(o, "$.output", {"dir", "snapshot_stride"});
    read(o, "$.output", "dir", cfg.output_dir);
    read(o, "$.output", "snapshot_stride", cfg.flow.snapshot_stride);
  }
  if (j.contains("run")) {
    const json& r = j.at("run");
    check_keys(r, "$.run", {"continue_on_nonconvergence", "validation", "use_fft"});
    read(r, "$.run", "continue_on_nonconvergence",
         cfg.flow.continue_on_nonconvergence);
    read_enum(r, "$.run", "validation", cfg.flow.validation);
    read(r, "$.run", "use_fft", cfg.flow.use_fft_convolution);
  }
  try {
    cfg.flow.check();
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string("config error: ") + e.what());
  }
  if (cfg.output_dir.empty()) cfg.output_dir = default_output_dir();
  return cfg;
}

inline Config parse_config_file(const std::string& path,
                                Config defaults = Config{}) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config error: cannot open '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config error in '" + path + "': " + e.what());
  }
  return parse_config(j, std::move(defaults));
}

inline json serialize_config(const Config& cfg) {
  const FlowConfig& f = cfg.flow;
  return json{
      {"nx", f.n_x},
      {"nt", f.n_t},
      {"T", f.final_time},
      {"epsilon", f.mobility.mollifier.epsilon},
      {"mobility",
       {{"variant", f.mobility.variant == SignVariant::exact_sign
                        ? "exact-sign"
                        : "smoothed-sign"},
        {"slope", f.mobility.slope}}},
      {"pdhg",
       {{"lambda", f.pdhg.lambda},
        {"sigma", f.pdhg.sigma},
        {"delta", f.pdhg.delta},
        {"max_iter", f.pdhg.max_iter},
        {"penalty", f.pdhg.penalty == PenaltyNorm::h1_dot ? "h1-dot" : "l2"},
        {"ergodic_tracking", f.pdhg.ergodic_tracking}}},
      {"initial", {{"kind", to_string(f.initial)}}},
      {"output", {{"dir", cfg.output_dir}, {"snapshot_stride", f.snapshot_stride}}},
      {"run",
       {{"continue_on_nonconvergence", f.continue_on_nonconvergence},
        {"validation", f.validation == ValidationMode::warn ? "warn" : "strict"},
        {"use_fft", f.use_fft_convolution}}}};
}

// ---------------------------------------------------------------------------
// output directory lock (one writer per directory)
// ---------------------------------------------------------------------------

class OutputLock {
 public:
  explicit OutputLock(const std::string& dir) {
    std::filesystem::create_directories(dir);
    path_ = dir + "/.lock";
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f) {
      throw std::invalid_argument(
          "output directory '" + dir +
          "' is locked by another run (remove " + path_ + " if stale)");
    }
    std::fclose(f);
  }
  ~OutputLock() { std::remove(path_.c_str()); }
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  std::string path_;
};

// ---------------------------------------------------------------------------
// CSV writers
// ---------------------------------------------------------------------------

namespace detail {
inline std::ofstream open_out(const std::string& dir, const std::string& name) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir + "/" + name, std::ios::binary);  // '\n' endings
  if (!out) throw std::runtime_error("cannot open " + dir + "/" + name);
  return out;
}
}  // namespace detail

/// Long format, one row per (recorded step, node).
inline std::string write_snapshot_csv(const FlowTrace& trace,
                                      const std::string& dir) {
  auto out = detail::open_out(dir, "snapshots.csv");
  out << "t,x,h\n";
  for (const StepRecord& r : trace.records) {
    if (!r.has_snapshot) continue;
    for (int j = 0; j < trace.grid.n_x; ++j) {
      out << format_double(r.t) << ',' << format_double(trace.grid.x(j)) << ','
          << format_double(r.h[j]) << '\n';
    }
  }
  return "snapshots.csv";
}

inline std::string write_diagnostics_csv(const FlowTrace& trace,
                                         const std::string& dir) {
  auto out = detail::open_out(dir, "diagnostics.csv");
  out << "n,t,tv_energy,mob_l1,mob_inv_l1,inner_iters,converged,phi_before,"
         "phi_after\n";
  for (const StepRecord& r : trace.records) {
    out << r.n << ',' << format_double(r.t) << ',' << format_double(r.tv)
        << ',' << format_double(r.mob_l1) << ',' << format_double(r.mob_inv_l1)
        << ',' << r.inner_iters << ',' << (r.converged ? 1 : 0) << ','
        << format_double(r.phi_before) << ',' << format_double(r.phi_after)
        << '\n';
  }
  return "diagnostics.csv";
}

inline std::string write_study_csv(const StudyResult& result,
                                   const std::string& dir,
                                   const std::string& name) {
  auto out = detail::open_out(dir, name);
  out << "param,value,variant\n";
  for (const StudyPoint& p : result.points) {
    out << format_double(p.param) << ',' << format_double(p.value) << ','
        << p.variant << (p.censored ? "-censored" : "") << '\n';
  }
  return name;
}

// ---------------------------------------------------------------------------
// run manifest
// ---------------------------------------------------------------------------

struct RunManifest {
  std::string command;
  Config config;
  std::string started_at;
  std::string finished_at;
  std::vector<std::string> outputs;
  int exit_status = 0;
};

inline std::string iso8601_now() {
  std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

inline void write_manifest(const RunManifest& m, const std::string& dir) {
  json j{{"artifact_version", "1.0.0"},
         {"command", m.command},
         {"config", serialize_config(m.config)},
         {"started_at", m.started_at},
         {"finished_at", m.finished_at},
         {"outputs", m.outputs},
         {"exit_status", m.exit_status}};
  auto out = detail::open_out(dir, "manifest.json");
  out << j.dump(2) << '\n';
}

}  // namespace facetflow
