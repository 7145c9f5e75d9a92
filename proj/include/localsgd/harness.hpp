/*
 * Copyright 2026 The localsgd Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// JSON experiment recipes and CSV writers behind the `localsgd` CLI.
//
// Config schema (all keys at top level unless noted):
//   name          string
//   objective     {"type": "quadratic", "d", "c1", "c2"}
//               | {"type": "piecewise", "sigma"}
//               | {"type": "logistic", "dataset", "lambda", "d"?, "batch"?}
//                 (dataset paths are relative to the config file's directory)
//   x0            number (fills every coordinate) or array; default 1 (0 for logistic)
//   T             int
//   N             int                       (run)
//   Ns            [int]                     (speedup)
//   steps         {"kind": "inverse-t", "beta": number | "theorem", "mu"?}
//               | {"kind": "theta", "mu"?, "L"?}
//               | {"kind": "constant", "eta"}
//               | {"kind": "capped-inverse-t", "mu"?, "L"?}
//                 (mu and L default to the objective's declared constants)
//   strategies    [{"name", "schedule": S}] (run), where S is one of
//                 {"type": "fixed", "H"} | {"type": "fixed", "R"} |
//                 {"type": "fixed", "H_rule": "sqrt_TN" | "cbrt_TN"} |
//                 {"type": "fixed", "R_rule": "sqrt_TN" | "cbrt_TN"} |
//                 {"type": "growing", "R", "a"?} | {"type": "one-shot"} |
//                 {"type": "synchronized"}
//   families      [string]                  (speedup; see ScheduleFamily names)
//   replications  int >= 1
//   seed          uint64
//   metric        "f" (function gap) | "sq" (squared distance)
//   trace_stride  int; 0 selects the default
//   output        output directory

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "localsgd/bounds.hpp"
#include "localsgd/core.hpp"
#include "localsgd/libsvm.hpp"
#include "localsgd/objectives.hpp"
#include "localsgd/schedules.hpp"
#include "localsgd/simulator.hpp"

namespace localsgd::harness {

/// Invalid or unreadable configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitDivergence = 3;

using AnyObjective = std::variant<QuadraticStrongGrowth, PiecewiseQuadratic1D, LogisticL2>;

struct StrategySpec {
  std::string name;
  nlohmann::json schedule;
};

struct ExperimentConfig {
  std::string name;
  std::filesystem::path base_dir;
  nlohmann::json objective;
  nlohmann::json x0;
  nlohmann::json steps;
  std::int64_t T = 0;
  std::int64_t N = 0;
  std::vector<std::int64_t> Ns;
  std::vector<StrategySpec> strategies;
  std::vector<ScheduleFamily> families;
  std::uint32_t replications = 1;
  std::uint64_t seed = 0;
  ErrorMetric metric = ErrorMetric::kFunctionGap;
  std::int64_t trace_stride = 0;
  std::filesystem::path output;
};

namespace detail {

template <typename T>
T require(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + ": bad value for '" + key + "': " + e.what());
  }
}

template <typename T>
T optional_value(const nlohmann::json& j, const char* key, T fallback, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return require<T>(j, key, where);
}

inline std::int64_t positive_int(const nlohmann::json& j, const char* key, const std::string& where) {
  const auto v = require<std::int64_t>(j, key, where);
  if (v < 1) throw ConfigError(where + ": '" + key + "' must be >= 1");
  return v;
}

}  // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = ".") {
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  ExperimentConfig cfg;
  cfg.base_dir = base_dir;
  cfg.name = detail::optional_value<std::string>(j, "name", "experiment", "config");
  if (!j.contains("objective") || !j["objective"].is_object()) throw ConfigError("config: missing 'objective'");
  cfg.objective = j["objective"];
  cfg.x0 = j.value("x0", nlohmann::json());
  cfg.steps = j.value("steps", nlohmann::json());
  if (!cfg.steps.is_object()) throw ConfigError("config: missing 'steps'");
  cfg.T = detail::positive_int(j, "T", "config");
  if (j.contains("N")) cfg.N = detail::positive_int(j, "N", "config");
  if (j.contains("Ns")) {
    cfg.Ns = detail::require<std::vector<std::int64_t>>(j, "Ns", "config");
    for (auto n : cfg.Ns) {
      if (n < 1) throw ConfigError("config: every entry of 'Ns' must be >= 1");
    }
  }
  if (j.contains("strategies")) {
    for (const auto& s : j["strategies"]) {
      StrategySpec spec;
      spec.name = detail::require<std::string>(s, "name", "strategy");
      if (spec.name.empty() || spec.name.find_first_of("/\\") != std::string::npos) {
        throw ConfigError("strategy: name must be a non-empty file-name-safe string");
      }
      if (!s.contains("schedule")) throw ConfigError("strategy '" + spec.name + "': missing 'schedule'");
      spec.schedule = s["schedule"];
      cfg.strategies.push_back(std::move(spec));
    }
  }
  if (j.contains("families")) {
    for (const auto& f : detail::require<std::vector<std::string>>(j, "families", "config")) {
      try {
        cfg.families.push_back(schedule_family_from_string(f));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
      }
    }
  }
  const auto reps = detail::optional_value<std::int64_t>(j, "replications", 1, "config");
  if (reps < 1 || reps > UINT32_MAX) throw ConfigError("config: 'replications' must be >= 1");
  cfg.replications = static_cast<std::uint32_t>(reps);
  cfg.seed = detail::optional_value<std::uint64_t>(j, "seed", 0, "config");
  const auto metric = detail::optional_value<std::string>(j, "metric", "f", "config");
  if (metric == "f") {
    cfg.metric = ErrorMetric::kFunctionGap;
  } else if (metric == "sq") {
    cfg.metric = ErrorMetric::kSquaredDistance;
  } else {
    throw ConfigError("config: 'metric' must be \"f\" or \"sq\"");
  }
  cfg.trace_stride = detail::optional_value<std::int64_t>(j, "trace_stride", 0, "config");
  if (cfg.trace_stride < 0) throw ConfigError("config: 'trace_stride' must be >= 0");
  cfg.output = detail::optional_value<std::string>(j, "output", "out/" + cfg.name, "config");
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "': " + e.what());
  }
  return parse_config(j, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

inline AnyObjective make_objective(const ExperimentConfig& cfg) {
  const auto& o = cfg.objective;
  const auto type = detail::require<std::string>(o, "type", "objective");
  try {
    if (type == "quadratic") {
      return QuadraticStrongGrowth(static_cast<std::size_t>(detail::positive_int(o, "d", "objective")),
                                   detail::require<double>(o, "c1", "objective"),
                                   detail::require<double>(o, "c2", "objective"));
    }
    if (type == "piecewise") return PiecewiseQuadratic1D(detail::require<double>(o, "sigma", "objective"));
    if (type == "logistic") {
      auto path = std::filesystem::path(detail::require<std::string>(o, "dataset", "objective"));
      if (path.is_relative()) path = cfg.base_dir / path;
      if (!std::filesystem::exists(path)) throw ConfigError("objective: dataset not found: " + path.string());
      std::optional<std::size_t> d;
      if (o.contains("d")) d = static_cast<std::size_t>(detail::positive_int(o, "d", "objective"));
      std::shared_ptr<const Dataset> data;
      try {
        data = std::make_shared<const Dataset>(load_libsvm(path.string(), d));
      } catch (const ParseError& e) {
        throw ConfigError("dataset " + path.string() + ": " + e.what());
      }
      LogisticL2::Options opts;
      opts.batch = static_cast<std::size_t>(detail::optional_value<std::int64_t>(o, "batch", 1, "objective"));
      const double lambda = detail::require<double>(o, "lambda", "objective");
      if (!(lambda > 0.0)) throw ConfigError("objective: logistic 'lambda' must be > 0");
      return LogisticL2(std::move(data), lambda, opts);
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("objective: ") + e.what());
  }
  throw ConfigError("objective: unknown type '" + type + "'");
}

inline std::size_t objective_dim(const AnyObjective& obj) {
  return std::visit([](const auto& o) { return o.dim(); }, obj);
}

inline const ProblemConstants& objective_constants(const AnyObjective& obj) {
  return std::visit([](const auto& o) -> const ProblemConstants& { return o.constants(); }, obj);
}

inline Point make_x0(const ExperimentConfig& cfg, const AnyObjective& obj) {
  const std::size_t d = objective_dim(obj);
  if (cfg.x0.is_null()) {
    return Point(d, std::holds_alternative<LogisticL2>(obj) ? 0.0 : 1.0);
  }
  if (cfg.x0.is_number()) return Point(d, cfg.x0.get<double>());
  if (cfg.x0.is_array()) {
    std::vector<double> v;
    try {
      v = cfg.x0.get<std::vector<double>>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config: 'x0' must be a number or an array of numbers");
    }
    if (v.size() != d) {
      throw ConfigError("config: 'x0' has " + std::to_string(v.size()) + " entries, objective dimension is " +
                        std::to_string(d));
    }
    return Point(std::move(v));
  }
  throw ConfigError("config: 'x0' must be a number or an array");
}

/// Builds a CommSchedule from a strategy's schedule object.
inline CommSchedule make_schedule(const nlohmann::json& s, std::int64_t T, std::int64_t N) {
  const auto type = detail::require<std::string>(s, "type", "schedule");
  const double tn = static_cast<double>(T) * static_cast<double>(N);
  const auto rule_value = [&](const std::string& rule) {
    if (rule == "sqrt_TN") return std::sqrt(tn);
    if (rule == "cbrt_TN") return std::cbrt(tn);
    throw ConfigError("schedule: unknown rule '" + rule + "'");
  };
  try {
    if (type == "synchronized") return fixed_schedule(T, 1);
    if (type == "one-shot") return one_shot(T);
    if (type == "growing") {
      const auto R = detail::positive_int(s, "R", "schedule");
      if (s.contains("a")) return growing_schedule_with_scale(T, R, detail::positive_int(s, "a", "schedule"));
      return growing_schedule(T, R);
    }
    if (type == "fixed") {
      if (s.contains("H")) return fixed_schedule(T, detail::positive_int(s, "H", "schedule"));
      if (s.contains("R")) {
        const auto R = detail::positive_int(s, "R", "schedule");
        return fixed_schedule(T, (T + R - 1) / R);
      }
      if (s.contains("H_rule")) {
        const auto H = std::llround(rule_value(detail::require<std::string>(s, "H_rule", "schedule")));
        return fixed_schedule(T, std::clamp<std::int64_t>(H, 1, T));
      }
      if (s.contains("R_rule")) {
        const double r = rule_value(detail::require<std::string>(s, "R_rule", "schedule"));
        const auto H = std::llround(static_cast<double>(T) / r);
        return fixed_schedule(T, std::clamp<std::int64_t>(H, 1, T));
      }
      throw ConfigError("schedule: fixed needs one of H, R, H_rule, R_rule");
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("schedule: ") + e.what());
  }
  throw ConfigError("schedule: unknown type '" + type + "'");
}

/// Step schedule for one run. inverse-t with beta "theorem" uses beta_min for the
/// schedule's realized round count.
inline StepSchedule make_steps(const ExperimentConfig& cfg, const ProblemConstants& k, std::int64_t N,
                               const CommSchedule& schedule) {
  const auto& s = cfg.steps;
  const auto kind = detail::require<std::string>(s, "kind", "steps");
  const double mu = detail::optional_value<double>(s, "mu", k.mu, "steps");
  const double L = detail::optional_value<double>(s, "L", k.L, "steps");
  StepSchedule out;
  if (kind == "inverse-t") {
    double beta = 1.0;
    if (s.contains("beta") && s["beta"].is_string()) {
      if (s["beta"].get<std::string>() != "theorem") throw ConfigError("steps: beta must be a number or \"theorem\"");
      beta = beta_min(L / mu, k.c, N, cfg.T, schedule.rounds());
    } else {
      beta = detail::optional_value<double>(s, "beta", 1.0, "steps");
    }
    out = InverseTSteps{mu, beta};
  } else if (kind == "theta") {
    out = ThetaSteps{mu, L};
  } else if (kind == "constant") {
    out = ConstantSteps{detail::require<double>(s, "eta", "steps")};
  } else if (kind == "capped-inverse-t") {
    out = CappedInverseTSteps{mu, L};
  } else {
    throw ConfigError("steps: unknown kind '" + kind + "'");
  }
  try {
    validate(out);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("steps: ") + e.what());
  }
  return out;
}

// CSV output.

/// Shortest round-trip decimal form; "inf"/"nan" for non-finite values.
inline std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

inline std::string trace_csv(const ExperimentRecord& rec) {
  std::ostringstream os;
  os << "t,mean_error,std_error\n";
  for (std::size_t p = 0; p < rec.trace_t.size(); ++p) {
    os << rec.trace_t[p] << ',' << format_real(rec.trace_mean[p]) << ',' << format_real(rec.trace_std[p]) << '\n';
  }
  return os.str();
}

inline std::string schedule_csv(const CommSchedule& schedule) {
  std::ostringstream os;
  os << "round,tau\n";
  for (std::size_t i = 0; i < schedule.taus().size(); ++i) os << i << ',' << schedule.taus()[i] << '\n';
  return os.str();
}

struct StrategyResult {
  std::string name;
  CommSchedule schedule;
  ExperimentRecord record;
};

struct RunOptions {
  int threads = 0;
  bool timing = true;
};

inline std::string summary_csv(const std::vector<StrategyResult>& results, ErrorMetric metric, bool timing) {
  std::ostringstream os;
  os << "strategy,R_effective,final_mean,final_std,wall_ms\n";
  for (const auto& r : results) {
    const auto& s = metric_of(r.record, metric);
    os << r.name << ',' << r.record.rounds << ',' << format_real(s.mean) << ',' << format_real(s.std) << ','
       << (timing ? std::llround(r.record.wall_ms) : 0) << '\n';
  }
  return os.str();
}

/// Runs every strategy of a `run` config. DivergenceError propagates with the
/// strategy name in its message.
inline std::vector<StrategyResult> run_strategies(const ExperimentConfig& cfg, const AnyObjective& objective,
                                                  const RunOptions& opts = {}) {
  if (cfg.N < 1) throw ConfigError("config: 'N' required for run");
  if (cfg.strategies.empty()) throw ConfigError("config: 'strategies' required for run");
  const Point x0 = make_x0(cfg, objective);
  const auto& k = objective_constants(objective);

  std::vector<StrategyResult> out;
  for (const auto& spec : cfg.strategies) {
    CommSchedule schedule = make_schedule(spec.schedule, cfg.T, cfg.N);
    RunConfig rc;
    rc.N = cfg.N;
    rc.T = cfg.T;
    rc.schedule = schedule;
    rc.steps = make_steps(cfg, k, cfg.N, schedule);
    rc.x0 = x0;
    rc.replications = cfg.replications;
    rc.seed = cfg.seed;
    rc.trace_stride = cfg.trace_stride;
    rc.label = spec.name;
    auto rec = std::visit([&](const auto& o) { return estimate_expected_error(o, rc, opts.threads); }, objective);
    out.push_back({spec.name, std::move(schedule), std::move(rec)});
  }
  return out;
}

inline void write_run_outputs(const std::filesystem::path& dir, const std::vector<StrategyResult>& results,
                              ErrorMetric metric, bool timing) {
  std::filesystem::create_directories(dir);
  for (const auto& r : results) {
    write_file(dir / (r.name + "_trace.csv"), trace_csv(r.record));
    write_file(dir / (r.name + "_schedule.csv"), schedule_csv(r.schedule));
  }
  write_file(dir / "summary.csv", summary_csv(results, metric, timing));
}

struct FamilyCurve {
  ScheduleFamily family;
  SpeedupCurve curve;
};

inline std::vector<FamilyCurve> run_speedup(const ExperimentConfig& cfg, const AnyObjective& objective,
                                            const RunOptions& opts = {}) {
  if (cfg.Ns.empty()) throw ConfigError("config: 'Ns' required for speedup");
  if (cfg.families.empty()) throw ConfigError("config: 'families' required for speedup");
  const auto& k = objective_constants(objective);
  RunConfig base;
  base.T = cfg.T;
  base.schedule = one_shot(cfg.T);
  base.steps = make_steps(cfg, k, 1, base.schedule);
  base.x0 = make_x0(cfg, objective);
  base.replications = cfg.replications;
  base.seed = cfg.seed;
  base.trace_stride = cfg.T;  // only the final error is used
  base.label = cfg.name;
  std::vector<FamilyCurve> out;
  for (const auto family : cfg.families) {
    for (const auto n : cfg.Ns) {
      (void)family_schedule(family, n, cfg.T);  // reject impossible cells before running anything
    }
    auto curve = std::visit(
        [&](const auto& o) { return speedup_curve(o, base, cfg.Ns, family, cfg.metric, opts.threads); }, objective);
    out.push_back({family, std::move(curve)});
  }
  return out;
}

inline std::string speedup_csv(const std::vector<FamilyCurve>& curves) {
  std::ostringstream os;
  os << "family,N,R_effective,speedup,speedup_std\n";
  for (const auto& fc : curves) {
    for (const auto& row : fc.curve.rows) {
      os << to_string(fc.family) << ',' << row.N << ',' << row.rounds << ',' << format_real(row.speedup) << ','
         << format_real(row.speedup_std) << '\n';
    }
  }
  return os.str();
}

}  // namespace localsgd::harness
