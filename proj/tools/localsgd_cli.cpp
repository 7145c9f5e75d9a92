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

// localsgd: run Local SGD experiments, speed-up sweeps and bound evaluations.
//
// Exit codes: 0 success, 2 configuration / argument error, 3 divergence.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "localsgd/harness.hpp"
#include "localsgd/localsgd.hpp"

namespace {

using namespace localsgd;
namespace hx = localsgd::harness;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> replications;
  std::optional<std::int64_t> stride;
  std::string out;
  int threads = 0;
  bool no_timing = false;
};

void apply(hx::ExperimentConfig& cfg, const Overrides& o) {
  if (o.seed) cfg.seed = *o.seed;
  if (o.replications) {
    if (*o.replications < 1) throw hx::ConfigError("--replications must be >= 1");
    cfg.replications = static_cast<std::uint32_t>(*o.replications);
  }
  if (o.stride) {
    if (*o.stride < 0) throw hx::ConfigError("--stride must be >= 0");
    cfg.trace_stride = *o.stride;
  }
  if (!o.out.empty()) cfg.output = o.out;
}

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "Override the config seed");
  cmd->add_option("--replications", o.replications, "Override the replication count");
  cmd->add_option("--stride", o.stride, "Override the trace stride (0 = default)");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--threads", o.threads, "Worker threads (default: $LOCALSGD_THREADS or all cores)");
  cmd->add_flag("--no-timing", o.no_timing, "Write wall_ms = 0 so outputs are byte-reproducible");
}

int cmd_run(const std::string& path, const Overrides& o) {
  auto cfg = hx::load_config(path);
  apply(cfg, o);
  const auto objective = hx::make_objective(cfg);
  const auto results = hx::run_strategies(cfg, objective, {o.threads, !o.no_timing});
  hx::write_run_outputs(cfg.output, results, cfg.metric, !o.no_timing);
  for (const auto& r : results) {
    const auto& s = metric_of(r.record, cfg.metric);
    std::printf("%-24s R=%-5lld final_mean=%.6e final_std=%.6e\n", r.name.c_str(),
                static_cast<long long>(r.record.rounds), s.mean, s.std);
  }
  std::printf("wrote %s\n", cfg.output.string().c_str());
  return hx::kExitOk;
}

int cmd_speedup(const std::string& path, const Overrides& o) {
  auto cfg = hx::load_config(path);
  apply(cfg, o);
  const auto objective = hx::make_objective(cfg);
  const auto curves = hx::run_speedup(cfg, objective, {o.threads, !o.no_timing});
  std::filesystem::create_directories(cfg.output);
  const auto csv = hx::speedup_csv(curves);
  hx::write_file(cfg.output / "speedup.csv", csv);
  std::cout << csv;
  return hx::kExitOk;
}

struct BoundArgs {
  double mu = 1.0;
  std::optional<double> L;
  double c = 0.0;
  double sigma2 = 0.0;
  std::int64_t N = 1;
  std::int64_t T = 1;
  std::int64_t R = 1;
  double beta = 1.0;
  double xi0 = 0.0;
  std::int64_t H = 1;
  std::string schedule = "growing";
  std::optional<std::int64_t> a;
  double kappa = 1.0;

  BoundInputs inputs() const {
    BoundInputs in;
    in.constants.mu = mu;
    in.constants.L = L.value_or(mu);
    in.constants.c = c;
    in.constants.sigma2 = sigma2;
    in.N = N;
    in.T = T;
    in.R = R;
    in.beta = beta;
    in.xi0 = xi0;
    return in;
  }
};

void print_value(const char* name, double v) { std::printf("%s %.9g\n", name, v); }

int cmd_bound(const std::string& which, const BoundArgs& b) {
  try {
    if (which == "theorem1") {
      print_value("theorem1", bound_theorem1(b.inputs()));
    } else if (which == "general") {
      auto in = b.inputs();
      if (b.schedule == "growing") {
        in.schedule = b.a ? growing_schedule_with_scale(b.T, b.R, *b.a) : growing_schedule(b.T, b.R);
      } else if (b.schedule == "fixed") {
        in.schedule = fixed_schedule(b.T, b.H);
      } else if (b.schedule == "one-shot") {
        in.schedule = one_shot(b.T);
      } else if (b.schedule == "synchronized") {
        in.schedule = fixed_schedule(b.T, 1);
      } else {
        throw std::invalid_argument("unknown --schedule '" + b.schedule + "'");
      }
      const auto g = bound_general(in);
      print_value("general", g.value());
      print_value("consensus_sum", g.consensus_sum);
      std::printf("rounds %lld\n", static_cast<long long>(in.schedule->rounds()));
      std::printf("condition: %s\n", g.condition_holds ? "OK" : "VIOLATED");
    } else if (which == "fixed") {
      print_value("fixed_interval", bound_fixed_interval(b.inputs(), b.H));
    } else if (which == "osa") {
      print_value("osa_leading", bound_osa_leading(b.inputs()));
    } else if (which == "beta-min") {
      print_value("beta_min", beta_min(b.kappa, b.c, b.N, b.T, b.R));
    } else {
      throw std::invalid_argument("unknown bound '" + which + "'");
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return hx::kExitConfig;
  }
  return hx::kExitOk;
}

int cmd_parse_data(const std::string& path, std::optional<std::size_t> d) {
  try {
    const auto data = load_libsvm(path, d);
    std::size_t positives = 0;
    for (int l : data.labels()) positives += l == 1 ? 1 : 0;
    std::printf("M=%zu d=%zu nnz=%zu positives=%zu\n", data.rows(), data.dim(), data.nonzeros(), positives);
  } catch (const ParseError& e) {
    std::cerr << path << ": " << e.what() << "\n";
    return hx::kExitConfig;
  } catch (const std::runtime_error& e) {
    std::cerr << e.what() << "\n";
    return hx::kExitConfig;
  }
  return hx::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Local SGD simulator: experiments, speed-up curves and convergence bounds"};
  app.require_subcommand(1);

  std::string run_config;
  Overrides run_over;
  auto* run = app.add_subcommand("run", "Run every strategy of a config; write trace and summary CSVs");
  run->add_option("config", run_config, "Experiment JSON")->required();
  add_overrides(run, run_over);

  std::string sp_config;
  Overrides sp_over;
  auto* sp = app.add_subcommand("speedup", "Speed-up curves over an N list; write speedup.csv");
  sp->add_option("config", sp_config, "Experiment JSON")->required();
  add_overrides(sp, sp_over);

  std::string which;
  BoundArgs b;
  auto* bound = app.add_subcommand("bound", "Evaluate a closed-form bound");
  bound->add_option("which", which, "theorem1 | general | fixed | osa | beta-min")->required();
  bound->add_option("--mu", b.mu);
  bound->add_option("--L", b.L, "Smoothness (default: mu)");
  bound->add_option("--c", b.c);
  bound->add_option("--sigma2", b.sigma2);
  bound->add_option("--N", b.N);
  bound->add_option("--T", b.T);
  bound->add_option("--R", b.R);
  bound->add_option("--beta", b.beta);
  bound->add_option("--xi0", b.xi0);
  bound->add_option("--H", b.H);
  bound->add_option("--a", b.a, "Explicit growing-schedule scale");
  bound->add_option("--kappa", b.kappa);
  bound->add_option("--schedule", b.schedule, "growing | fixed | one-shot | synchronized (general only)");

  std::string data_path;
  std::optional<std::size_t> data_dim;
  auto* parse = app.add_subcommand("parse-data", "Validate a LIBSVM file and print M and d");
  parse->add_option("file", data_path)->required();
  parse->add_option("--d", data_dim, "Force the feature dimension");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : hx::kExitConfig;
  }

  try {
    if (*run) return cmd_run(run_config, run_over);
    if (*sp) return cmd_speedup(sp_config, sp_over);
    if (*bound) return cmd_bound(which, b);
    if (*parse) return cmd_parse_data(data_path, data_dim);
  } catch (const hx::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return hx::kExitConfig;
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return hx::kExitDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return hx::kExitOk;
}
