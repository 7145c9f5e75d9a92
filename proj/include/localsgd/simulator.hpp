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

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "localsgd/core.hpp"
#include "localsgd/objectives.hpp"
#include "localsgd/schedules.hpp"

namespace localsgd {

/// Outcome of one Local SGD replication.
struct RunResult {
  std::vector<std::int64_t> trace_t;
  std::vector<double> error_trace;  // f(x_bar^t) - f* at trace_t
  Point final_avg;
  double final_error_f = 0.0;
  double final_error_sq = 0.0;
  std::optional<std::int64_t> diverged_at;  // first t whose update went non-finite

  bool failed() const { return diverged_at.has_value(); }
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::uint32_t replication, std::int64_t t, const std::string& label = {})
      : std::runtime_error((label.empty() ? std::string() : label + ": ") + "replication " +
                           std::to_string(replication) + " diverged at t=" + std::to_string(t)),
        replication_(replication),
        t_(t) {}
  std::uint32_t replication() const { return replication_; }
  std::int64_t t() const { return t_; }

 private:
  std::uint32_t replication_;
  std::int64_t t_;
};

/// 1 for T <= 10^4, else ceil(T / 10^4).
inline std::int64_t default_trace_stride(std::int64_t T) {
  return T <= 10'000 ? 1 : (T + 9'999) / 10'000;
}

/// Mean of the worker iterates, summed left to right in worker order. A
/// coordinate on which every worker agrees is copied rather than re-summed, so
/// averaging identical iterates is exact (sum-then-divide can round, e.g. 3v/3).
inline Point worker_mean(const std::vector<Point>& workers) {
  const Point& first = workers.front();
  Point mean(first.dim(), 0.0);
  for (const auto& w : workers) {
    for (std::size_t k = 0; k < mean.dim(); ++k) mean[k] += w[k];
  }
  const double n = static_cast<double>(workers.size());
  for (std::size_t k = 0; k < mean.dim(); ++k) {
    bool agree = true;
    for (std::size_t i = 1; i < workers.size() && agree; ++i) agree = workers[i][k] == first[k];
    mean[k] = agree ? first[k] : mean[k] / n;
  }
  return mean;
}

/// Local SGD: N workers start at x0, each takes x <- x - eta_t g(x) with its own
/// stochastic gradient, and whenever t+1 is a communication time all workers
/// are replaced by the mean of their post-step iterates. The trace records
/// f(x_bar^t) - f* for the across-worker mean at every `stride`-th t and at T.
template <Objective Obj>
RunResult run_local_sgd(const Obj& objective, const CommSchedule& schedule, const StepSchedule& steps,
                        std::int64_t N, std::int64_t T, const Point& x0, const RngStream& stream_base,
                        std::int64_t stride = 0) {
  if (N < 1) throw std::invalid_argument("run_local_sgd: N must be >= 1");
  if (T < 1) throw std::invalid_argument("run_local_sgd: T must be >= 1");
  if (schedule.horizon() != T) {
    throw std::invalid_argument("run_local_sgd: schedule horizon " + std::to_string(schedule.horizon()) +
                                " != T " + std::to_string(T));
  }
  if (x0.dim() != objective.dim()) throw std::invalid_argument("run_local_sgd: x0 dimension mismatch");
  if (!x0.all_finite()) throw std::invalid_argument("run_local_sgd: x0 must be finite");
  if (stride <= 0) stride = default_trace_stride(T);

  const auto& k = objective.constants();
  RunResult out;
  out.trace_t.reserve(static_cast<std::size_t>(T / stride + 2));
  out.error_trace.reserve(out.trace_t.capacity());

  std::vector<Point> workers(static_cast<std::size_t>(N), x0);
  const auto& taus = schedule.taus();
  std::size_t next_round = 1;  // index into taus of the next communication time

  for (std::int64_t t = 0; t < T; ++t) {
    if (t % stride == 0) {
      out.trace_t.push_back(t);
      out.error_trace.push_back(objective.value(worker_mean(workers)) - k.f_star);
    }
    const double eta = step_size(steps, t);
    for (std::int64_t i = 0; i < N; ++i) {
      auto& x = workers[static_cast<std::size_t>(i)];
      const Point g = objective.stochastic_gradient(
          x, stream_base.at(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(t)));
      for (std::size_t c = 0; c < x.dim(); ++c) x[c] -= eta * g[c];
    }
    if (taus[next_round] == t + 1) {
      const Point mean = worker_mean(workers);
      for (auto& x : workers) x = mean;
      ++next_round;
    }
    for (const auto& x : workers) {
      if (!x.all_finite()) {
        out.diverged_at = t;
        return out;
      }
    }
  }

  out.final_avg = worker_mean(workers);
  out.final_error_f = objective.value(out.final_avg) - k.f_star;
  out.final_error_sq = squared_distance(out.final_avg, k.x_star);
  out.trace_t.push_back(T);
  out.error_trace.push_back(out.final_error_f);
  return out;
}

/// Mean and sample standard deviation (n - 1 denominator; 0 for a single sample),
/// accumulated left to right.
struct Summary {
  double mean = 0.0;
  double std = 0.0;
  std::size_t count = 0;

  double standard_error() const { return count == 0 ? 0.0 : std / std::sqrt(static_cast<double>(count)); }
};

inline Summary summarize(const std::vector<double>& xs) {
  Summary s;
  s.count = xs.size();
  if (xs.empty()) return s;
  if (std::all_of(xs.begin(), xs.end(), [&](double x) { return x == xs.front(); })) {
    s.mean = xs.front();  // exact: no rounding noise from identical samples
    return s;
  }
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = sum / static_cast<double>(xs.size());
  {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return s;
}

struct RunConfig {
  std::int64_t N = 1;
  std::int64_t T = 1;
  CommSchedule schedule = one_shot(1);
  StepSchedule steps = ConstantSteps{0.1};
  Point x0;
  std::uint32_t replications = 1;
  std::uint64_t seed = 0;
  std::int64_t trace_stride = 0;  // 0 selects default_trace_stride(T)
  std::string label;

  void validate() const {
    if (N < 1) throw std::invalid_argument("RunConfig: N must be >= 1");
    if (T < 1) throw std::invalid_argument("RunConfig: T must be >= 1");
    if (replications < 1) throw std::invalid_argument("RunConfig: replications must be >= 1");
    if (schedule.horizon() != T) throw std::invalid_argument("RunConfig: schedule must cover [0, T]");
    localsgd::validate(steps);
  }
};

struct ExperimentRecord {
  std::string label;
  std::int64_t N = 0;
  std::int64_t T = 0;
  std::int64_t rounds = 0;
  std::uint32_t replications = 0;
  Summary final_error_f;
  Summary final_error_sq;
  std::vector<std::int64_t> trace_t;
  std::vector<double> trace_mean;
  std::vector<double> trace_std;
  double wall_ms = 0.0;
};

/// Worker-thread count: `requested` if positive, else LOCALSGD_THREADS, else the
/// hardware concurrency.
inline unsigned resolve_parallelism(int requested = 0) {
  if (requested > 0) return static_cast<unsigned>(requested);
  if (const char* env = std::getenv("LOCALSGD_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs `count` independent tasks on up to `threads` threads. Task i writes only
/// its own slot, so results do not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  threads = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
        next.store(count);
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Runs `config.replications` independent replications (replication r draws from
/// stream {seed, r}) and aggregates final errors and the pointwise trace.
/// Throws DivergenceError naming the lowest failing replication.
template <Objective Obj>
ExperimentRecord estimate_expected_error(const Obj& objective, const RunConfig& config, int threads = 0) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();

  std::vector<RunResult> runs(config.replications);
  const RngStream base{config.seed, 0, 0, 0, 0};
  parallel_for(runs.size(), resolve_parallelism(threads), [&](std::size_t r) {
    runs[r] = run_local_sgd(objective, config.schedule, config.steps, config.N, config.T, config.x0,
                            base.with_replication(static_cast<std::uint32_t>(r)), config.trace_stride);
  });
  for (std::size_t r = 0; r < runs.size(); ++r) {
    if (runs[r].failed()) throw DivergenceError(static_cast<std::uint32_t>(r), *runs[r].diverged_at, config.label);
  }

  ExperimentRecord rec;
  rec.label = config.label;
  rec.N = config.N;
  rec.T = config.T;
  rec.rounds = config.schedule.rounds();
  rec.replications = config.replications;

  std::vector<double> column(runs.size());
  for (std::size_t r = 0; r < runs.size(); ++r) column[r] = runs[r].final_error_f;
  rec.final_error_f = summarize(column);
  for (std::size_t r = 0; r < runs.size(); ++r) column[r] = runs[r].final_error_sq;
  rec.final_error_sq = summarize(column);

  rec.trace_t = runs.front().trace_t;
  rec.trace_mean.resize(rec.trace_t.size());
  rec.trace_std.resize(rec.trace_t.size());
  for (std::size_t p = 0; p < rec.trace_t.size(); ++p) {
    for (std::size_t r = 0; r < runs.size(); ++r) column[r] = runs[r].error_trace[p];
    const Summary s = summarize(column);
    rec.trace_mean[p] = s.mean;
    rec.trace_std[p] = s.std;
  }

  rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

enum class ErrorMetric { kFunctionGap, kSquaredDistance };

inline const Summary& metric_of(const ExperimentRecord& rec, ErrorMetric m) {
  return m == ErrorMetric::kFunctionGap ? rec.final_error_f : rec.final_error_sq;
}

/// Communication-schedule families for speed-up curves.
enum class ScheduleFamily {
  kSynchronized,   // H = 1
  kGrowingRN,      // growing intervals, R = N
  kFixedRN,        // fixed H = ceil(T/N), so R = N evenly spread
  kGrowingRN34,    // growing intervals, R = round(N^{3/4})
  kGrowingRN12,    // growing intervals, R = round(N^{1/2})
  kOneShot,
};

inline std::string to_string(ScheduleFamily f) {
  switch (f) {
    case ScheduleFamily::kSynchronized: return "synchronized";
    case ScheduleFamily::kGrowingRN: return "growing_R=N";
    case ScheduleFamily::kFixedRN: return "fixed_R=N";
    case ScheduleFamily::kGrowingRN34: return "growing_R=N^3/4";
    case ScheduleFamily::kGrowingRN12: return "growing_R=N^1/2";
    case ScheduleFamily::kOneShot: return "one_shot";
  }
  return "unknown";
}

inline ScheduleFamily schedule_family_from_string(const std::string& s) {
  for (auto f : {ScheduleFamily::kSynchronized, ScheduleFamily::kGrowingRN, ScheduleFamily::kFixedRN,
                 ScheduleFamily::kGrowingRN34, ScheduleFamily::kGrowingRN12, ScheduleFamily::kOneShot}) {
    if (to_string(f) == s) return f;
  }
  throw std::invalid_argument("unknown schedule family '" + s + "'");
}

/// Growing-schedule round counts are clamped to [1, floor(sqrt(2T))].
inline CommSchedule family_schedule(ScheduleFamily f, std::int64_t N, std::int64_t T) {
  const auto clamp_rounds = [T](double r) {
    const auto rr = static_cast<std::int64_t>(std::llround(r));
    return std::clamp<std::int64_t>(rr, 1, max_growing_rounds(T));
  };
  const double n = static_cast<double>(N);
  switch (f) {
    case ScheduleFamily::kSynchronized: return fixed_schedule(T, 1);
    case ScheduleFamily::kGrowingRN: return growing_schedule(T, clamp_rounds(n));
    case ScheduleFamily::kFixedRN: return fixed_schedule(T, (T + N - 1) / N);
    case ScheduleFamily::kGrowingRN34: return growing_schedule(T, clamp_rounds(std::pow(n, 0.75)));
    case ScheduleFamily::kGrowingRN12: return growing_schedule(T, clamp_rounds(std::sqrt(n)));
    case ScheduleFamily::kOneShot: return one_shot(T);
  }
  throw std::invalid_argument("unknown schedule family");
}

struct SpeedupRow {
  std::int64_t N = 0;
  std::int64_t rounds = 0;
  double speedup = 0.0;
  double speedup_std = 0.0;  // delta-method standard error of the ratio of means
  bool saturated = false;    // method error mean below 1e-30
  Summary method_error;
};

struct SpeedupCurve {
  Summary baseline_error;  // single-worker SGD
  std::vector<SpeedupRow> rows;
};

/// speedup(N) = E_err(single-worker SGD) / E_err(family with N workers), both
/// estimated from the same replication seeds. `base.schedule` and `base.N` are
/// ignored; everything else (T, steps, x0, seed, replications) is shared.
template <Objective Obj>
SpeedupCurve speedup_curve(const Obj& objective, const RunConfig& base, const std::vector<std::int64_t>& Ns,
                           ScheduleFamily family, ErrorMetric metric = ErrorMetric::kFunctionGap,
                           int threads = 0) {
  if (Ns.empty()) throw std::invalid_argument("speedup_curve: empty N list");
  RunConfig single = base;
  single.N = 1;
  single.schedule = one_shot(base.T);
  single.label = base.label.empty() ? "single" : base.label + "/single";
  SpeedupCurve curve;
  curve.baseline_error = metric_of(estimate_expected_error(objective, single, threads), metric);

  for (const auto n : Ns) {
    RunConfig cfg = base;
    cfg.N = n;
    cfg.schedule = family_schedule(family, n, base.T);
    cfg.label = to_string(family) + "/N=" + std::to_string(n);
    const auto rec = estimate_expected_error(objective, cfg, threads);
    SpeedupRow row;
    row.N = n;
    row.rounds = rec.rounds;
    row.method_error = metric_of(rec, metric);
    const double num = curve.baseline_error.mean;
    const double den = row.method_error.mean;
    if (den < 1e-30) {
      row.saturated = true;
      row.speedup = std::numeric_limits<double>::infinity();
      row.speedup_std = 0.0;
    } else {
      row.speedup = num / den;
      const double rn = num > 0.0 ? curve.baseline_error.standard_error() / num : 0.0;
      const double rd = row.method_error.standard_error() / den;
      row.speedup_std = std::abs(row.speedup) * std::sqrt(rn * rn + rd * rd);
    }
    curve.rows.push_back(row);
  }
  return curve;
}

}  // namespace localsgd
