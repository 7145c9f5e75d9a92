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

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>

#include "localsgd/core.hpp"
#include "localsgd/schedules.hpp"

// Closed-form upper bounds on E[f(x_bar^T)] - f* (and, for one-shot averaging,
// on E||x_bar^T - x*||^2) for Local SGD on strongly convex, smooth objectives
// under strong-growth noise.

namespace localsgd {

struct BoundInputs {
  ProblemConstants constants;
  std::int64_t N = 1;
  std::int64_t T = 1;
  std::int64_t R = 1;
  double beta = 1.0;
  double xi0 = 0.0;  // f(x_bar^0) - f*
  std::optional<CommSchedule> schedule;

  void validate() const {
    constants.validate();
    if (N < 1 || T < 1 || R < 1) throw std::invalid_argument("bounds: N, T, R must be >= 1");
    if (!(beta > 0.0)) throw std::invalid_argument("bounds: beta must be > 0");
    if (!(xi0 >= 0.0)) throw std::invalid_argument("bounds: xi0 must be >= 0");
  }
};

/// The three additive pieces shared by the growing-interval, general and
/// fixed-interval bounds.
struct BoundTerms {
  double initial = 0.0;    // beta^2 xi0 / T^2
  double variance = 0.0;   // 9 L sigma2 / (2 mu^2 N T)
  double consensus = 0.0;  // schedule-dependent disagreement term

  double total() const { return initial + variance + consensus; }
};

namespace detail {
inline BoundTerms leading_terms(const BoundInputs& in) {
  const auto& k = in.constants;
  const double T = static_cast<double>(in.T);
  const double N = static_cast<double>(in.N);
  BoundTerms out;
  out.initial = in.beta * in.beta * in.xi0 / (T * T);
  out.variance = 9.0 * k.L * k.sigma2 / (2.0 * k.mu * k.mu * N * T);
  return out;
}
}  // namespace detail

inline BoundTerms theorem1_terms(const BoundInputs& in) {
  in.validate();
  if (in.R > max_growing_rounds(in.T)) throw std::invalid_argument("bound_theorem1: R > sqrt(2T)");
  const auto& k = in.constants;
  BoundTerms out = detail::leading_terms(in);
  out.consensus = 144.0 * k.L * k.L * k.sigma2 /
                  (k.mu * k.mu * k.mu * static_cast<double>(in.R) * static_cast<double>(in.T));
  return out;
}

/// Growing-interval guarantee: beta^2 xi0/T^2 + 9 L s2/(2 mu^2 N T) + 144 L^2 s2/(mu^3 R T).
inline double bound_theorem1(const BoundInputs& in) { return theorem1_terms(in).total(); }

/// sum_{t=0}^{T-1} (t - tau(t)) / (t + beta), summed exactly over the schedule.
inline double consensus_sum(const CommSchedule& schedule, double beta) {
  double s = 0.0;
  const auto& taus = schedule.taus();
  for (std::size_t i = 0; i + 1 < taus.size(); ++i) {
    for (std::int64_t t = taus[i]; t < taus[i + 1]; ++t) {
      s += static_cast<double>(t - taus[i]) / (static_cast<double>(t) + beta);
    }
  }
  return s;
}

struct GeneralBound {
  BoundTerms terms;
  double consensus_sum = 0.0;
  bool condition_holds = false;

  double value() const { return terms.total(); }
};

/// Bound for an arbitrary schedule. The value is returned even when the beta
/// condition fails; `condition_holds` reports it.
inline GeneralBound bound_general(const BoundInputs& in) {
  in.validate();
  if (!in.schedule) throw std::invalid_argument("bound_general: schedule required");
  if (in.schedule->horizon() != in.T) throw std::invalid_argument("bound_general: schedule horizon != T");
  const auto& k = in.constants;
  GeneralBound out;
  out.terms = detail::leading_terms(in);
  out.consensus_sum = consensus_sum(*in.schedule, in.beta);
  const double T = static_cast<double>(in.T);
  out.terms.consensus = 18.0 * k.L * k.L * k.sigma2 / (k.mu * k.mu * k.mu * T * T) * out.consensus_sum;
  out.condition_holds = check_beta_condition(*in.schedule, in.beta, k.kappa(), k.c, in.N);
  return out;
}

inline BoundTerms fixed_interval_terms(const BoundInputs& in, std::int64_t H) {
  in.validate();
  if (!(in.beta > 1.0)) throw std::invalid_argument("bound_fixed_interval: beta must be > 1");
  if (H < 1) throw std::invalid_argument("bound_fixed_interval: H must be >= 1");
  const auto& k = in.constants;
  const double T = static_cast<double>(in.T);
  BoundTerms out = detail::leading_terms(in);
  out.consensus = 18.0 * k.L * k.L * k.sigma2 * static_cast<double>(H - 1) *
                  std::log1p(T / (in.beta - 1.0)) / (k.mu * k.mu * k.mu * T * T);
  return out;
}

/// Bound when workers communicate at least every H steps.
inline double bound_fixed_interval(const BoundInputs& in, std::int64_t H) {
  return fixed_interval_terms(in, H).total();
}

/// Leading term 4 sigma2 / (3 mu^2 N T) of the one-shot averaging rate for
/// E||x_bar^T - x*||^2; valid for T >= floor(2L/mu).
inline double bound_osa_leading(const BoundInputs& in) {
  in.validate();
  const auto& k = in.constants;
  if (in.T < static_cast<std::int64_t>(std::floor(2.0 * k.L / k.mu))) {
    throw std::invalid_argument("bound_osa_leading: T below t0 = floor(2L/mu)");
  }
  return 4.0 * k.sigma2 / (3.0 * k.mu * k.mu * static_cast<double>(in.N) * static_cast<double>(in.T));
}

}  // namespace localsgd
