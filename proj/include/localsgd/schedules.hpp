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
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace localsgd {

/// Communication times 0 = tau_0 < tau_1 < ... < tau_R = T.
class CommSchedule {
 public:
  explicit CommSchedule(std::vector<std::int64_t> taus) : taus_(std::move(taus)) {
    if (taus_.size() < 2) throw std::invalid_argument("CommSchedule: need at least tau_0 and tau_R");
    if (taus_.front() != 0) throw std::invalid_argument("CommSchedule: tau_0 must be 0");
    for (std::size_t i = 1; i < taus_.size(); ++i) {
      if (taus_[i] <= taus_[i - 1]) throw std::invalid_argument("CommSchedule: taus must strictly increase");
    }
  }

  std::int64_t horizon() const { return taus_.back(); }
  /// Number of averaging events.
  std::int64_t rounds() const { return static_cast<std::int64_t>(taus_.size()) - 1; }
  const std::vector<std::int64_t>& taus() const { return taus_; }

  /// H_i = tau_{i+1} - tau_i
  std::int64_t interval(std::size_t i) const { return taus_[i + 1] - taus_[i]; }

  /// Most recent communication time at or before t.
  std::int64_t tau_of(std::int64_t t) const {
    if (t < 0 || t > horizon()) throw std::out_of_range("CommSchedule::tau_of: t outside [0, T]");
    return *(std::upper_bound(taus_.begin(), taus_.end(), t) - 1);
  }

  bool is_communication(std::int64_t t) const {
    return std::binary_search(taus_.begin(), taus_.end(), t);
  }

  friend bool operator==(const CommSchedule&, const CommSchedule&) = default;

 private:
  std::vector<std::int64_t> taus_;
};

namespace detail {
inline std::int64_t isqrt(std::int64_t n) {
  auto r = static_cast<std::int64_t>(std::sqrt(static_cast<double>(n)));
  while (r * r > n) --r;
  while ((r + 1) * (r + 1) <= n) ++r;
  return r;
}
}  // namespace detail

/// Largest R allowed by the growing schedule: floor(sqrt(2T)).
inline std::int64_t max_growing_rounds(std::int64_t T) { return detail::isqrt(2 * T); }

/// a = ceil(2T / R^2)
inline std::int64_t growing_scale(std::int64_t T, std::int64_t R) {
  return (2 * T + R * R - 1) / (R * R);
}

/// Intervals H_i = a(i+1), tau_{i+1} = min(tau_i + H_i, T) for i < R, with an
/// explicit scale a. Repeated T entries collapse. If the R intervals do not reach T
/// (possible only when a < ceil(2T/R^2)), T is appended as a final round.
inline CommSchedule growing_schedule_with_scale(std::int64_t T, std::int64_t R, std::int64_t a) {
  if (T < 1) throw std::invalid_argument("growing_schedule: T must be >= 1");
  if (R < 1) throw std::invalid_argument("growing_schedule: R must be >= 1");
  if (a < 1) throw std::invalid_argument("growing_schedule: a must be >= 1");
  std::vector<std::int64_t> taus{0};
  std::int64_t tau = 0;
  for (std::int64_t i = 0; i < R && tau < T; ++i) {
    tau = std::min(tau + a * (i + 1), T);
    taus.push_back(tau);
  }
  if (taus.back() != T) taus.push_back(T);
  return CommSchedule(std::move(taus));
}

/// Linearly growing intervals with a = ceil(2T/R^2); requires 1 <= R <= floor(sqrt(2T)).
/// The realized round count (rounds()) can be below R once capping at T kicks in.
inline CommSchedule growing_schedule(std::int64_t T, std::int64_t R) {
  if (T < 1) throw std::invalid_argument("growing_schedule: T must be >= 1");
  if (R < 1 || R > max_growing_rounds(T)) {
    throw std::invalid_argument("growing_schedule: R=" + std::to_string(R) + " outside [1, " +
                                std::to_string(max_growing_rounds(T)) + "]");
  }
  return growing_schedule_with_scale(T, R, growing_scale(T, R));
}

/// (0, H, 2H, ..., T); the final interval may be shorter than H.
inline CommSchedule fixed_schedule(std::int64_t T, std::int64_t H) {
  if (T < 1) throw std::invalid_argument("fixed_schedule: T must be >= 1");
  if (H < 1 || H > T) throw std::invalid_argument("fixed_schedule: H outside [1, T]");
  std::vector<std::int64_t> taus;
  taus.reserve(static_cast<std::size_t>(T / H + 2));
  for (std::int64_t t = 0; t < T; t += H) taus.push_back(t);
  taus.push_back(T);
  return CommSchedule(std::move(taus));
}

inline CommSchedule one_shot(std::int64_t T) {
  if (T < 1) throw std::invalid_argument("one_shot: T must be >= 1");
  return CommSchedule({0, T});
}

/// Smallest beta for which the growing schedule's guarantee applies:
/// max{9k, 12 k^2 c max{ln 3, ln(1 + T/(4 k R^2))} + 3k(1 + c/N)}.
inline double beta_min(double kappa, double c, std::int64_t N, std::int64_t T, std::int64_t R) {
  if (!(kappa >= 1.0)) throw std::invalid_argument("beta_min: kappa must be >= 1");
  if (!(c >= 0.0)) throw std::invalid_argument("beta_min: c must be >= 0");
  if (N < 1 || R < 1 || T < 1) throw std::invalid_argument("beta_min: N, T, R must be >= 1");
  const double Td = static_cast<double>(T);
  const double Rd = static_cast<double>(R);
  const double log_term = std::max(std::log(3.0), std::log1p(Td / (4.0 * kappa * Rd * Rd)));
  const double growth = 12.0 * kappa * kappa * c * log_term +
                        3.0 * kappa * (1.0 + c / static_cast<double>(N));
  return std::max(9.0 * kappa, growth);
}

/// True iff 12 k^2 c ln(1 + (H_i - 1)/(tau_i + beta)) + 3k(1 + c/N) - (tau_i + beta) <= 0
/// for every interval of the schedule.
inline bool check_beta_condition(const CommSchedule& schedule, double beta, double kappa, double c,
                                 std::int64_t N) {
  if (!(beta > 0.0)) throw std::invalid_argument("check_beta_condition: beta must be > 0");
  const double drift = 3.0 * kappa * (1.0 + c / static_cast<double>(N));
  for (std::size_t i = 0; i + 1 < schedule.taus().size(); ++i) {
    const double base = static_cast<double>(schedule.taus()[i]) + beta;
    const double h = static_cast<double>(schedule.interval(i));
    const double lhs = 12.0 * kappa * kappa * c * std::log1p((h - 1.0) / base) + drift - base;
    if (lhs > 0.0) return false;
  }
  return true;
}

// Step-size schedules.

/// eta_t = 3 / (mu (t + beta))
struct InverseTSteps {
  double mu = 1.0;
  double beta = 1.0;
};

/// 1/L for t < t0 = floor(2L/mu), then 2t / (mu (t+1)^2). Never exceeds 1/L.
struct ThetaSteps {
  double mu = 1.0;
  double L = 1.0;
  std::int64_t t0() const { return static_cast<std::int64_t>(std::floor(2.0 * L / mu)); }
};

struct ConstantSteps {
  double eta = 0.1;
};

/// min{1/L, 2/(mu (t+1))}
struct CappedInverseTSteps {
  double mu = 1.0;
  double L = 1.0;
};

using StepSchedule = std::variant<InverseTSteps, ThetaSteps, ConstantSteps, CappedInverseTSteps>;

namespace detail {
template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;
}  // namespace detail

inline double step_size(const StepSchedule& steps, std::int64_t t) {
  const double td = static_cast<double>(t);
  return std::visit(
      detail::overloaded{
          [&](const InverseTSteps& s) { return 3.0 / (s.mu * (td + s.beta)); },
          [&](const ThetaSteps& s) {
            if (t < s.t0()) return 1.0 / s.L;
            return 2.0 * td / (s.mu * (td + 1.0) * (td + 1.0));
          },
          [&](const ConstantSteps& s) { return s.eta; },
          [&](const CappedInverseTSteps& s) { return std::min(1.0 / s.L, 2.0 / (s.mu * (td + 1.0))); },
      },
      steps);
}

inline void validate(const StepSchedule& steps) {
  std::visit(detail::overloaded{
                 [](const InverseTSteps& s) {
                   if (!(s.mu > 0.0) || !(s.beta > 0.0)) {
                     throw std::invalid_argument("inverse-t steps need mu > 0 and beta > 0");
                   }
                 },
                 [](const ThetaSteps& s) {
                   if (!(s.mu > 0.0) || !(s.L >= s.mu)) {
                     throw std::invalid_argument("theta steps need 0 < mu <= L");
                   }
                 },
                 [](const ConstantSteps& s) {
                   if (!(s.eta > 0.0)) throw std::invalid_argument("constant step must be > 0");
                 },
                 [](const CappedInverseTSteps& s) {
                   if (!(s.mu > 0.0) || !(s.L > 0.0)) {
                     throw std::invalid_argument("capped inverse-t steps need mu > 0 and L > 0");
                   }
                 },
             },
             steps);
}

}  // namespace localsgd
