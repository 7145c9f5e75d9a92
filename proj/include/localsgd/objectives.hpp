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
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

#include "localsgd/core.hpp"
#include "localsgd/libsvm.hpp"

namespace localsgd {

/// What the simulator needs from a problem: exact value and gradient, a
/// stochastic-gradient oracle driven by an RngStream, and declared constants.
template <typename T>
concept Objective = requires(const T& obj, const Point& x, const RngStream& s) {
  { obj.dim() } -> std::convertible_to<std::size_t>;
  { obj.value(x) } -> std::convertible_to<double>;
  { obj.gradient(x) } -> std::same_as<Point>;
  { obj.stochastic_gradient(x, s) } -> std::same_as<Point>;
  { obj.constants() } -> std::convertible_to<const ProblemConstants&>;
};

namespace detail {
inline void check_dim(const Point& x, std::size_t d, const char* who) {
  if (x.dim() != d) {
    throw std::invalid_argument(std::string(who) + ": dimension mismatch (expected " +
                                std::to_string(d) + ", got " + std::to_string(x.dim()) + ")");
  }
}
}  // namespace detail

/// F(x) = sum_i (i/2) x_i^2, observed through
///   g_i = i x_i (1 + z1_i) + z2_i,  z1_i ~ N(0, c1),  z2_i ~ N(0, c2).
/// The noise satisfies E||g - grad F||^2 = c1 ||grad F||^2 + d c2 exactly.
class QuadraticStrongGrowth {
 public:
  QuadraticStrongGrowth(std::size_t d, double c1, double c2) : d_(d), c1_(c1), c2_(c2) {
    if (d == 0) throw std::invalid_argument("QuadraticStrongGrowth: d must be >= 1");
    if (!(c1 >= 0.0) || !(c2 >= 0.0)) {
      throw std::invalid_argument("QuadraticStrongGrowth: noise variances must be >= 0");
    }
    constants_.mu = 1.0;
    constants_.L = static_cast<double>(d);
    constants_.c = c1;
    constants_.sigma2 = static_cast<double>(d) * c2;
    constants_.f_star = 0.0;
    constants_.x_star = Point(d, 0.0);
  }

  std::size_t dim() const { return d_; }
  double c1() const { return c1_; }
  double c2() const { return c2_; }
  const ProblemConstants& constants() const { return constants_; }

  double value(const Point& x) const {
    detail::check_dim(x, d_, "QuadraticStrongGrowth::value");
    double s = 0.0;
    for (std::size_t i = 0; i < d_; ++i) s += 0.5 * static_cast<double>(i + 1) * x[i] * x[i];
    return s;
  }

  Point gradient(const Point& x) const {
    detail::check_dim(x, d_, "QuadraticStrongGrowth::gradient");
    Point g(d_);
    for (std::size_t i = 0; i < d_; ++i) g[i] = static_cast<double>(i + 1) * x[i];
    return g;
  }

  // Draw 2i feeds z1_i, draw 2i+1 feeds z2_i.
  Point stochastic_gradient(const Point& x, const RngStream& stream) const {
    detail::check_dim(x, d_, "QuadraticStrongGrowth::stochastic_gradient");
    Point g(d_);
    for (std::size_t i = 0; i < d_; ++i) {
      const auto k = static_cast<std::uint32_t>(2 * i);
      const double z1 = gaussian_draw(stream.with_draw(k), 0.0, c1_);
      const double z2 = gaussian_draw(stream.with_draw(k + 1), 0.0, c2_);
      g[i] = static_cast<double>(i + 1) * x[i] * (1.0 + z1) + z2;
    }
    return g;
  }

 private:
  std::size_t d_;
  double c1_;
  double c2_;
  ProblemConstants constants_;
};

/// F(x) = x^2/2 for x <= 0 and x^2 for x > 0, with N(0, sigma^2) gradient noise.
/// C^1 but not twice differentiable at the minimizer x* = 0.
class PiecewiseQuadratic1D {
 public:
  explicit PiecewiseQuadratic1D(double sigma) : sigma_(sigma) {
    if (!(sigma >= 0.0)) throw std::invalid_argument("PiecewiseQuadratic1D: sigma must be >= 0");
    constants_.mu = 1.0;
    constants_.L = 2.0;
    constants_.c = 0.0;
    constants_.sigma2 = sigma * sigma;
    constants_.f_star = 0.0;
    constants_.x_star = Point{0.0};
  }

  std::size_t dim() const { return 1; }
  double sigma() const { return sigma_; }
  const ProblemConstants& constants() const { return constants_; }

  double value(const Point& x) const {
    detail::check_dim(x, 1, "PiecewiseQuadratic1D::value");
    return x[0] <= 0.0 ? 0.5 * x[0] * x[0] : x[0] * x[0];
  }

  Point gradient(const Point& x) const {
    detail::check_dim(x, 1, "PiecewiseQuadratic1D::gradient");
    return Point{x[0] <= 0.0 ? x[0] : 2.0 * x[0]};
  }

  Point stochastic_gradient(const Point& x, const RngStream& stream) const {
    Point g = gradient(x);
    g[0] += gaussian_draw(stream, 0.0, constants_.sigma2);
    return g;
  }

 private:
  double sigma_;
  ProblemConstants constants_;
};

/// L2-regularized logistic regression with labels in {0, 1}:
///   F(x) = (1/M) sum_j [ ln(1 + exp(x.A_j)) - 1{b_j = 1} x.A_j ] + (lambda/2) ||x||^2.
///
/// On construction with lambda > 0 the constants are filled in numerically:
/// L = lambda + lambda_max(A^T A / 4M) by power iteration, and (x*, f*) by full
/// gradient descent with step 1/L until ||grad F|| <= 1e-10. sigma2 is the
/// single-sample gradient variance at x*; c is not characterized and left at 0.
class LogisticL2 {
 public:
  struct Options {
    std::size_t batch = 1;
    double power_iteration_rtol = 1e-6;
    double optimum_grad_tol = 1e-10;
    std::size_t max_descent_iterations = 10'000'000;
  };

  LogisticL2(std::shared_ptr<const Dataset> data, double lambda)
      : LogisticL2(std::move(data), lambda, Options{}) {}

  LogisticL2(std::shared_ptr<const Dataset> data, double lambda, Options opts)
      : data_(std::move(data)), lambda_(lambda), opts_(opts) {
    if (!data_) throw std::invalid_argument("LogisticL2: null dataset");
    if (data_->rows() == 0) throw std::invalid_argument("LogisticL2: empty dataset");
    if (data_->dim() == 0) throw std::invalid_argument("LogisticL2: dataset has d = 0");
    if (!(lambda >= 0.0)) throw std::invalid_argument("LogisticL2: lambda must be >= 0");
    if (opts_.batch == 0) throw std::invalid_argument("LogisticL2: batch must be >= 1");
    if (lambda > 0.0) compute_reference();
  }

  std::size_t dim() const { return data_->dim(); }
  double lambda() const { return lambda_; }
  std::size_t batch() const { return opts_.batch; }
  const Dataset& data() const { return *data_; }

  const ProblemConstants& constants() const {
    if (!constants_) throw std::logic_error("LogisticL2: constants need lambda > 0");
    return *constants_;
  }

  double value(const Point& x) const {
    detail::check_dim(x, dim(), "LogisticL2::value");
    double s = 0.0;
    for (std::size_t j = 0; j < data_->rows(); ++j) {
      const double z = data_->row_dot(j, x.values());
      s += softplus(z) - (data_->label(j) == 1 ? z : 0.0);
    }
    return s / static_cast<double>(data_->rows()) + 0.5 * lambda_ * squared_norm(x);
  }

  Point gradient(const Point& x) const {
    detail::check_dim(x, dim(), "LogisticL2::gradient");
    Point g(dim(), 0.0);
    for (std::size_t j = 0; j < data_->rows(); ++j) {
      const double z = data_->row_dot(j, x.values());
      data_->row_axpy(j, sigmoid(z) - data_->label(j), g.values());
    }
    const double inv_m = 1.0 / static_cast<double>(data_->rows());
    for (std::size_t i = 0; i < dim(); ++i) g[i] = g[i] * inv_m + lambda_ * x[i];
    return g;
  }

  /// Mini-batch of `batch` rows drawn uniformly with replacement (draw k picks row k).
  Point stochastic_gradient(const Point& x, const RngStream& stream) const {
    detail::check_dim(x, dim(), "LogisticL2::stochastic_gradient");
    Point g(dim(), 0.0);
    for (std::size_t k = 0; k < opts_.batch; ++k) {
      const auto j = static_cast<std::size_t>(
          stream.with_draw(static_cast<std::uint32_t>(k)).uniform_index(data_->rows()));
      const double z = data_->row_dot(j, x.values());
      data_->row_axpy(j, sigmoid(z) - data_->label(j), g.values());
    }
    const double inv_b = 1.0 / static_cast<double>(opts_.batch);
    for (std::size_t i = 0; i < dim(); ++i) g[i] = g[i] * inv_b + lambda_ * x[i];
    return g;
  }

  /// Largest eigenvalue of A^T A / (4M).
  double data_smoothness() const { return data_smoothness_; }
  std::size_t descent_iterations() const { return descent_iterations_; }

  static double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
  }

  static double softplus(double z) {
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  }

 private:
  void compute_reference() {
    const std::size_t d = dim();
    const double scale = 1.0 / (4.0 * static_cast<double>(data_->rows()));

    // Power iteration on B = A^T A / 4M from a fixed pseudo-random start.
    Point v(d);
    const RngStream start{0x5EEDu, 0, 0, 0, 0};
    for (std::size_t i = 0; i < d; ++i) {
      v[i] = 0.5 + start.with_draw(static_cast<std::uint32_t>(i)).uniform();
    }
    normalize(v);
    double eig = 0.0;
    for (int it = 0; it < 100'000; ++it) {
      Point bv(d, 0.0);
      for (std::size_t j = 0; j < data_->rows(); ++j) {
        data_->row_axpy(j, data_->row_dot(j, v.values()) * scale, bv.values());
      }
      const double next = dot(v, bv);  // Rayleigh quotient, v has unit norm
      const double n = std::sqrt(squared_norm(bv));
      if (n == 0.0) {
        eig = 0.0;
        break;
      }
      for (std::size_t i = 0; i < d; ++i) v[i] = bv[i] / n;
      const bool done = it > 0 && std::abs(next - eig) <= opts_.power_iteration_rtol * next;
      eig = next;
      if (done) break;
    }
    data_smoothness_ = eig;

    ProblemConstants k;
    k.mu = lambda_;
    k.L = lambda_ + eig;
    k.c = 0.0;

    Point x(d, 0.0);
    const double step = 1.0 / k.L;
    std::size_t it = 0;
    for (; it < opts_.max_descent_iterations; ++it) {
      const Point g = gradient(x);
      if (std::sqrt(squared_norm(g)) <= opts_.optimum_grad_tol) break;
      for (std::size_t i = 0; i < d; ++i) x[i] -= step * g[i];
    }
    descent_iterations_ = it;
    k.f_star = value(x);

    const Point full = gradient(x);
    double var = 0.0;
    for (std::size_t j = 0; j < data_->rows(); ++j) {
      Point gj(d, 0.0);
      data_->row_axpy(j, sigmoid(data_->row_dot(j, x.values())) - data_->label(j), gj.values());
      for (std::size_t i = 0; i < d; ++i) gj[i] += lambda_ * x[i];
      var += squared_distance(gj, full);
    }
    k.sigma2 = var / static_cast<double>(data_->rows());
    k.x_star = std::move(x);
    constants_ = std::move(k);
  }

  static void normalize(Point& v) {
    const double n = std::sqrt(squared_norm(v));
    for (auto& e : v) e /= n;
  }

  std::shared_ptr<const Dataset> data_;
  double lambda_;
  Options opts_;
  std::optional<ProblemConstants> constants_;
  double data_smoothness_ = 0.0;
  std::size_t descent_iterations_ = 0;
};

}  // namespace localsgd
