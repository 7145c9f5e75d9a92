// Copyright 2026 The localsgd Authors. Licensed under the Apache License, Version 2.0.

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <random>

#include "localsgd/objectives.hpp"

namespace localsgd {
namespace {

std::shared_ptr<const Dataset> sample_dataset() {
  return std::make_shared<const Dataset>(
      load_libsvm(std::string(LOCALSGD_SOURCE_DIR) + "/data/a9a_format_sample.libsvm", 124));
}

// Central differences with step h on each coordinate.
template <typename Obj>
Point finite_difference_gradient(const Obj& obj, const Point& x, double h = 1e-6) {
  Point g(x.dim());
  for (std::size_t i = 0; i < x.dim(); ++i) {
    Point xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (obj.value(xp) - obj.value(xm)) / (2.0 * h);
  }
  return g;
}

template <typename Obj>
void expect_gradient_matches_fd(const Obj& obj, double scale, std::uint32_t seed, bool skip_near_zero = false) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd(0.0, scale);
  int checked = 0;
  while (checked < 100) {
    Point x(obj.dim());
    for (auto& v : x) v = nd(gen);
    if (skip_near_zero && std::abs(x[0]) < 1e-6) continue;
    const Point g = obj.gradient(x);
    const Point fd = finite_difference_gradient(obj, x);
    const double rel = std::sqrt(squared_distance(g, fd)) / std::max(std::sqrt(squared_norm(g)), 1e-12);
    EXPECT_LT(rel, 1e-5) << "at point " << checked;
    ++checked;
  }
}

TEST(Quadratic, ValuesAndGradients) {
  const QuadraticStrongGrowth q(3, 1.0, 1e-10);
  EXPECT_EQ(q.value(Point{0.0, 0.0, 0.0}), 0.0);
  EXPECT_DOUBLE_EQ(q.value(Point{1.0, 1.0, 1.0}), 3.0);
  EXPECT_EQ(q.gradient(Point{1.0, 1.0, 1.0}), (Point{1.0, 2.0, 3.0}));
  EXPECT_THROW(q.value(Point{1.0}), std::invalid_argument);
  EXPECT_THROW(q.gradient(Point{1.0, 2.0}), std::invalid_argument);
  EXPECT_THROW(q.stochastic_gradient(Point{1.0}, RngStream{}), std::invalid_argument);
}

TEST(Quadratic, DeclaredConstants) {
  const QuadraticStrongGrowth q(5, 2.0, 0.1);
  const auto& k = q.constants();
  EXPECT_EQ(k.mu, 1.0);
  EXPECT_EQ(k.L, 5.0);
  EXPECT_EQ(k.c, 2.0);
  EXPECT_DOUBLE_EQ(k.sigma2, 0.5);
  EXPECT_EQ(k.f_star, 0.0);
  EXPECT_EQ(k.x_star, Point(5, 0.0));
}

// Hessian by differencing the gradient: exactly diag(1, ..., d).
TEST(Quadratic, HessianEigenvaluesAreOneToD) {
  const std::size_t d = 6;
  const QuadraticStrongGrowth q(d, 0.0, 0.0);
  Eigen::MatrixXd hess(d, d);
  const Point x0(d, 0.3);
  for (std::size_t j = 0; j < d; ++j) {
    Point xp = x0;
    xp[j] += 1.0;
    const Point gp = q.gradient(xp), g0 = q.gradient(x0);
    for (std::size_t i = 0; i < d; ++i) hess(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = gp[i] - g0[i];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hess);
  for (std::size_t i = 0; i < d; ++i) EXPECT_NEAR(es.eigenvalues()(static_cast<Eigen::Index>(i)), double(i + 1), 1e-12);
}

TEST(Quadratic, ZeroNoiseIsExactGradient) {
  const QuadraticStrongGrowth q(3, 0.0, 0.0);
  const Point x{0.7, -1.2, 3.0};
  for (std::uint32_t t = 0; t < 20; ++t) EXPECT_EQ(q.stochastic_gradient(x, RngStream{5, 0, 0, t, 0}), q.gradient(x));
}

template <typename Obj>
double mean_noise_second_moment(const Obj& obj, const Point& x, int n) {
  const Point g = obj.gradient(x);
  double s = 0.0;
  for (int t = 0; t < n; ++t) {
    s += squared_distance(obj.stochastic_gradient(x, RngStream{11, 0, 0, static_cast<std::uint32_t>(t), 0}), g);
  }
  return s / n;
}

TEST(Quadratic, AdditiveNoiseAtOptimum) {
  const QuadraticStrongGrowth q(3, 1.0, 1e-10);
  const double m = mean_noise_second_moment(q, Point(3, 0.0), 100'000);
  EXPECT_NEAR(m, 3e-10, 0.1 * 3e-10);
}

TEST(Quadratic, MultiplicativeNoise) {
  const QuadraticStrongGrowth q(3, 1.0, 0.0);
  const double m = mean_noise_second_moment(q, Point(3, 1.0), 100'000);
  EXPECT_NEAR(m, 14.0, 0.05 * 14.0);
}

TEST(Quadratic, NoiseCalibrationStrongGrowth) {
  // E||g - grad F||^2 = c1 ||grad F||^2 + d c2
  const QuadraticStrongGrowth q(4, 0.5, 0.3);
  const Point x{0.5, -1.0, 0.25, 2.0};
  const double expected = 0.5 * squared_norm(q.gradient(x)) + 4 * 0.3;
  EXPECT_NEAR(mean_noise_second_moment(q, x, 100'000), expected, 0.05 * expected);
}

template <typename Obj>
void expect_unbiased(const Obj& obj, const Point& x, int n) {
  const Point g = obj.gradient(x);
  std::vector<double> sum(x.dim(), 0.0), sum_sq(x.dim(), 0.0);
  for (int t = 0; t < n; ++t) {
    const Point s = obj.stochastic_gradient(x, RngStream{21, 0, 3, static_cast<std::uint32_t>(t), 0});
    for (std::size_t i = 0; i < x.dim(); ++i) {
      sum[i] += s[i];
      sum_sq[i] += s[i] * s[i];
    }
  }
  for (std::size_t i = 0; i < x.dim(); ++i) {
    const double mean = sum[i] / n;
    const double var = std::max(0.0, sum_sq[i] / n - mean * mean);
    const double se = std::sqrt(var / n);
    // Noise-free coordinates still carry summation rounding.
    EXPECT_LE(std::abs(mean - g[i]), 4.0 * se + 1e-12 * std::max(1.0, std::abs(g[i]))) << "coordinate " << i;
  }
}

TEST(Objectives, StochasticGradientsAreUnbiased) {
  expect_unbiased(QuadraticStrongGrowth(3, 1.0, 0.01), Point{1.0, -0.5, 0.25}, 100'000);
  expect_unbiased(PiecewiseQuadratic1D(8.0), Point{0.3}, 100'000);
  expect_unbiased(PiecewiseQuadratic1D(8.0), Point{-0.3}, 100'000);
  const LogisticL2 lg(sample_dataset(), 0.05);
  Point x(lg.dim());
  for (std::size_t i = 0; i < x.dim(); ++i) x[i] = 0.01 * static_cast<double>(i % 7) - 0.03;
  expect_unbiased(lg, x, 100'000);
}

TEST(Objectives, GradientsMatchFiniteDifferences) {
  expect_gradient_matches_fd(QuadraticStrongGrowth(3, 1.0, 1e-10), 2.0, 1);
  expect_gradient_matches_fd(PiecewiseQuadratic1D(8.0), 2.0, 2, /*skip_near_zero=*/true);
  expect_gradient_matches_fd(LogisticL2(sample_dataset(), 0.05), 0.3, 3);
}

TEST(Piecewise, ValuesAndOneSidedGradients) {
  const PiecewiseQuadratic1D p(8.0);
  EXPECT_DOUBLE_EQ(p.value(Point{-2.0}), 2.0);
  EXPECT_DOUBLE_EQ(p.value(Point{2.0}), 4.0);
  EXPECT_EQ(p.gradient(Point{-1.0})[0], -1.0);
  EXPECT_EQ(p.gradient(Point{1.0})[0], 2.0);
  EXPECT_EQ(p.gradient(Point{0.0})[0], 0.0);
  EXPECT_EQ(p.constants().mu, 1.0);
  EXPECT_EQ(p.constants().L, 2.0);
  EXPECT_EQ(p.constants().sigma2, 64.0);
  EXPECT_THROW(p.value(Point{1.0, 2.0}), std::invalid_argument);
}

TEST(Piecewise, NoiseVariance) {
  const PiecewiseQuadratic1D p(8.0);
  EXPECT_NEAR(mean_noise_second_moment(p, Point{0.5}, 100'000), 64.0, 0.05 * 64.0);
}

template <typename Obj>
void expect_strongly_convex_midpoints(const Obj& obj, double scale, std::uint32_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd(0.0, scale);
  const double mu = obj.constants().mu;
  for (int k = 0; k < 200; ++k) {
    Point x(obj.dim()), y(obj.dim()), m(obj.dim());
    for (std::size_t i = 0; i < obj.dim(); ++i) {
      x[i] = nd(gen);
      y[i] = nd(gen);
      m[i] = 0.5 * x[i] + 0.5 * y[i];
    }
    const double rhs = 0.5 * obj.value(x) + 0.5 * obj.value(y) - mu / 8.0 * squared_distance(x, y);
    EXPECT_LE(obj.value(m), rhs + 1e-12 * std::max(1.0, std::abs(rhs)));
  }
}

TEST(Objectives, StrongConvexityMidpoint) {
  expect_strongly_convex_midpoints(QuadraticStrongGrowth(3, 1.0, 0.0), 2.0, 4);
  expect_strongly_convex_midpoints(PiecewiseQuadratic1D(1.0), 2.0, 5);
  expect_strongly_convex_midpoints(LogisticL2(sample_dataset(), 0.05), 0.5, 6);
}

TEST(Logistic, SingleRowGradientAtZero) {
  Dataset d;
  const std::uint32_t cols[] = {0, 2, 3};
  const double vals[] = {1.5, -2.0, 0.25};
  d.add_row(1, cols, vals);
  d.set_dim(4);
  const LogisticL2 lg(std::make_shared<const Dataset>(d), 0.0);
  const Point g = lg.gradient(Point(4, 0.0));
  EXPECT_EQ(g, (Point{-0.75, 0.0, 1.0, -0.125}));
  EXPECT_THROW(lg.constants(), std::logic_error);
}

TEST(Logistic, SmoothnessMatchesDenseEigensolver) {
  const auto data = sample_dataset();
  const LogisticL2 lg(data, 0.05);
  const auto d = static_cast<Eigen::Index>(data->dim());
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(data->rows()), d);
  for (std::size_t j = 0; j < data->rows(); ++j) {
    const auto idx = data->row_indices(j);
    const auto val = data->row_values(j);
    for (std::size_t k = 0; k < idx.size(); ++k) A(static_cast<Eigen::Index>(j), idx[k]) = val[k];
  }
  const Eigen::MatrixXd B = A.transpose() * A / (4.0 * static_cast<double>(data->rows()));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(B);
  const double top = es.eigenvalues().maxCoeff();
  EXPECT_NEAR(lg.data_smoothness(), top, 1e-5 * top);
  EXPECT_NEAR(lg.constants().L, 0.05 + top, 1e-5 * top);
  EXPECT_EQ(lg.constants().mu, 0.05);
}

TEST(Logistic, ReferenceOptimumIsStationaryAndMinimal) {
  const LogisticL2 lg(sample_dataset(), 0.05);
  const auto& k = lg.constants();
  EXPECT_LE(std::sqrt(squared_norm(lg.gradient(k.x_star))), 1e-10);
  EXPECT_DOUBLE_EQ(lg.value(k.x_star), k.f_star);
  std::mt19937_64 gen(8);
  std::normal_distribution<double> nd(0.0, 0.1);
  for (int trial = 0; trial < 20; ++trial) {
    Point x = k.x_star;
    for (auto& v : x) v += nd(gen);
    EXPECT_GT(lg.value(x), k.f_star);
  }
  EXPECT_GT(k.sigma2, 0.0);
}

TEST(Logistic, NumericallyStableForLargeMargins) {
  EXPECT_DOUBLE_EQ(LogisticL2::softplus(800.0), 800.0);
  EXPECT_EQ(LogisticL2::softplus(-800.0), 0.0);
  EXPECT_EQ(LogisticL2::sigmoid(-800.0), 0.0);
  EXPECT_EQ(LogisticL2::sigmoid(800.0), 1.0);
}

TEST(Logistic, RejectsBadInputs) {
  EXPECT_THROW(LogisticL2(std::make_shared<const Dataset>(), 0.1), std::invalid_argument);
  EXPECT_THROW(LogisticL2(sample_dataset(), -1.0), std::invalid_argument);
  LogisticL2::Options opts;
  opts.batch = 0;
  EXPECT_THROW(LogisticL2(sample_dataset(), 0.1, opts), std::invalid_argument);
}

TEST(Logistic, MiniBatchAveragesRows) {
  const auto data = sample_dataset();
  LogisticL2::Options opts;
  opts.batch = 4;
  const LogisticL2 lg(data, 0.05, opts);
  const Point x(lg.dim(), 0.02);
  const RngStream s{1, 0, 0, 5, 0};
  Point expected(lg.dim(), 0.0);
  for (std::uint32_t k = 0; k < 4; ++k) {
    const auto j = s.with_draw(k).uniform_index(data->rows());
    data->row_axpy(j, LogisticL2::sigmoid(data->row_dot(j, x.values())) - data->label(j), expected.values());
  }
  const Point g = lg.stochastic_gradient(x, s);
  for (std::size_t i = 0; i < lg.dim(); ++i) EXPECT_NEAR(g[i], expected[i] / 4.0 + 0.05 * x[i], 1e-15);
}

}  // namespace
}  // namespace localsgd
