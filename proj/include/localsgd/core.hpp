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
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace localsgd {

/// A model parameter vector x in R^d.
class Point {
 public:
  Point() = default;
  explicit Point(std::size_t dim, double fill = 0.0) : coords_(dim, fill) {}
  Point(std::initializer_list<double> values) : coords_(values) {}
  explicit Point(std::vector<double> values) : coords_(std::move(values)) {}

  std::size_t dim() const { return coords_.size(); }
  double& operator[](std::size_t i) { return coords_[i]; }
  double operator[](std::size_t i) const { return coords_[i]; }

  std::span<double> values() { return coords_; }
  std::span<const double> values() const { return coords_; }

  auto begin() { return coords_.begin(); }
  auto end() { return coords_.end(); }
  auto begin() const { return coords_.begin(); }
  auto end() const { return coords_.end(); }

  bool all_finite() const {
    return std::all_of(coords_.begin(), coords_.end(),
                       [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const Point&, const Point&) = default;

 private:
  std::vector<double> coords_;
};

inline double dot(const Point& a, const Point& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) s += a[i] * b[i];
  return s;
}

inline double squared_norm(const Point& a) { return dot(a, a); }

inline double squared_distance(const Point& a, const Point& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    const double diff = a[i] - b[i];
    s += diff * diff;
  }
  return s;
}

/// Problem constants of a mu-strongly convex (or PL), L-smooth objective with
/// strong-growth noise E||g - grad f||^2 <= c ||grad f||^2 + sigma2.
struct ProblemConstants {
  double mu = 1.0;
  double L = 1.0;
  double c = 0.0;
  double sigma2 = 0.0;
  double f_star = 0.0;
  Point x_star;

  double kappa() const { return L / mu; }

  void validate() const {
    if (!(mu > 0.0)) throw std::invalid_argument("mu must be positive");
    if (!(L >= mu)) throw std::invalid_argument("L must be >= mu");
    if (!(c >= 0.0)) throw std::invalid_argument("c must be non-negative");
    if (!(sigma2 >= 0.0)) throw std::invalid_argument("sigma2 must be non-negative");
  }
};

namespace detail {

// Philox4x32-10 (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3").
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                                std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t kMul0 = 0xD2511F53u;
  constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

}  // namespace detail

/// Coordinates of one random draw. Every draw is a pure function of
/// (seed, replication, worker, iteration, draw), so results never depend on
/// evaluation order or on how replications are scheduled across threads.
struct RngStream {
  std::uint64_t seed = 0;
  std::uint32_t replication = 0;
  std::uint32_t worker = 0;
  std::uint32_t iteration = 0;
  std::uint32_t draw = 0;

  RngStream with_replication(std::uint32_t r) const {
    RngStream s = *this;
    s.replication = r;
    return s;
  }
  RngStream at(std::uint32_t w, std::uint32_t t) const {
    RngStream s = *this;
    s.worker = w;
    s.iteration = t;
    s.draw = 0;
    return s;
  }
  RngStream with_draw(std::uint32_t k) const {
    RngStream s = *this;
    s.draw = k;
    return s;
  }

  std::array<std::uint32_t, 4> raw_bits() const {
    return detail::philox4x32(
        {draw, iteration, worker, replication},
        {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)});
  }

  /// Two 64-bit words from the block.
  std::array<std::uint64_t, 2> words() const {
    const auto b = raw_bits();
    return {(std::uint64_t{b[1]} << 32) | b[0], (std::uint64_t{b[3]} << 32) | b[2]};
  }

  /// Uniform in [0, 1).
  double uniform() const { return static_cast<double>(words()[0] >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). Uses a 64x64->128 multiply; the bias is below 2^-40 for
  /// any n < 2^24.
  std::uint64_t uniform_index(std::uint64_t n) const {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(words()[0]) * n) >> 64);
  }
};

/// Sample from N(mean, variance) keyed by the stream coordinates (Box-Muller).
inline double gaussian_draw(const RngStream& stream, double mean, double variance) {
  if (!(variance >= 0.0)) throw std::invalid_argument("gaussian_draw: negative variance");
  if (variance == 0.0) return mean;
  const auto w = stream.words();
  const double u1 = static_cast<double>((w[0] >> 11) + 1) * 0x1.0p-53;  // (0, 1]
  const double u2 = static_cast<double>(w[1] >> 11) * 0x1.0p-53;        // [0, 1)
  const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  return mean + std::sqrt(variance) * z;
}

}  // namespace localsgd
