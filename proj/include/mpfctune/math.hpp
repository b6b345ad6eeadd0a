// Copyright 2026 The mpfctune Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MPFCTUNE_MATH_HPP_
#define MPFCTUNE_MATH_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace mpfctune {

inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr double kGravity = 9.81;  // [m/s^2]

/// Standard normal probability density.
inline double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * kPi);
}

/// Standard normal cumulative distribution, accurate in both tails.
inline double normal_cdf(double z) {
  return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  if (a > kPi) a -= 2.0 * kPi;
  return a;
}

inline double clamp(double x, double lo, double hi) {
  return x < lo ? lo : (x > hi ? hi : x);
}

/// Quadratic hinge: returns max(0, x)^2.
inline double hinge_sq(double x) {
  const double h = x > 0.0 ? x : 0.0;
  return h * h;
}

// ---------------------------------------------------------------------------
// Deterministic randomness.
//
// All stochastic components draw through these helpers so that a given seed
// reproduces bit-identical streams on every platform. std::mt19937_64 has a
// standard-specified sequence; the distributions in <random> do not, so we
// map raw 64-bit draws ourselves.
// ---------------------------------------------------------------------------

using Rng = std::mt19937_64;

/// SplitMix64 mix step; used to derive independent sub-seeds.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Uniform draw in [0, 1) from the top 53 bits of the engine output.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

/// Uniform integer in [0, n); n must be positive.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return static_cast<std::size_t>(rng() % static_cast<std::uint64_t>(n));
}

/// Standard normal draw (Box-Muller, one value per call).
inline double normal_draw(Rng& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

/// Deterministic Fisher-Yates shuffle.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[uniform_index(rng, i)]);
  }
}

/// Latin hypercube sample of n points in [0,1]^dim: every axis is split into
/// n strata and each stratum holds exactly one point per dimension.
inline std::vector<std::vector<double>> latin_hypercube(std::size_t n,
                                                        std::size_t dim,
                                                        std::uint64_t seed) {
  if (n == 0 || dim == 0) throw std::invalid_argument("latin_hypercube: empty design");
  Rng rng(seed);
  std::vector<std::vector<double>> points(n, std::vector<double>(dim, 0.0));
  std::vector<std::size_t> perm(n);
  for (std::size_t d = 0; d < dim; ++d) {
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    shuffle(perm, rng);
    for (std::size_t i = 0; i < n; ++i) {
      points[i][d] = (static_cast<double>(perm[i]) + uniform01(rng)) / static_cast<double>(n);
    }
  }
  return points;
}

/// Classical RK4 step for a fixed-size state vector. `f(x)` returns dx/dt.
template <typename State, typename Deriv>
State rk4_step(const State& x, double dt, Deriv&& f) {
  const State k1 = f(x);
  State x2 = x;
  for (std::size_t i = 0; i < x.size(); ++i) x2[i] = x[i] + 0.5 * dt * k1[i];
  const State k2 = f(x2);
  for (std::size_t i = 0; i < x.size(); ++i) x2[i] = x[i] + 0.5 * dt * k2[i];
  const State k3 = f(x2);
  for (std::size_t i = 0; i < x.size(); ++i) x2[i] = x[i] + dt * k3[i];
  const State k4 = f(x2);
  State out = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
  return out;
}

}  // namespace mpfctune

#endif  // MPFCTUNE_MATH_HPP_
