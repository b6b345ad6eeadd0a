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

#ifndef MPFCTUNE_PARETO_HPP_
#define MPFCTUNE_PARETO_HPP_

#include <algorithm>
#include <array>
#include <stdexcept>
#include <vector>

#include "mpfctune/acquisition.hpp"

namespace mpfctune {

using Objective3 = std::array<double, 3>;
using ReferencePoint = Objective3;

namespace detail {

/// Area of the union of rectangles [p, ref] for a 2-D staircase; the input
/// must be mutually nondominated and sorted by x ascending (y descending).
inline double staircase_area(const std::vector<std::array<double, 2>>& stairs,
                             double ref_x, double ref_y) {
  double area = 0.0;
  for (std::size_t i = 0; i < stairs.size(); ++i) {
    const double next_x = i + 1 < stairs.size() ? stairs[i + 1][0] : ref_x;
    area += (next_x - stairs[i][0]) * (ref_y - stairs[i][1]);
  }
  return area;
}

/// Inserts (x, y) into a nondominated 2-D staircase kept sorted by x.
inline void staircase_insert(std::vector<std::array<double, 2>>& stairs, double x, double y) {
  for (const auto& s : stairs) {
    if (s[0] <= x && s[1] <= y) return;  // dominated (or duplicate)
  }
  std::erase_if(stairs, [&](const std::array<double, 2>& s) { return x <= s[0] && y <= s[1]; });
  const auto pos = std::lower_bound(stairs.begin(), stairs.end(), x,
                                    [](const std::array<double, 2>& s, double v) { return s[0] < v; });
  stairs.insert(pos, {x, y});
}

}  // namespace detail

/// Exact hypervolume of a 3-objective front against a reference point
/// (minimization): the Lebesgue measure of the union of boxes [p, ref],
/// computed by a sweep over the third coordinate with an incremental 2-D
/// staircase. Dominated members contribute nothing and are tolerated.
inline double hypervolume(const std::vector<Objective3>& front, const ReferencePoint& ref) {
  if (front.empty()) return 0.0;
  for (const auto& p : front) {
    for (int i = 0; i < 3; ++i) {
      if (p[i] > ref[i]) {
        throw std::invalid_argument("hypervolume: front point beyond the reference point");
      }
    }
  }
  std::vector<Objective3> pts = front;
  std::sort(pts.begin(), pts.end(),
            [](const Objective3& a, const Objective3& b) { return a[2] < b[2]; });

  std::vector<std::array<double, 2>> stairs;
  double volume = 0.0;
  std::size_t i = 0;
  while (i < pts.size()) {
    const double z = pts[i][2];
    while (i < pts.size() && pts[i][2] == z) {
      detail::staircase_insert(stairs, pts[i][0], pts[i][1]);
      ++i;
    }
    const double z_next = i < pts.size() ? pts[i][2] : ref[2];
    volume += detail::staircase_area(stairs, ref[0], ref[1]) * (z_next - z);
  }
  return volume;
}

/// Componentwise division by a strictly positive baseline (the hand-tuned
/// reference maps to (1, 1, 1)).
inline std::vector<Objective3> normalize_front(const std::vector<Objective3>& front,
                                               const Objective3& baseline) {
  for (double b : baseline) {
    if (!(b > 0.0)) throw std::invalid_argument("normalize_front: baseline must be positive");
  }
  std::vector<Objective3> out = front;
  for (auto& p : out) {
    for (int i = 0; i < 3; ++i) p[i] /= baseline[i];
  }
  return out;
}

/// Shared reference point for comparing fronts: the componentwise maximum
/// over all points of all fronts, inflated by `factor`.
inline ReferencePoint reference_point(const std::vector<std::vector<Objective3>>& fronts,
                                      double factor = 1.1) {
  ReferencePoint ref = {0.0, 0.0, 0.0};
  bool any = false;
  for (const auto& front : fronts) {
    for (const auto& p : front) {
      for (int i = 0; i < 3; ++i) ref[i] = any ? std::max(ref[i], p[i]) : p[i];
      any = true;
    }
  }
  if (!any) throw std::invalid_argument("reference_point: no points given");
  for (double& c : ref) c = c * factor + 1e-12;
  return ref;
}

/// Hypervolume of the running nondominated archive after each evaluation,
/// in evaluation order. Callers pass feasible objective triples only.
inline std::vector<double> hypervolume_curve(const std::vector<Objective3>& evaluations,
                                             const ReferencePoint& ref) {
  std::vector<double> curve;
  curve.reserve(evaluations.size());
  std::vector<Objective3> archive;
  for (const auto& p : evaluations) {
    bool dominated = false;
    for (const auto& q : archive) {
      if (ParetoFrontObjectives::dominates(q, p)) {
        dominated = true;
        break;
      }
    }
    if (!dominated) {
      std::erase_if(archive,
                    [&](const Objective3& q) { return ParetoFrontObjectives::dominates(p, q); });
      archive.push_back(p);
    }
    curve.push_back(hypervolume(archive, ref));
  }
  return curve;
}

}  // namespace mpfctune

#endif  // MPFCTUNE_PARETO_HPP_
