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

#ifndef MPFCTUNE_ACQUISITION_HPP_
#define MPFCTUNE_ACQUISITION_HPP_

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "mpfctune/gpr.hpp"
#include "mpfctune/math.hpp"

namespace mpfctune {

/// Expected improvement of a normal prediction below an incumbent:
/// EI = sigma (z Phi(z) + phi(z)), z = (best - mean) / sigma. The sigma -> 0
/// limit max(best - mean, 0) is used for degenerate predictions.
inline double expected_improvement(const Prediction& pred, double best) {
  if (pred.std < 0.0) throw std::invalid_argument("expected_improvement: negative std");
  if (pred.std == 0.0) return std::max(best - pred.mean, 0.0);
  const double z = (best - pred.mean) / pred.std;
  return pred.std * (z * normal_cdf(z) + normal_pdf(z));
}

/// Pr(g > threshold) for a normal prediction of the feasibility response;
/// the sigma -> 0 limit is the indicator.
inline double probability_of_feasibility(const Prediction& pred_g, double threshold = 0.0) {
  if (pred_g.std < 0.0) throw std::invalid_argument("probability_of_feasibility: negative std");
  if (pred_g.std == 0.0) return pred_g.mean > threshold ? 1.0 : 0.0;
  return normal_cdf((pred_g.mean - threshold) / pred_g.std);
}

/// Expected improvement with constraints. Before any feasible point exists
/// there is no incumbent, and the acquisition degenerates to the
/// probability of feasibility alone.
inline double eic(const Prediction& pred_b, const std::optional<double>& best_b,
                  const Prediction& pred_g) {
  const double pf = probability_of_feasibility(pred_g, 0.0);
  if (!best_b.has_value()) return pf;
  return expected_improvement(pred_b, *best_b) * pf;
}

/// Current nondominated objective triples (feasible points only), in the
/// scale the acquisition is evaluated in.
struct ParetoFrontObjectives {
  std::vector<std::array<double, 3>> points;

  static bool dominates(const std::array<double, 3>& a, const std::array<double, 3>& b) {
    bool strict = false;
    for (int i = 0; i < 3; ++i) {
      if (a[i] > b[i]) return false;
      if (a[i] < b[i]) strict = true;
    }
    return strict;
  }

  /// Builds the front from arbitrary triples, dropping dominated entries.
  static ParetoFrontObjectives from_points(const std::vector<std::array<double, 3>>& raw) {
    ParetoFrontObjectives front;
    for (const auto& candidate : raw) {
      bool dominated = false;
      for (const auto& kept : front.points) {
        if (dominates(kept, candidate)) {
          dominated = true;
          break;
        }
      }
      if (dominated) continue;
      std::erase_if(front.points,
                    [&](const std::array<double, 3>& kept) { return dominates(candidate, kept); });
      front.points.push_back(candidate);
    }
    return front;
  }
};

/// Euclidean expected-improvement-matrix criterion: the minimum over front
/// points of the Euclidean norm of the per-objective expected improvements.
inline double eim_euclidean(const std::array<Prediction, 3>& preds,
                            const ParetoFrontObjectives& front) {
  if (front.points.empty()) {
    throw std::invalid_argument("eim_euclidean: empty Pareto front");
  }
  double best = std::numeric_limits<double>::infinity();
  for (const auto& point : front.points) {
    double ssq = 0.0;
    for (int i = 0; i < 3; ++i) {
      const double ei = expected_improvement(preds[i], point[i]);
      ssq += ei * ei;
    }
    best = std::min(best, std::sqrt(ssq));
  }
  return best;
}

/// EIM_e weighted by the probability of feasibility (feasible coded +1,
/// threshold 0).
inline double ceim(const std::array<Prediction, 3>& preds, const ParetoFrontObjectives& front,
                   const Prediction& pred_g) {
  return eim_euclidean(preds, front) * probability_of_feasibility(pred_g, 0.0);
}

/// Maximizes an acquisition over [0,1]^dim by deterministic random search.
/// Ties keep the first argmax; if every score is exactly zero a fresh
/// uniform point is returned instead (pure exploration).
inline std::vector<double> maximize_acquisition(
    const std::function<double(const std::vector<double>&)>& score, std::size_t dim,
    std::size_t budget, std::uint64_t seed) {
  if (budget < 1) throw std::invalid_argument("maximize_acquisition: budget must be >= 1");
  if (dim < 1) throw std::invalid_argument("maximize_acquisition: dimension must be >= 1");
  Rng rng(seed);
  std::vector<double> best_x(dim), x(dim);
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < budget; ++b) {
    for (auto& c : x) c = uniform01(rng);
    const double s = score(x);
    if (s > best_score) {
      best_score = s;
      best_x = x;
    }
  }
  if (best_score == 0.0) {
    for (auto& c : best_x) c = uniform01(rng);
  }
  return best_x;
}

/// Batched variant: scores a pre-drawn candidate matrix (the caller can
/// evaluate GP predictions for the whole batch at once).
inline std::vector<std::vector<double>> draw_candidates(std::size_t dim, std::size_t budget,
                                                        std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<double>> xs(budget, std::vector<double>(dim));
  for (auto& x : xs) {
    for (auto& c : x) c = uniform01(rng);
  }
  return xs;
}

}  // namespace mpfctune

#endif  // MPFCTUNE_ACQUISITION_HPP_
