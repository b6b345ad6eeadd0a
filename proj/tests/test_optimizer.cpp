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

#include "mpfctune/optimizer.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"

namespace mpfctune {
namespace {

ObjectiveTriple triple(double lat, double jerk, double v, int g = 1) {
  ObjectiveTriple t;
  t.e_lat = lat;
  t.e_jerk = jerk;
  t.e_v = v;
  t.g = g;
  return t;
}

// Smooth synthetic black box on the normalized cube; infeasible in a corner.
Evaluator synthetic_evaluator() {
  return [](const WeightVector&, const std::vector<double>& x) -> std::optional<ObjectiveTriple> {
    ObjectiveTriple t;
    t.e_lat = 0.01 + (x[0] - 0.3) * (x[0] - 0.3) + 0.1 * x[3];
    t.e_jerk = 0.01 + (x[1] - 0.7) * (x[1] - 0.7) + 0.1 * x[4];
    t.e_v = 0.01 + (x[2] - 0.5) * (x[2] - 0.5) + 0.1 * x[5];
    t.g = x[6] < 0.85 ? 1 : -1;
    return t;
  };
}

BoSettings fast_settings(int n0 = 6, std::uint64_t seed = 3) {
  BoSettings s;
  s.n0 = n0;
  s.seed = seed;
  s.acquisition_budget = 400;
  s.fit.restarts = 2;
  s.fit.max_iters = 40;
  return s;
}

TEST(Scalarize, ConvexCombinationOfEqualValues) {
  WeightingScheme w;
  w.w = {0.2, 0.5, 0.3};
  EXPECT_DOUBLE_EQ(scalarize(triple(1.0, 1.0, 1.0), w), 1.0);
}

TEST(Scalarize, ComponentOrderIsJerkVLat) {
  WeightingScheme w;
  w.w = {0.5, 0.25, 0.25};
  // E = (E_jerk, E_v, E_lat) = (2, 4, 6)
  EXPECT_DOUBLE_EQ(scalarize(triple(6.0, 2.0, 4.0), w), 3.5);
}

TEST(Scalarize, VertexPicksSingleObjective) {
  WeightingScheme w;
  w.w = {1.0, 0.0, 0.0};
  EXPECT_DOUBLE_EQ(scalarize(triple(6.0, 2.0, 4.0), w), 2.0);
}

TEST(WeightGrid, LatticeCounts) {
  EXPECT_EQ(generate_weight_grid(0.1).size(), 66u);
  EXPECT_EQ(generate_weight_grid(0.2).size(), 21u);
  EXPECT_EQ(generate_weight_grid(1.0).size(), 3u);
  EXPECT_EQ(generate_weight_grid(0.5).size(), 6u);
}

TEST(WeightGrid, AllValidWeightings) {
  for (const auto& w : generate_weight_grid(0.1)) EXPECT_NO_THROW(w.validate());
}

TEST(WeightGrid, RejectsNonIntegerReciprocal) {
  EXPECT_THROW(generate_weight_grid(0.3), std::invalid_argument);
  EXPECT_THROW(generate_weight_grid(0.0), std::invalid_argument);
}

TEST(Dominates, BasicCases) {
  EXPECT_TRUE(dominates(triple(1, 1, 1), triple(2, 2, 2)));
  EXPECT_FALSE(dominates(triple(1, 2, 3), triple(3, 2, 1)));
  EXPECT_FALSE(dominates(triple(1, 2, 3), triple(1, 2, 3)));
  EXPECT_TRUE(dominates(triple(1, 2, 3), triple(1, 2, 4)));
}

TEST(Archive, InsertIntoEmpty) {
  ParetoArchive archive;
  EvaluationRecord rec;
  rec.objectives = triple(1, 1, 1);
  update_pareto_archive(archive, rec);
  EXPECT_EQ(archive.records.size(), 1u);
}

TEST(Archive, DominatedInsertLeavesUnchanged) {
  ParetoArchive archive;
  EvaluationRecord a;
  a.objectives = triple(1, 1, 1);
  update_pareto_archive(archive, a);
  EvaluationRecord b;
  b.objectives = triple(2, 2, 2);
  update_pareto_archive(archive, b);
  EXPECT_EQ(archive.records.size(), 1u);
  EvaluationRecord infeasible;
  infeasible.objectives = triple(0.1, 0.1, 0.1, -1);
  update_pareto_archive(archive, infeasible);
  EXPECT_EQ(archive.records.size(), 1u);
}

TEST(Archive, MatchesBruteForceOnRandomStream) {
  Rng rng(307);
  ParetoArchive archive;
  std::vector<std::array<double, 3>> feasible_points;
  for (int i = 0; i < 200; ++i) {
    EvaluationRecord rec;
    const double a = uniform01(rng), b = uniform01(rng), c = uniform01(rng);
    const int g = uniform01(rng) < 0.7 ? 1 : -1;
    rec.objectives = triple(a, b, c, g);
    update_pareto_archive(archive, rec);
    if (g == 1) feasible_points.push_back({a, b, c});
  }
  auto expected = oracles::brute_force_front(feasible_points);
  ASSERT_EQ(archive.records.size(), expected.size());
  // same multiset of objective triples
  auto got = archive.objectives();
  std::sort(got.begin(), got.end());
  std::sort(expected.begin(), expected.end());
  EXPECT_EQ(got, expected);
}

TEST(LatinHypercube, OnePointPerStratumPerDimension) {
  const auto pts = latin_hypercube(10, 7, 99);
  for (std::size_t d = 0; d < 7; ++d) {
    std::vector<int> counts(10, 0);
    for (const auto& p : pts) {
      const int stratum = std::min(9, static_cast<int>(p[d] * 10.0));
      counts[stratum]++;
    }
    for (int c : counts) EXPECT_EQ(c, 1);
  }
}

TEST(LatinHypercube, DeterministicPerSeed) {
  EXPECT_EQ(latin_hypercube(8, 3, 42), latin_hypercube(8, 3, 42));
  EXPECT_NE(latin_hypercube(8, 3, 42), latin_hypercube(8, 3, 43));
}

TEST(WeightBox, LogRoundTrip) {
  WeightBox box;
  const WeightVector w{0.5, 2.0, 10.0, 0.001, 1000.0, 1.0, 0.02};
  const auto x = box.to_normalized(w);
  for (double c : x) {
    EXPECT_GE(c, 0.0);
    EXPECT_LE(c, 1.0);
  }
  const WeightVector back = box.from_normalized(x);
  const auto wa = w.as_array(), ba = back.as_array();
  for (std::size_t i = 0; i < wa.size(); ++i) EXPECT_NEAR(ba[i], wa[i], 1e-9 * wa[i]);
}

TEST(WeightBox, ContainsChecksBounds) {
  WeightBox box;
  EXPECT_TRUE(box.contains(WeightVector{}));
  WeightVector out;
  out.q_x = 1e4;
  EXPECT_FALSE(box.contains(out));
}

TEST(InitialSampling, IncludePointComesFirst) {
  BoSettings s = fast_settings(1);
  s.include = WeightVector{};
  const auto records = initial_sampling(synthetic_evaluator(), s, 7, "test");
  ASSERT_EQ(records.size(), 2u);
  const auto expected = s.box.to_normalized(*s.include);
  EXPECT_EQ(records.front().normalized, expected);
}

TEST(InitialSampling, DeterministicPerSeed) {
  const BoSettings s = fast_settings(5);
  const auto a = initial_sampling(synthetic_evaluator(), s, 7, "test");
  const auto b = initial_sampling(synthetic_evaluator(), s, 7, "test");
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].normalized, b[i].normalized);
}

TEST(RunWeightedSum, ExactLedgerAccounting) {
  BoSettings s = fast_settings(10);
  WeightingScheme w;
  const auto result = run_weighted_sum(synthetic_evaluator(), {w}, 12, s);
  EXPECT_EQ(result.ledger.size(), 12u);
  for (const auto& rec : result.ledger) {
    EXPECT_EQ(rec.approach, "weighted_sum");
    EXPECT_EQ(rec.weight_index, 0);
  }
}

TEST(RunWeightedSum, IncumbentNonIncreasing) {
  BoSettings s = fast_settings(6);
  WeightingScheme w;
  w.w = {0.3, 0.4, 0.3};
  const auto result = run_weighted_sum(synthetic_evaluator(), {w}, 20, s);
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> incumbents;
  for (const auto& rec : result.ledger) {
    if (rec.feasible()) best = std::min(best, scalarize(*rec.objectives, w));
    incumbents.push_back(best);
  }
  for (std::size_t i = 1; i < incumbents.size(); ++i) EXPECT_LE(incumbents[i], incumbents[i - 1]);
}

TEST(RunWeightedSum, MultipleWeightingsShareLedgerAndArchive) {
  BoSettings s = fast_settings(4);
  auto grid = generate_weight_grid(1.0);  // 3 vertex weightings
  const auto result = run_weighted_sum(synthetic_evaluator(), grid, 7, s);
  EXPECT_EQ(result.ledger.size(), 21u);
  // archive equals the brute-force front of all feasible evaluations
  std::vector<std::array<double, 3>> feasible;
  for (const auto& rec : result.ledger) {
    if (rec.feasible()) feasible.push_back(as_objective3(*rec.objectives));
  }
  auto expected = oracles::brute_force_front(feasible);
  auto got = result.archive.objectives();
  std::sort(got.begin(), got.end());
  std::sort(expected.begin(), expected.end());
  EXPECT_EQ(got, expected);
}

TEST(RunWeightedSum, ParallelWeightingsMatchSequential) {
  BoSettings seq = fast_settings(4);
  auto grid = generate_weight_grid(1.0);
  const auto a = run_weighted_sum(synthetic_evaluator(), grid, 6, seq);
  BoSettings par = seq;
  par.threads = 2;
  const auto b = run_weighted_sum(synthetic_evaluator(), grid, 6, par);
  ASSERT_EQ(a.ledger.size(), b.ledger.size());
  for (std::size_t i = 0; i < a.ledger.size(); ++i) {
    EXPECT_EQ(a.ledger[i].normalized, b.ledger[i].normalized);
    EXPECT_EQ(a.ledger[i].weight_index, b.ledger[i].weight_index);
  }
}

TEST(RunPareto, BudgetEqualToInitYieldsInitialArchive) {
  BoSettings s = fast_settings(8);
  const auto result = run_pareto(synthetic_evaluator(), 8, s);
  EXPECT_EQ(result.ledger.size(), 8u);
  std::vector<std::array<double, 3>> feasible;
  for (const auto& rec : result.ledger) {
    if (rec.feasible()) feasible.push_back(as_objective3(*rec.objectives));
  }
  EXPECT_EQ(result.archive.records.size(), oracles::brute_force_front(feasible).size());
}

TEST(RunPareto, ArchiveHypervolumeNonDecreasing) {
  BoSettings s = fast_settings(6);
  const auto result = run_pareto(synthetic_evaluator(), 24, s);
  EXPECT_EQ(result.ledger.size(), 24u);
  std::vector<Objective3> feasible;
  for (const auto& rec : result.ledger) {
    if (rec.feasible()) feasible.push_back(as_objective3(*rec.objectives));
  }
  ASSERT_GE(feasible.size(), 2u);
  const ReferencePoint ref = reference_point({feasible});
  const auto curve = hypervolume_curve(feasible, ref);
  for (std::size_t i = 1; i < curve.size(); ++i) EXPECT_GE(curve[i], curve[i - 1] - 1e-15);
}

TEST(RunPareto, DeterministicLedgerContent) {
  BoSettings s = fast_settings(5, 11);
  const auto a = run_pareto(synthetic_evaluator(), 14, s);
  const auto b = run_pareto(synthetic_evaluator(), 14, s);
  ASSERT_EQ(a.ledger.size(), b.ledger.size());
  for (std::size_t i = 0; i < a.ledger.size(); ++i) {
    EXPECT_EQ(a.ledger[i].normalized, b.ledger[i].normalized);
    ASSERT_EQ(a.ledger[i].objectives.has_value(), b.ledger[i].objectives.has_value());
    if (a.ledger[i].objectives) {
      EXPECT_EQ(a.ledger[i].objectives->e_lat, b.ledger[i].objectives->e_lat);
      EXPECT_EQ(a.ledger[i].objectives->g, b.ledger[i].objectives->g);
    }
  }
}

TEST(RunPareto, ResumeReplaysDeterministically) {
  BoSettings s = fast_settings(5, 13);
  const auto full = run_pareto(synthetic_evaluator(), 16, s);
  const auto part = run_pareto(synthetic_evaluator(), 10, s);
  const auto resumed = run_pareto(synthetic_evaluator(), 16, s, part.ledger);
  ASSERT_EQ(resumed.ledger.size(), full.ledger.size());
  for (std::size_t i = 0; i < full.ledger.size(); ++i) {
    EXPECT_EQ(resumed.ledger[i].normalized, full.ledger[i].normalized) << "entry " << i;
  }
}

TEST(RunWeightedSum, ResumeReplaysDeterministically) {
  BoSettings s = fast_settings(4, 17);
  auto grid = generate_weight_grid(1.0);
  const auto full = run_weighted_sum(synthetic_evaluator(), grid, 8, s);
  const auto part = run_weighted_sum(synthetic_evaluator(), grid, 5, s);
  const auto resumed = run_weighted_sum(synthetic_evaluator(), grid, 8, s, part.ledger);
  ASSERT_EQ(resumed.ledger.size(), full.ledger.size());
  for (std::size_t i = 0; i < full.ledger.size(); ++i) {
    EXPECT_EQ(resumed.ledger[i].normalized, full.ledger[i].normalized) << "entry " << i;
    EXPECT_EQ(resumed.ledger[i].weight_index, full.ledger[i].weight_index);
  }
}

TEST(Settings, ValidateRejectsBadConfigs) {
  BoSettings s;
  s.n0 = 0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = BoSettings{};
  s.include = WeightVector{};
  s.include->q_x = 1e6;  // outside the box
  EXPECT_THROW(s.validate(), std::invalid_argument);
  WeightingScheme w;
  w.w = {0.5, 0.5, 0.5};
  EXPECT_THROW(w.validate(), std::invalid_argument);
  EXPECT_THROW(run_pareto(synthetic_evaluator(), 2, fast_settings(5)), std::invalid_argument);
}

TEST(Evaluator, FailedEvaluationsRecordedInfeasible) {
  const Evaluator failing = [](const WeightVector&,
                               const std::vector<double>& x) -> std::optional<ObjectiveTriple> {
    if (x[0] < 0.5) return std::nullopt;  // simulated crash-before-logging
    ObjectiveTriple t;
    t.e_lat = x[0];
    t.e_jerk = x[1];
    t.e_v = x[2];
    t.g = -1;
    return t;
  };
  BoSettings s = fast_settings(6);
  const auto result = run_pareto(failing, 10, s);
  EXPECT_EQ(result.ledger.size(), 10u);
  EXPECT_TRUE(result.archive.records.empty());
  for (const auto& rec : result.ledger) EXPECT_FALSE(rec.feasible());
}

}  // namespace
}  // namespace mpfctune
