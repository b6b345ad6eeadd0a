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

#include "mpfctune/gpr.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <cmath>

namespace mpfctune {
namespace {

GprHyperparams hyp1d(double sf2 = 1.0, double l = 1.0, double sn2 = 1e-6, double mu = 0.0) {
  GprHyperparams h;
  h.mean = mu;
  h.signal_var = sf2;
  h.length_scales = {l};
  h.noise_var = sn2;
  return h;
}

Dataset sin_dataset(std::size_t n = 20) {
  Dataset d;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(n - 1);
    d.add({x}, std::sin(x));
  }
  return d;
}

TEST(Matern52, EqualInputsGiveSignalVariance) {
  const auto h = hyp1d(2.5, 0.7);
  EXPECT_DOUBLE_EQ(matern52_ard({0.3}, {0.3}, h), 2.5);
}

// Frozen from an independent high-precision evaluation of the closed form.
TEST(Matern52, UnitDistanceClosedForm) {
  EXPECT_NEAR(matern52_ard({0.0}, {1.0}, hyp1d()), 0.523994108832, 1e-10);
  EXPECT_NEAR(matern52_ard({0.0}, {0.5}, hyp1d(1.0, 0.7)), 0.698002265365, 1e-10);
}

TEST(Matern52, Symmetric) {
  GprHyperparams h;
  h.signal_var = 1.3;
  h.length_scales = {0.4, 1.7, 0.9};
  h.noise_var = 1e-6;
  Rng rng(7);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> a{uniform01(rng), uniform01(rng), uniform01(rng)};
    std::vector<double> b{uniform01(rng), uniform01(rng), uniform01(rng)};
    EXPECT_DOUBLE_EQ(matern52_ard(a, b, h), matern52_ard(b, a, h));
  }
}

TEST(Matern52, DimensionMismatchThrows) {
  EXPECT_THROW(matern52_ard({0.0, 1.0}, {0.0}, hyp1d()), std::invalid_argument);
}

TEST(LogMarginalLikelihood, SinglePointClosedForm) {
  Dataset d;
  d.add({0.5}, 1.7);
  const auto h = hyp1d(2.0, 1.0, 3.0, 1.7);  // mu = target, large noise
  // residual is zero, so lml = log N(0 | 0, sf2 + sn2), var = 5
  EXPECT_NEAR(log_marginal_likelihood(d, h), -1.72365748942, 1e-9);
}

TEST(LogMarginalLikelihood, DuplicateEvidenceSanity) {
  const auto h = hyp1d(1.0, 1.0, 1e-4, 0.4);
  Dataset one;
  one.add({0.3}, 0.4);
  Dataset two;
  two.add({0.3}, 0.4);
  two.add({0.3 + 1e-6}, 0.4);
  const double per_point_one = log_marginal_likelihood(one, h);
  const double per_point_two = log_marginal_likelihood(two, h) / 2.0;
  EXPECT_GE(per_point_two, per_point_one - 1e-9);
}

TEST(LogMarginalLikelihood, PermutationInvariant) {
  GprHyperparams h;
  h.signal_var = 1.2;
  h.length_scales = {0.5, 0.8};
  h.noise_var = 1e-3;
  Dataset d;
  Rng rng(11);
  for (int i = 0; i < 12; ++i) d.add({uniform01(rng), uniform01(rng)}, normal_draw(rng));
  Dataset shuffled = d;
  std::vector<std::size_t> idx(d.size());
  std::iota(idx.begin(), idx.end(), 0u);
  shuffle(idx, rng);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    shuffled.inputs[i] = d.inputs[idx[i]];
    shuffled.targets[i] = d.targets[idx[i]];
  }
  EXPECT_NEAR(log_marginal_likelihood(d, h), log_marginal_likelihood(shuffled, h), 1e-10);
}

TEST(Dataset, RejectsDuplicatesAndRaggedInput) {
  Dataset d;
  d.add({0.1, 0.2}, 1.0);
  d.add({0.1, 0.2}, 2.0);
  EXPECT_THROW(d.validate(), std::invalid_argument);
  Dataset r;
  r.add({0.1, 0.2}, 1.0);
  r.inputs.push_back({0.3});
  r.targets.push_back(0.5);
  EXPECT_THROW(r.validate(), std::invalid_argument);
}

TEST(Fit, InterpolatesNoiseFreeSine) {
  const Dataset d = sin_dataset();
  const GprModel m = GprModel::fit(d);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const Prediction p = m.predict(d.inputs[i]);
    EXPECT_NEAR(p.mean, d.targets[i], 1e-6);
    EXPECT_LT(p.std, 1e-2);
  }
  // midpoints
  for (std::size_t i = 0; i + 1 < d.size(); ++i) {
    const double xm = 0.5 * (d.inputs[i][0] + d.inputs[i + 1][0]);
    EXPECT_NEAR(m.predict({xm}).mean, std::sin(xm), 1e-2);
  }
}

TEST(Fit, ConstantTargetsShrinkSignalVariance) {
  Dataset d;
  for (int i = 0; i < 10; ++i) d.add({0.1 * i}, 3.25);
  const GprModel m = GprModel::fit(d);
  EXPECT_NEAR(m.predict({0.37}).mean, 3.25, 1e-6);
  EXPECT_NEAR(m.predict({5.0}).mean, 3.25, 1e-3);
  EXPECT_LT(m.prior_variance(), 1e-12);  // y_std collapses for constant data
}

TEST(Fit, DeterministicRefit) {
  const Dataset d = sin_dataset(15);
  const GprModel a = GprModel::fit(d);
  const GprModel b = GprModel::fit(d);
  EXPECT_EQ(a.hyperparams().mean, b.hyperparams().mean);
  EXPECT_EQ(a.hyperparams().signal_var, b.hyperparams().signal_var);
  EXPECT_EQ(a.hyperparams().noise_var, b.hyperparams().noise_var);
  ASSERT_EQ(a.hyperparams().length_scales.size(), b.hyperparams().length_scales.size());
  EXPECT_EQ(a.hyperparams().length_scales[0], b.hyperparams().length_scales[0]);
}

TEST(Fit, RequiresTwoPoints) {
  Dataset d;
  d.add({0.0}, 1.0);
  EXPECT_THROW(GprModel::fit(d), std::invalid_argument);
}

TEST(Predict, PriorReversionFarFromData) {
  const Dataset d = sin_dataset();
  const GprModel m = GprModel::fit(d);
  const Prediction p = m.predict({500.0});
  EXPECT_NEAR(p.mean, m.prior_mean(), 0.05);
  EXPECT_NEAR(p.std * p.std, m.prior_variance(), 0.05 * m.prior_variance());
}

TEST(Predict, VarianceNeverExceedsPrior) {
  const Dataset d = sin_dataset();
  const GprModel m = GprModel::fit(d);
  for (double x = -2.0; x < 9.0; x += 0.13) {
    const Prediction p = m.predict({x});
    EXPECT_LE(p.std * p.std, m.prior_variance() + 1e-8);
  }
}

TEST(Fitc, MatchesExactWhenInducingIsTrainingSet) {
  Dataset d;
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const double x = 10.0 * uniform01(rng);
    d.add({x}, std::sin(x) + 0.1 * std::cos(3.0 * x));
  }
  const GprHyperparams hyp = hyp1d(1.0, 1.0, 1e-2);
  const GprModel exact = GprModel::with_hyperparams(d, hyp, GprMode::kExact);
  std::vector<std::size_t> all(d.size());
  std::iota(all.begin(), all.end(), 0u);
  const GprModel fitc = GprModel::with_hyperparams(d, hyp, GprMode::kFitc, all);
  for (double x = 0.0; x <= 10.0; x += 0.37) {
    const Prediction pe = exact.predict({x});
    const Prediction pf = fitc.predict({x});
    EXPECT_NEAR(pe.mean, pf.mean, 1e-6);
    EXPECT_NEAR(pe.std, pf.std, 1e-6);
  }
}

TEST(Fitc, AutoModeSelectsSparseAboveThreshold) {
  Dataset d;
  Rng rng(5);
  for (int i = 0; i < 320; ++i) d.add({uniform01(rng), uniform01(rng)}, normal_draw(rng));
  FitOptions opts;
  opts.restarts = 1;
  opts.max_iters = 10;
  const GprModel m = GprModel::fit(d, opts);
  EXPECT_EQ(m.mode(), GprMode::kFitc);
  EXPECT_EQ(m.inducing_indices().size(), 300u);
  Dataset small;
  for (int i = 0; i < 40; ++i) small.add({uniform01(rng)}, normal_draw(rng));
  EXPECT_EQ(GprModel::fit(small, opts).mode(), GprMode::kExact);
}

// Kernel matrices over random points in the unit box must factor with the
// bounded jitter escalation.
TEST(Invariants, CholeskySucceedsOnRandomUnitBoxData) {
  Rng rng(17);
  for (int trial = 0; trial < 3; ++trial) {
    Dataset d;
    const int n = 100 + 150 * trial;
    for (int i = 0; i < n; ++i) {
      std::vector<double> x(7);
      for (auto& c : x) c = uniform01(rng);
      d.add(std::move(x), normal_draw(rng));
    }
    GprHyperparams h;
    h.signal_var = 1.0;
    h.length_scales.assign(7, 0.3);
    h.noise_var = 1e-8;
    EXPECT_NO_THROW(log_marginal_likelihood(d, h));
  }
}

// Feasibility-style data in {-1, +1}: predictions at unseen points must give
// strictly interior probabilities.
TEST(Invariants, FeasibilityRegressionStaysSmooth) {
  Dataset d;
  Rng rng(23);
  for (int i = 0; i < 60; ++i) {
    std::vector<double> x(7);
    for (auto& c : x) c = uniform01(rng);
    const double g = x[0] + x[1] > 1.0 ? 1.0 : -1.0;
    d.add(std::move(x), g);
  }
  const GprModel m = GprModel::fit(d);
  for (int i = 0; i < 50; ++i) {
    std::vector<double> x(7);
    for (auto& c : x) c = uniform01(rng);
    const Prediction p = m.predict(x);
    const double pr = normal_cdf(p.mean / std::max(p.std, 1e-300));
    EXPECT_GT(pr, 0.0);
    EXPECT_LT(pr, 1.0);
  }
}

// FITC fit+predict time must scale roughly linearly in n for a fixed
// inducing set size.
TEST(Invariants, FitcNearLinearScaling) {
  auto make = [&](int n) {
    Dataset d;
    Rng rng(29);
    for (int i = 0; i < n; ++i) {
      std::vector<double> x(7);
      for (auto& c : x) c = uniform01(rng);
      d.add(std::move(x), std::sin(3.0 * x[0]) + x[1]);
    }
    return d;
  };
  FitOptions opts;
  opts.restarts = 1;
  opts.max_iters = 15;
  auto timed = [&](const Dataset& d) {
    const auto t0 = std::chrono::steady_clock::now();
    const GprModel m = GprModel::fit(d, opts);
    std::vector<double> probe(7, 0.5);
    for (int i = 0; i < 200; ++i) {
      probe[0] = i / 200.0;
      (void)m.predict(probe);
    }
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  const Dataset d400 = make(400);
  const Dataset d800 = make(800);
  (void)timed(d400);  // warm-up
  const double t400 = timed(d400);
  const double t800 = timed(d800);
  EXPECT_LT(t800 / t400, 3.0);
}

}  // namespace
}  // namespace mpfctune
