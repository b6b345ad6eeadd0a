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

#ifndef MPFCTUNE_OPTIMIZER_HPP_
#define MPFCTUNE_OPTIMIZER_HPP_

#include <array>
#include <chrono>
#include <cmath>
#include <functional>
#include <future>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mpfctune/acquisition.hpp"
#include "mpfctune/controller.hpp"
#include "mpfctune/gpr.hpp"
#include "mpfctune/pareto.hpp"
#include "mpfctune/simulation.hpp"

namespace mpfctune {

/// Search box M for the seven weights. The optimizer works in log10
/// coordinates mapped affinely onto [0,1]^7 (weights act multiplicatively).
struct WeightBox {
  std::array<double, WeightVector::kDim> lo;
  std::array<double, WeightVector::kDim> hi;

  WeightBox() {
    lo.fill(1e-3);
    hi.fill(1e3);
  }

  void validate() const {
    for (std::size_t i = 0; i < lo.size(); ++i) {
      if (!(lo[i] > 0.0) || !(hi[i] > lo[i])) {
        throw std::invalid_argument("WeightBox: need 0 < lo < hi");
      }
    }
  }

  bool contains(const WeightVector& w) const {
    const auto a = w.as_array();
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i] < lo[i] || a[i] > hi[i]) return false;
    }
    return true;
  }

  std::vector<double> to_normalized(const WeightVector& w) const {
    const auto a = w.as_array();
    std::vector<double> x(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      x[i] = (std::log10(a[i]) - std::log10(lo[i])) / (std::log10(hi[i]) - std::log10(lo[i]));
    }
    return x;
  }

  WeightVector from_normalized(const std::vector<double>& x) const {
    if (x.size() != WeightVector::kDim) {
      throw std::invalid_argument("WeightBox: normalized point has wrong dimension");
    }
    std::array<double, WeightVector::kDim> a{};
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double lg = std::log10(lo[i]) + x[i] * (std::log10(hi[i]) - std::log10(lo[i]));
      a[i] = std::pow(10.0, lg);
    }
    return WeightVector::from_array(a);
  }
};

/// Convex weighting of the three performance criteria.
struct WeightingScheme {
  std::array<double, 3> w = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};

  void validate() const {
    double sum = 0.0;
    for (double c : w) {
      if (c < 0.0 || c > 1.0) throw std::invalid_argument("WeightingScheme: components in [0,1]");
      sum += c;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw std::invalid_argument("WeightingScheme: components must sum to 1");
    }
  }
};

/// Scalarized objective B = w1 E_jerk + w2 E_v + w3 E_lat.
inline double scalarize(const ObjectiveTriple& e, const WeightingScheme& w) {
  return w.w[0] * e.e_jerk + w.w[1] * e.e_v + w.w[2] * e.e_lat;
}

/// All simplex lattice weightings with components that are multiples of
/// `step` and sum to 1; step=0.1 yields the 66 weightings of a 3-objective
/// grid.
inline std::vector<WeightingScheme> generate_weight_grid(double step) {
  if (!(step > 0.0) || step > 1.0) throw std::invalid_argument("weight grid: step in (0, 1]");
  const double k_real = 1.0 / step;
  const long k = std::lround(k_real);
  if (std::abs(k_real - static_cast<double>(k)) > 1e-9) {
    throw std::invalid_argument("weight grid: 1/step must be an integer");
  }
  std::vector<WeightingScheme> grid;
  for (long i = 0; i <= k; ++i) {
    for (long j = 0; j + i <= k; ++j) {
      WeightingScheme ws;
      ws.w = {static_cast<double>(i) / k, static_cast<double>(j) / k,
              static_cast<double>(k - i - j) / k};
      grid.push_back(ws);
    }
  }
  return grid;
}

/// Strict Pareto dominance for minimization of all three objectives.
inline bool dominates(const ObjectiveTriple& a, const ObjectiveTriple& b) {
  bool strict = false;
  if (a.e_lat > b.e_lat || a.e_jerk > b.e_jerk || a.e_v > b.e_v) return false;
  strict = a.e_lat < b.e_lat || a.e_jerk < b.e_jerk || a.e_v < b.e_v;
  return strict;
}

inline Objective3 as_objective3(const ObjectiveTriple& e) { return {e.e_lat, e.e_jerk, e.e_v}; }

/// Hyperparameters of one surrogate fitted during an iteration, kept in
/// the ledger for post-hoc inspection.
struct SurrogateInfo {
  std::string response;  // "B", "g", "E_lat", "E_jerk", "E_v"
  GprHyperparams hyp;
  bool sparse = false;
  bool fallback = false;
};

/// One evaluated parametrization, as stored in the ledger.
struct EvaluationRecord {
  WeightVector weights;
  std::vector<double> normalized;
  std::optional<ObjectiveTriple> objectives;  // absent if the lap produced no samples
  double eval_seconds = 0.0;
  double overhead_seconds = 0.0;  // surrogate fitting + acquisition time
  int iteration = 0;              // index within its BO instance
  std::string approach;
  int weight_index = -1;                      // weighted-sum only
  std::optional<WeightingScheme> weighting;   // weighted-sum only
  std::vector<SurrogateInfo> surrogates;      // models behind this proposal

  bool feasible() const { return objectives.has_value() && objectives->g == 1; }
};

/// Feasible, mutually nondominated evaluations.
struct ParetoArchive {
  std::vector<EvaluationRecord> records;

  std::vector<Objective3> objectives() const {
    std::vector<Objective3> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(as_objective3(*r.objectives));
    return out;
  }
};

/// Inserts a record: infeasible records leave the archive unchanged;
/// otherwise dominated members are removed and the record is added unless
/// it is itself dominated.
inline void update_pareto_archive(ParetoArchive& archive, const EvaluationRecord& rec) {
  if (!rec.feasible()) return;
  for (const auto& kept : archive.records) {
    if (dominates(*kept.objectives, *rec.objectives)) return;
  }
  std::erase_if(archive.records, [&](const EvaluationRecord& kept) {
    return dominates(*rec.objectives, *kept.objectives);
  });
  archive.records.push_back(rec);
}

/// Black-box response of one closed-loop evaluation.
using Evaluator =
    std::function<std::optional<ObjectiveTriple>(const WeightVector&, const std::vector<double>&)>;

/// Evaluator backed by the closed-loop simulation: one lap per query.
inline Evaluator make_lap_evaluator(const TrackSpec& track, const ControllerConfig& base,
                                    const VehicleParams& plant, const SimOptions& opts,
                                    double start_speed = -1.0) {
  return [&track, base, plant, opts, start_speed](
             const WeightVector& w, const std::vector<double>&) -> std::optional<ObjectiveTriple> {
    ControllerConfig cfg = base;
    cfg.weights = w;
    const double v0 = start_speed >= 0.0 ? start_speed : track.speed_limit(0.0);
    const SimulationLog log = run_lap(track, cfg, plant, initial_state(track, plant, v0), opts);
    if (log.records.empty()) return std::nullopt;
    return evaluate_log(log, track);
  };
}

struct BoSettings {
  WeightBox box;
  int n0 = 10;                      // Latin-hypercube initial sample size
  std::uint64_t seed = 1;
  std::size_t acquisition_budget = 10000;  // random-search points per iteration
  std::optional<WeightVector> include;     // hand-tuned point prepended to the init
  FitOptions fit;                          // surrogate fitting budget
  int threads = 1;                         // parallel weighting instances (approach 1)
  double log_fit_decades = 3.0;            // fit log10(B) when B spans more decades

  void validate() const {
    box.validate();
    if (n0 < 1) throw std::invalid_argument("BoSettings: n0 >= 1 required");
    if (acquisition_budget < 1) throw std::invalid_argument("BoSettings: empty acquisition budget");
    if (threads < 1) throw std::invalid_argument("BoSettings: threads >= 1 required");
    if (include && !box.contains(*include)) {
      throw std::invalid_argument("BoSettings: include point outside the weight box");
    }
  }
};

struct BoResult {
  std::vector<EvaluationRecord> ledger;
  ParetoArchive archive;
};

namespace detail {

class StopWatch {
 public:
  StopWatch() : t0_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_;
};

inline EvaluationRecord evaluate_point(const Evaluator& evaluate, const WeightBox& box,
                                       const std::vector<double>& x, int iteration,
                                       const std::string& approach) {
  EvaluationRecord rec;
  rec.normalized = x;
  rec.weights = box.from_normalized(x);
  rec.iteration = iteration;
  rec.approach = approach;
  const StopWatch watch;
  rec.objectives = evaluate(rec.weights, x);
  rec.eval_seconds = watch.seconds();
  if (rec.objectives && rec.objectives->g != 1) rec.objectives->g = -1;
  return rec;
}

/// The LHS init points of one BO instance (hand-tuned point first if given).
inline std::vector<std::vector<double>> initial_points(const BoSettings& settings,
                                                       std::uint64_t instance_seed) {
  std::vector<std::vector<double>> points;
  if (settings.include) points.push_back(settings.box.to_normalized(*settings.include));
  const auto lhs =
      latin_hypercube(static_cast<std::size_t>(settings.n0), WeightVector::kDim,
                      mix_seed(instance_seed, 0xa11ce));
  points.insert(points.end(), lhs.begin(), lhs.end());
  return points;
}

/// True if `x` duplicates any already-evaluated input.
inline bool is_duplicate(const std::vector<EvaluationRecord>& records,
                         const std::vector<double>& x) {
  for (const auto& r : records) {
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) d = std::max(d, std::abs(r.normalized[i] - x[i]));
    if (d <= 1e-12) return true;
  }
  return false;
}

}  // namespace detail

/// Latin-hypercube initialization evaluated through the black box
/// (Algorithm step 1). Exposed for tests; the run_* drivers call it.
inline std::vector<EvaluationRecord> initial_sampling(const Evaluator& evaluate,
                                                      const BoSettings& settings,
                                                      std::uint64_t instance_seed,
                                                      const std::string& approach) {
  settings.validate();
  std::vector<EvaluationRecord> records;
  int iteration = 0;
  for (const auto& x : detail::initial_points(settings, instance_seed)) {
    records.push_back(detail::evaluate_point(evaluate, settings.box, x, iteration++, approach));
  }
  return records;
}

namespace detail {

struct SingleObjectiveState {
  std::optional<double> best;  // incumbent in fit space
  bool log_space = false;
};

struct Proposal {
  std::vector<double> point;
  double overhead_seconds = 0.0;
  std::vector<SurrogateInfo> surrogates;
};

inline SurrogateInfo describe(const GprModel& model, const std::string& response) {
  return {response, model.hyperparams(), model.mode() == GprMode::kFitc, model.used_fallback()};
}

/// One EIC-driven iteration of a single-objective instance: fits the B and
/// g surrogates from the records, maximizes the acquisition, and returns the
/// chosen normalized point plus the fitting/acquisition overhead.
inline Proposal propose_eic(
    const std::vector<EvaluationRecord>& records, const WeightingScheme& weighting,
    const BoSettings& settings, std::uint64_t instance_seed, int iteration) {
  const StopWatch watch;
  Dataset b_data, g_data;
  for (const auto& r : records) {
    if (!r.objectives) continue;
    if (g_data.contains(r.normalized)) continue;
    g_data.add(r.normalized, r.objectives->g > 0 ? 1.0 : -1.0);
    if (r.feasible()) b_data.add(r.normalized, scalarize(*r.objectives, weighting));
  }

  SingleObjectiveState state;
  if (!b_data.targets.empty()) {
    double lo = b_data.targets.front(), hi = lo;
    for (double v : b_data.targets) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    state.log_space = lo > 0.0 && hi / lo > std::pow(10.0, settings.log_fit_decades);
    if (state.log_space) {
      for (double& v : b_data.targets) v = std::log10(v);
      state.best = std::log10(lo);
    } else {
      state.best = lo;
    }
  }

  std::optional<GprModel> b_model, g_model;
  FitOptions fit = settings.fit;
  fit.seed = mix_seed(instance_seed, 0xf17 + static_cast<std::uint64_t>(iteration));
  if (b_data.size() >= 2) b_model = GprModel::fit(b_data, fit);
  if (g_data.size() >= 2) g_model = GprModel::fit(g_data, fit);

  const std::uint64_t acq_seed = mix_seed(instance_seed, 0xacc + static_cast<std::uint64_t>(iteration));
  Proposal proposal;
  if (!g_model) {
    // not enough data for any surrogate: explore uniformly
    Rng rng(acq_seed);
    proposal.point.resize(WeightVector::kDim);
    for (auto& c : proposal.point) c = uniform01(rng);
  } else {
    const auto score = [&](const std::vector<double>& cand) {
      const Prediction pg = g_model->predict(cand);
      if (!b_model || !state.best) return eic(Prediction{}, std::nullopt, pg);
      return eic(b_model->predict(cand), state.best, pg);
    };
    proposal.point =
        maximize_acquisition(score, WeightVector::kDim, settings.acquisition_budget, acq_seed);
  }
  if (is_duplicate(records, proposal.point)) {
    Rng rng(mix_seed(instance_seed, 0xd0b + static_cast<std::uint64_t>(iteration)));
    for (auto& c : proposal.point) c = uniform01(rng);
  }
  if (b_model) proposal.surrogates.push_back(describe(*b_model, "B"));
  if (g_model) proposal.surrogates.push_back(describe(*g_model, "g"));
  proposal.overhead_seconds = watch.seconds();
  return proposal;
}

/// One CEIM-driven iteration of the Pareto instance.
inline Proposal propose_ceim(
    const std::vector<EvaluationRecord>& records, const BoSettings& settings,
    std::uint64_t instance_seed, int iteration) {
  const StopWatch watch;
  std::array<Dataset, 3> obj_data;
  Dataset g_data;
  std::vector<Objective3> feasible_points;
  for (const auto& r : records) {
    if (!r.objectives) continue;
    if (g_data.contains(r.normalized)) continue;
    g_data.add(r.normalized, r.objectives->g > 0 ? 1.0 : -1.0);
    if (r.feasible()) {
      obj_data[0].add(r.normalized, r.objectives->e_lat);
      obj_data[1].add(r.normalized, r.objectives->e_jerk);
      obj_data[2].add(r.normalized, r.objectives->e_v);
      feasible_points.push_back(as_objective3(*r.objectives));
    }
  }

  FitOptions fit = settings.fit;
  fit.seed = mix_seed(instance_seed, 0xf17 + static_cast<std::uint64_t>(iteration));
  std::optional<GprModel> g_model;
  if (g_data.size() >= 2) g_model = GprModel::fit(g_data, fit);

  std::array<std::optional<GprModel>, 3> obj_models;
  const bool objectives_ready = obj_data[0].size() >= 2;
  if (objectives_ready) {
    for (int i = 0; i < 3; ++i) obj_models[i] = GprModel::fit(obj_data[i], fit);
  }

  // objectives are compared in Euclidean norm, so scale each by its
  // currently observed feasible range
  Objective3 scale = {1.0, 1.0, 1.0};
  if (!feasible_points.empty()) {
    Objective3 lo = feasible_points.front(), hi = feasible_points.front();
    for (const auto& p : feasible_points) {
      for (int i = 0; i < 3; ++i) {
        lo[i] = std::min(lo[i], p[i]);
        hi[i] = std::max(hi[i], p[i]);
      }
    }
    for (int i = 0; i < 3; ++i) scale[i] = std::max(hi[i] - lo[i], 1e-12);
  }
  ParetoFrontObjectives front;
  {
    std::vector<Objective3> scaled = feasible_points;
    for (auto& p : scaled) {
      for (int i = 0; i < 3; ++i) p[i] /= scale[i];
    }
    front = ParetoFrontObjectives::from_points(scaled);
  }

  const std::uint64_t acq_seed = mix_seed(instance_seed, 0xacc + static_cast<std::uint64_t>(iteration));
  Proposal proposal;
  if (!g_model) {
    Rng rng(acq_seed);
    proposal.point.resize(WeightVector::kDim);
    for (auto& c : proposal.point) c = uniform01(rng);
  } else if (!objectives_ready || front.points.empty()) {
    const auto score = [&](const std::vector<double>& cand) {
      return probability_of_feasibility(g_model->predict(cand), 0.0);
    };
    proposal.point =
        maximize_acquisition(score, WeightVector::kDim, settings.acquisition_budget, acq_seed);
  } else {
    const auto score = [&](const std::vector<double>& cand) {
      std::array<Prediction, 3> preds;
      for (int i = 0; i < 3; ++i) {
        preds[i] = obj_models[i]->predict(cand);
        preds[i].mean /= scale[i];
        preds[i].std /= scale[i];
      }
      return ceim(preds, front, g_model->predict(cand));
    };
    proposal.point =
        maximize_acquisition(score, WeightVector::kDim, settings.acquisition_budget, acq_seed);
  }
  if (is_duplicate(records, proposal.point)) {
    Rng rng(mix_seed(instance_seed, 0xd0b + static_cast<std::uint64_t>(iteration)));
    for (auto& c : proposal.point) c = uniform01(rng);
  }
  if (objectives_ready) {
    proposal.surrogates.push_back(describe(*obj_models[0], "E_lat"));
    proposal.surrogates.push_back(describe(*obj_models[1], "E_jerk"));
    proposal.surrogates.push_back(describe(*obj_models[2], "E_v"));
  }
  if (g_model) proposal.surrogates.push_back(describe(*g_model, "g"));
  proposal.overhead_seconds = watch.seconds();
  return proposal;
}

/// Runs (or resumes) one weighted-sum BO instance to its budget.
inline std::vector<EvaluationRecord> run_single_weighting(
    const Evaluator& evaluate, const WeightingScheme& weighting, int weight_index,
    int budget, const BoSettings& settings, std::vector<EvaluationRecord> existing) {
  const std::uint64_t instance_seed =
      mix_seed(settings.seed, 0x3e1 + static_cast<std::uint64_t>(weight_index));
  std::vector<EvaluationRecord> records = std::move(existing);
  const auto init = detail::initial_points(settings, instance_seed);
  while (records.size() < init.size() && static_cast<int>(records.size()) < budget) {
    const int it = static_cast<int>(records.size());
    auto rec = evaluate_point(evaluate, settings.box, init[it], it, "weighted_sum");
    rec.weight_index = weight_index;
    rec.weighting = weighting;
    records.push_back(std::move(rec));
  }
  while (static_cast<int>(records.size()) < budget) {
    const int it = static_cast<int>(records.size());
    auto proposal = propose_eic(records, weighting, settings, instance_seed, it);
    auto rec = evaluate_point(evaluate, settings.box, proposal.point, it, "weighted_sum");
    rec.weight_index = weight_index;
    rec.weighting = weighting;
    rec.overhead_seconds = proposal.overhead_seconds;
    rec.surrogates = std::move(proposal.surrogates);
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace detail

/// Approach 1: one independent single-objective EIC instance per weighting,
/// fully reset in between; every evaluation lands in one global ledger and
/// Pareto archive. `resume` may hold the ledger of an interrupted run with
/// identical configuration.
inline BoResult run_weighted_sum(const Evaluator& evaluate,
                                 const std::vector<WeightingScheme>& weightings,
                                 int budget_per_weight, const BoSettings& settings,
                                 const std::vector<EvaluationRecord>& resume = {}) {
  settings.validate();
  for (const auto& w : weightings) w.validate();
  if (budget_per_weight < settings.n0) {
    throw std::invalid_argument("run_weighted_sum: budget below the initial sample size");
  }

  std::vector<std::vector<EvaluationRecord>> existing(weightings.size());
  for (const auto& rec : resume) {
    if (rec.weight_index >= 0 && rec.weight_index < static_cast<int>(weightings.size())) {
      existing[rec.weight_index].push_back(rec);
    }
  }

  std::vector<std::vector<EvaluationRecord>> per_weighting(weightings.size());
  const int workers = std::min<int>(settings.threads, static_cast<int>(weightings.size()));
  if (workers <= 1) {
    for (std::size_t wi = 0; wi < weightings.size(); ++wi) {
      per_weighting[wi] =
          detail::run_single_weighting(evaluate, weightings[wi], static_cast<int>(wi),
                                       budget_per_weight, settings, std::move(existing[wi]));
    }
  } else {
    std::vector<std::future<std::vector<EvaluationRecord>>> futures;
    futures.reserve(weightings.size());
    for (std::size_t wi = 0; wi < weightings.size(); ++wi) {
      futures.push_back(std::async(std::launch::async, [&, wi] {
        return detail::run_single_weighting(evaluate, weightings[wi], static_cast<int>(wi),
                                            budget_per_weight, settings,
                                            std::move(existing[wi]));
      }));
    }
    for (std::size_t wi = 0; wi < weightings.size(); ++wi) per_weighting[wi] = futures[wi].get();
  }

  BoResult result;
  for (auto& records : per_weighting) {
    for (auto& rec : records) {
      update_pareto_archive(result.archive, rec);
      result.ledger.push_back(std::move(rec));
    }
  }
  return result;
}

/// Approach 2: a single BO instance over all three objectives with four
/// GPR surrogates and the CEIM acquisition.
inline BoResult run_pareto(const Evaluator& evaluate, int budget, const BoSettings& settings,
                           const std::vector<EvaluationRecord>& resume = {}) {
  settings.validate();
  if (budget < settings.n0) {
    throw std::invalid_argument("run_pareto: budget below the initial sample size");
  }
  const std::uint64_t instance_seed = mix_seed(settings.seed, 0x9a6e70);

  BoResult result;
  result.ledger = resume;
  const auto init = detail::initial_points(settings, instance_seed);
  while (result.ledger.size() < init.size() && static_cast<int>(result.ledger.size()) < budget) {
    const int it = static_cast<int>(result.ledger.size());
    result.ledger.push_back(
        detail::evaluate_point(evaluate, settings.box, init[it], it, "pareto"));
  }
  while (static_cast<int>(result.ledger.size()) < budget) {
    const int it = static_cast<int>(result.ledger.size());
    auto proposal = detail::propose_ceim(result.ledger, settings, instance_seed, it);
    auto rec = detail::evaluate_point(evaluate, settings.box, proposal.point, it, "pareto");
    rec.overhead_seconds = proposal.overhead_seconds;
    rec.surrogates = std::move(proposal.surrogates);
    result.ledger.push_back(std::move(rec));
  }
  for (const auto& rec : result.ledger) update_pareto_archive(result.archive, rec);
  return result;
}

}  // namespace mpfctune

#endif  // MPFCTUNE_OPTIMIZER_HPP_
