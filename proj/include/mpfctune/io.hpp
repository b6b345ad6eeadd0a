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

#ifndef MPFCTUNE_IO_HPP_
#define MPFCTUNE_IO_HPP_

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mpfctune/optimizer.hpp"

namespace mpfctune {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// JSON mapping. Loaders update defaults in place, so partial configs are
// valid and every omitted key keeps its documented default.
// ---------------------------------------------------------------------------

inline Json to_json(const WeightVector& w) {
  Json j;
  const auto a = w.as_array();
  for (std::size_t i = 0; i < a.size(); ++i) j[WeightVector::names()[i]] = a[i];
  return j;
}

inline void load(const Json& j, WeightVector& w) {
  auto a = w.as_array();
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = j.value(WeightVector::names()[i], a[i]);
  w = WeightVector::from_array(a);
}

inline Json to_json(const Interval& iv) { return Json::array({iv.lo, iv.hi}); }

inline void load(const Json& j, Interval& iv) {
  if (!j.is_array() || j.size() != 2) throw std::runtime_error("config: interval must be [lo, hi]");
  iv.lo = j[0].get<double>();
  iv.hi = j[1].get<double>();
}

inline Json to_json(const VehicleParams& p) {
  Json j;
  j["mass"] = p.mass;
  j["inertia_z"] = p.inertia_z;
  j["l_f"] = p.l_f;
  j["l_r"] = p.l_r;
  j["c_f"] = p.c_f;
  j["c_r"] = p.c_r;
  j["steering_ratio"] = p.steering_ratio;
  j["tau_v"] = p.tau_v;
  j["tau_delta"] = p.tau_delta;
  j["v_kinematic"] = p.v_kinematic;
  j["tau_kinematic"] = p.tau_kinematic;
  j["input_bounds"]["a_ref"] = to_json(p.input_bounds.a_ref);
  j["input_bounds"]["omega_s_ref"] = to_json(p.input_bounds.omega_s_ref);
  j["state_bounds"]["psi_dot"] = to_json(p.state_bounds.psi_dot);
  j["state_bounds"]["beta"] = to_json(p.state_bounds.beta);
  j["state_bounds"]["v"] = to_json(p.state_bounds.v);
  j["state_bounds"]["v_ref"] = to_json(p.state_bounds.v_ref);
  j["state_bounds"]["delta_s"] = to_json(p.state_bounds.delta_s);
  j["state_bounds"]["delta_s_ref"] = to_json(p.state_bounds.delta_s_ref);
  return j;
}

inline void load(const Json& j, VehicleParams& p) {
  p.mass = j.value("mass", p.mass);
  p.inertia_z = j.value("inertia_z", p.inertia_z);
  p.l_f = j.value("l_f", p.l_f);
  p.l_r = j.value("l_r", p.l_r);
  p.c_f = j.value("c_f", p.c_f);
  p.c_r = j.value("c_r", p.c_r);
  p.steering_ratio = j.value("steering_ratio", p.steering_ratio);
  p.tau_v = j.value("tau_v", p.tau_v);
  p.tau_delta = j.value("tau_delta", p.tau_delta);
  p.v_kinematic = j.value("v_kinematic", p.v_kinematic);
  p.tau_kinematic = j.value("tau_kinematic", p.tau_kinematic);
  if (j.contains("input_bounds")) {
    const Json& b = j["input_bounds"];
    if (b.contains("a_ref")) load(b["a_ref"], p.input_bounds.a_ref);
    if (b.contains("omega_s_ref")) load(b["omega_s_ref"], p.input_bounds.omega_s_ref);
  }
  if (j.contains("state_bounds")) {
    const Json& b = j["state_bounds"];
    if (b.contains("psi_dot")) load(b["psi_dot"], p.state_bounds.psi_dot);
    if (b.contains("beta")) load(b["beta"], p.state_bounds.beta);
    if (b.contains("v")) load(b["v"], p.state_bounds.v);
    if (b.contains("v_ref")) load(b["v_ref"], p.state_bounds.v_ref);
    if (b.contains("delta_s")) load(b["delta_s"], p.state_bounds.delta_s);
    if (b.contains("delta_s_ref")) load(b["delta_s_ref"], p.state_bounds.delta_s_ref);
  }
}

inline Json to_json(const ControllerConfig& c) {
  Json j;
  j["horizon"] = c.horizon;
  j["sampling"] = c.sampling;
  j["intervals"] = c.intervals;
  j["weights"] = to_json(c.weights);
  j["constraints"]["a_x"] = to_json(c.constraints.a_x);
  j["constraints"]["a_lat_max"] = c.constraints.a_lat_max;
  j["vartheta_max"] = c.vartheta_max;
  j["penalty_weight"] = c.penalty_weight;
  j["lane_margin"] = c.lane_margin;
  j["envelope_decel"] = c.envelope_decel;
  j["envelope_accel"] = c.envelope_accel;
  j["envelope_lat_fraction"] = c.envelope_lat_fraction;
  j["iteration_cap"] = c.iteration_cap;
  j["tolerance"] = c.tolerance;
  j["prediction_substeps"] = c.prediction_substeps;
  return j;
}

inline void load(const Json& j, ControllerConfig& c) {
  c.horizon = j.value("horizon", c.horizon);
  c.sampling = j.value("sampling", c.sampling);
  c.intervals = j.value("intervals", c.intervals);
  if (j.contains("weights")) load(j["weights"], c.weights);
  if (j.contains("constraints")) {
    const Json& b = j["constraints"];
    if (b.contains("a_x")) load(b["a_x"], c.constraints.a_x);
    c.constraints.a_lat_max = b.value("a_lat_max", c.constraints.a_lat_max);
  }
  c.vartheta_max = j.value("vartheta_max", c.vartheta_max);
  c.penalty_weight = j.value("penalty_weight", c.penalty_weight);
  c.lane_margin = j.value("lane_margin", c.lane_margin);
  c.envelope_decel = j.value("envelope_decel", c.envelope_decel);
  c.envelope_accel = j.value("envelope_accel", c.envelope_accel);
  c.envelope_lat_fraction = j.value("envelope_lat_fraction", c.envelope_lat_fraction);
  c.iteration_cap = j.value("iteration_cap", c.iteration_cap);
  c.tolerance = j.value("tolerance", c.tolerance);
  c.prediction_substeps = j.value("prediction_substeps", c.prediction_substeps);
}

inline Json to_json(const ObjectiveTriple& t) {
  return Json{{"E_lat", t.e_lat}, {"E_jerk", t.e_jerk}, {"E_v", t.e_v}, {"g", t.g}};
}

inline ObjectiveTriple objective_from_json(const Json& j) {
  ObjectiveTriple t;
  t.e_lat = j.at("E_lat").get<double>();
  t.e_jerk = j.at("E_jerk").get<double>();
  t.e_v = j.at("E_v").get<double>();
  t.g = j.at("g").get<int>();
  return t;
}

/// Run-wide configuration: everything a command needs, with explicit seeds.
struct OptimizerSettings {
  std::string approach = "pareto";  // or "weighted_sum"
  int budget = 60;                  // pareto total evaluations
  int budget_per_weight = 30;       // weighted-sum evaluations per weighting
  double grid_step = 1.0;           // simplex lattice step for the weight grid
  int n0 = 10;
  std::uint64_t seed = 1;
  std::size_t acquisition_budget = 10000;
  int threads = 1;
  bool include_expert = true;  // prepend the configured controller weights
};

struct RunConfig {
  std::string output_dir = "out";
  std::string track = "default-loop";  // "default-loop", "test-loop", or a file path
  ControllerConfig controller;         // includes the vehicle (plant = prediction model)
  SimOptions sim;
  double start_speed = -1.0;  // < 0: speed limit at s = 0
  WeightBox box;
  OptimizerSettings optimizer;

  void validate() const {
    controller.validate();
    box.validate();
    if (optimizer.approach != "pareto" && optimizer.approach != "weighted_sum") {
      throw std::runtime_error("config: approach must be 'pareto' or 'weighted_sum'");
    }
    if (optimizer.n0 < 1 || optimizer.budget < 1 || optimizer.budget_per_weight < 1) {
      throw std::runtime_error("config: budgets and n0 must be positive");
    }
  }
};

inline Json to_json(const RunConfig& c) {
  Json j;
  j["output_dir"] = c.output_dir;
  j["track"] = c.track;
  j["vehicle"] = to_json(c.controller.vehicle);
  j["controller"] = to_json(c.controller);
  j["simulation"] = {{"substep", c.sim.substep},
                     {"budget_factor", c.sim.budget_factor},
                     {"start_speed", c.start_speed}};
  j["weight_box"] = {{"lo", c.box.lo}, {"hi", c.box.hi}};
  j["optimizer"] = {{"approach", c.optimizer.approach},
                    {"budget", c.optimizer.budget},
                    {"budget_per_weight", c.optimizer.budget_per_weight},
                    {"grid_step", c.optimizer.grid_step},
                    {"n0", c.optimizer.n0},
                    {"seed", c.optimizer.seed},
                    {"acquisition_budget", c.optimizer.acquisition_budget},
                    {"threads", c.optimizer.threads},
                    {"include_expert", c.optimizer.include_expert}};
  return j;
}

inline RunConfig config_from_json(const Json& j) {
  RunConfig c;
  c.output_dir = j.value("output_dir", c.output_dir);
  c.track = j.value("track", c.track);
  if (j.contains("vehicle")) load(j["vehicle"], c.controller.vehicle);
  if (j.contains("controller")) load(j["controller"], c.controller);
  if (j.contains("simulation")) {
    const Json& s = j["simulation"];
    c.sim.substep = s.value("substep", c.sim.substep);
    c.sim.budget_factor = s.value("budget_factor", c.sim.budget_factor);
    c.start_speed = s.value("start_speed", c.start_speed);
  }
  if (j.contains("weight_box")) {
    const Json& b = j["weight_box"];
    if (b.contains("lo")) {
      const auto lo = b["lo"].get<std::vector<double>>();
      if (lo.size() != c.box.lo.size()) throw std::runtime_error("config: weight_box.lo needs 7 entries");
      std::copy(lo.begin(), lo.end(), c.box.lo.begin());
    }
    if (b.contains("hi")) {
      const auto hi = b["hi"].get<std::vector<double>>();
      if (hi.size() != c.box.hi.size()) throw std::runtime_error("config: weight_box.hi needs 7 entries");
      std::copy(hi.begin(), hi.end(), c.box.hi.begin());
    }
  }
  if (j.contains("optimizer")) {
    const Json& o = j["optimizer"];
    c.optimizer.approach = o.value("approach", c.optimizer.approach);
    c.optimizer.budget = o.value("budget", c.optimizer.budget);
    c.optimizer.budget_per_weight = o.value("budget_per_weight", c.optimizer.budget_per_weight);
    c.optimizer.grid_step = o.value("grid_step", c.optimizer.grid_step);
    c.optimizer.n0 = o.value("n0", c.optimizer.n0);
    c.optimizer.seed = o.value("seed", c.optimizer.seed);
    c.optimizer.acquisition_budget = o.value("acquisition_budget", c.optimizer.acquisition_budget);
    c.optimizer.threads = o.value("threads", c.optimizer.threads);
    c.optimizer.include_expert = o.value("include_expert", c.optimizer.include_expert);
  }
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  Json j;
  try {
    in >> j;
  } catch (const Json::parse_error& e) {
    throw std::runtime_error("config: parse error in " + path + ": " + e.what());
  }
  return config_from_json(j);
}

inline TrackSpec resolve_track(const RunConfig& cfg) {
  if (cfg.track == "default-loop") return build_default_loop();
  if (cfg.track == "test-loop") return build_test_loop();
  return load_track(cfg.track);
}

// ---------------------------------------------------------------------------
// Evaluation ledger (JSON lines) and Pareto archive (JSON + CSV).
// ---------------------------------------------------------------------------

inline Json to_json(const EvaluationRecord& rec) {
  Json j;
  j["iteration"] = rec.iteration;
  j["approach"] = rec.approach;
  j["m"] = to_json(rec.weights);
  j["m_norm"] = rec.normalized;
  if (rec.objectives) {
    j["objectives"] = to_json(*rec.objectives);
  } else {
    j["objectives"] = nullptr;
  }
  j["eval_seconds"] = rec.eval_seconds;
  j["overhead_seconds"] = rec.overhead_seconds;
  if (rec.weight_index >= 0) {
    j["weight_index"] = rec.weight_index;
    j["weighting"] = rec.weighting->w;
  }
  if (!rec.surrogates.empty()) {
    Json arr = Json::array();
    for (const auto& s : rec.surrogates) {
      arr.push_back({{"response", s.response},
                     {"mean", s.hyp.mean},
                     {"signal_var", s.hyp.signal_var},
                     {"length_scales", s.hyp.length_scales},
                     {"noise_var", s.hyp.noise_var},
                     {"sparse", s.sparse},
                     {"fallback", s.fallback}});
    }
    j["surrogates"] = std::move(arr);
  }
  return j;
}

inline EvaluationRecord record_from_json(const Json& j) {
  EvaluationRecord rec;
  rec.iteration = j.at("iteration").get<int>();
  rec.approach = j.at("approach").get<std::string>();
  load(j.at("m"), rec.weights);
  rec.normalized = j.at("m_norm").get<std::vector<double>>();
  if (j.contains("objectives") && !j["objectives"].is_null()) {
    rec.objectives = objective_from_json(j["objectives"]);
  }
  rec.eval_seconds = j.value("eval_seconds", 0.0);
  rec.overhead_seconds = j.value("overhead_seconds", 0.0);
  if (j.contains("weight_index")) {
    rec.weight_index = j["weight_index"].get<int>();
    WeightingScheme w;
    const auto arr = j.at("weighting").get<std::vector<double>>();
    if (arr.size() != 3) throw std::runtime_error("ledger: weighting needs 3 entries");
    std::copy(arr.begin(), arr.end(), w.w.begin());
    rec.weighting = w;
  }
  if (j.contains("surrogates")) {
    for (const auto& sj : j["surrogates"]) {
      SurrogateInfo s;
      s.response = sj.at("response").get<std::string>();
      s.hyp.mean = sj.at("mean").get<double>();
      s.hyp.signal_var = sj.at("signal_var").get<double>();
      s.hyp.length_scales = sj.at("length_scales").get<std::vector<double>>();
      s.hyp.noise_var = sj.at("noise_var").get<double>();
      s.sparse = sj.value("sparse", false);
      s.fallback = sj.value("fallback", false);
      rec.surrogates.push_back(std::move(s));
    }
  }
  return rec;
}

inline void write_ledger(const std::vector<EvaluationRecord>& records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("ledger: cannot write " + path);
  for (const auto& rec : records) out << to_json(rec).dump() << "\n";
}

inline std::vector<EvaluationRecord> read_ledger(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("ledger: cannot open " + path);
  std::vector<EvaluationRecord> records;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      records.push_back(record_from_json(Json::parse(line)));
    } catch (const Json::exception& e) {
      throw std::runtime_error("ledger: bad record on line " + std::to_string(lineno) + ": " +
                               e.what());
    }
  }
  return records;
}

inline void write_archive_json(const ParetoArchive& archive, const std::string& path) {
  Json j;
  j["kind"] = "pareto_archive";
  j["records"] = Json::array();
  for (const auto& rec : archive.records) j["records"].push_back(to_json(rec));
  std::ofstream out(path);
  if (!out) throw std::runtime_error("archive: cannot write " + path);
  out << j.dump(2) << "\n";
}

inline ParetoArchive read_archive_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("archive: cannot open " + path);
  Json j;
  try {
    in >> j;
  } catch (const Json::parse_error& e) {
    throw std::runtime_error("archive: parse error in " + path + ": " + e.what());
  }
  if (j.value("kind", "") != "pareto_archive" || !j.contains("records")) {
    throw std::runtime_error("archive: " + path + " is not a pareto archive file");
  }
  ParetoArchive archive;
  for (const auto& rj : j["records"]) archive.records.push_back(record_from_json(rj));
  for (const auto& rec : archive.records) {
    if (!rec.feasible()) throw std::runtime_error("archive: infeasible record in " + path);
  }
  return archive;
}

inline const char* archive_csv_header() {
  return "e_lat,e_jerk,e_v,g,q_x,q_y,q_psi,q_a,r_a,r_omega,r_vartheta,iteration,weight_index,"
         "w1,w2,w3";
}

inline void write_archive_csv(const ParetoArchive& archive, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("archive: cannot write " + path);
  out << archive_csv_header() << "\n";
  char buf[64];
  auto put = [&](double v, char sep) {
    std::snprintf(buf, sizeof(buf), "%.17g%c", v, sep);
    out << buf;
  };
  for (const auto& rec : archive.records) {
    put(rec.objectives->e_lat, ',');
    put(rec.objectives->e_jerk, ',');
    put(rec.objectives->e_v, ',');
    out << rec.objectives->g << ',';
    for (double w : rec.weights.as_array()) put(w, ',');
    out << rec.iteration << ',' << rec.weight_index << ',';
    const std::array<double, 3> w = rec.weighting ? rec.weighting->w
                                                  : std::array<double, 3>{0.0, 0.0, 0.0};
    put(w[0], ',');
    put(w[1], ',');
    put(w[2], '\n');
  }
}

/// Fig.-7-style curve: evaluation count, cumulative wall time, and the
/// hypervolume of the archive after each evaluation.
inline void write_hv_curve_csv(const std::vector<EvaluationRecord>& ledger,
                               const ReferencePoint& ref, const Objective3& baseline,
                               const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("hv curve: cannot write " + path);
  out << "evaluations,cumulative_seconds,hypervolume\n";
  std::vector<Objective3> archive;
  double elapsed = 0.0;
  char buf[96];
  for (std::size_t i = 0; i < ledger.size(); ++i) {
    const auto& rec = ledger[i];
    elapsed += rec.eval_seconds + rec.overhead_seconds;
    if (rec.feasible()) {
      const Objective3 p = normalize_front({as_objective3(*rec.objectives)}, baseline)[0];
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
    }
    double hv = 0.0;
    if (!archive.empty()) {
      std::vector<Objective3> clipped = archive;
      for (auto& p : clipped) {
        for (int c = 0; c < 3; ++c) p[c] = std::min(p[c], ref[c]);
      }
      hv = hypervolume(clipped, ref);
    }
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", i + 1, elapsed, hv);
    out << buf;
  }
}

inline Json csv_columns(const char* header) {
  Json arr = Json::array();
  std::istringstream ss{std::string(header)};
  std::string cell;
  while (std::getline(ss, cell, ',')) arr.push_back(cell);
  return arr;
}

/// Documents every CSV emitted by a run.
inline void write_schema(const std::string& dir) {
  Json j;
  j["lap_log.csv"] = csv_columns(log_csv_header());
  j["archive.csv"] = csv_columns(archive_csv_header());
  j["hv_curve.csv"] = csv_columns("evaluations,cumulative_seconds,hypervolume");
  j["comparison.csv"] = csv_columns("source,evaluations,run_seconds,hypervolume");
  std::ofstream out(dir + "/schema.json");
  if (!out) throw std::runtime_error("schema: cannot write " + dir + "/schema.json");
  out << j.dump(2) << "\n";
}

}  // namespace mpfctune

#endif  // MPFCTUNE_IO_HPP_
