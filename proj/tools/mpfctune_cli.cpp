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

// Command-line front end: closed-loop simulation, weight tuning by
// Bayesian optimization, and Pareto-front comparison by hypervolume.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mpfctune/io.hpp"

namespace fs = std::filesystem;
using namespace mpfctune;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::string track;
};

/// Configuration and argument problems exit with code 1; runtime failures
/// with code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

RunConfig make_config(const CommonOpts& common) {
  try {
    RunConfig cfg;
    if (!common.config_path.empty()) cfg = load_config(common.config_path);
    if (const char* env = std::getenv("MPFCTUNE_OUTPUT_DIR"); env != nullptr && *env != '\0') {
      cfg.output_dir = env;
    }
    if (!common.out_dir.empty()) cfg.output_dir = common.out_dir;
    if (!common.track.empty()) cfg.track = common.track;
    cfg.validate();
    return cfg;
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
}

void prepare_output_dir(const RunConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  std::ofstream out(cfg.output_dir + "/config_used.json");
  if (!out) throw std::runtime_error("cannot write " + cfg.output_dir + "/config_used.json");
  out << to_json(cfg).dump(2) << "\n";
  write_schema(cfg.output_dir);
}

WeightVector parse_weights(const std::string& csv) {
  std::istringstream ss(csv);
  std::array<double, WeightVector::kDim> a{};
  std::string cell;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!std::getline(ss, cell, ',')) {
      throw std::runtime_error("expected 7 comma-separated weights (q_x,q_y,q_psi,q_a,r_a,r_omega,r_vartheta)");
    }
    a[i] = std::stod(cell);
  }
  if (std::getline(ss, cell, ',')) throw std::runtime_error("expected exactly 7 weights");
  return WeightVector::from_array(a);
}

Objective3 parse_baseline(const std::string& csv) {
  std::istringstream ss(csv);
  Objective3 b{};
  std::string cell;
  for (int i = 0; i < 3; ++i) {
    if (!std::getline(ss, cell, ',')) {
      throw std::runtime_error("expected baseline as E_lat,E_jerk,E_v");
    }
    b[i] = std::stod(cell);
  }
  return b;
}

/// An input file is either a JSONL ledger or an archive JSON; ledgers carry
/// the full evaluation history, archives only the final front.
std::vector<EvaluationRecord> load_records(const std::string& path) {
  std::ifstream probe(path);
  if (!probe) throw std::runtime_error("cannot open " + path);
  char first = 0;
  probe >> first;
  probe.close();
  if (first == '{') {
    Json j;
    std::ifstream in(path);
    in >> j;
    if (j.value("kind", "") == "pareto_archive") {
      return read_archive_json(path).records;
    }
    // fall through: a single-record JSONL file also starts with '{'
  }
  return read_ledger(path);
}

int cmd_simulate(const CommonOpts& common, const std::string& weights_csv) {
  RunConfig cfg = make_config(common);
  ControllerConfig controller = cfg.controller;
  if (!weights_csv.empty()) controller.weights = parse_weights(weights_csv);
  if (!cfg.box.contains(controller.weights)) {
    std::cerr << "error: weights outside the search box M\n";
    return kExitUsage;
  }
  prepare_output_dir(cfg);
  const TrackSpec track = resolve_track(cfg);
  const double v0 = cfg.start_speed >= 0.0 ? cfg.start_speed : track.speed_limit(0.0);

  const SimulationLog log = run_lap(track, controller, controller.vehicle,
                                    initial_state(track, controller.vehicle, v0), cfg.sim);
  if (log.records.empty()) {
    std::cerr << "error: simulation produced no samples (infeasible start)\n";
    return kExitRuntime;
  }
  const ObjectiveTriple obj = evaluate_log(log, track);

  std::ofstream csv(cfg.output_dir + "/lap_log.csv");
  write_log_csv(log, csv);
  std::ofstream ojson(cfg.output_dir + "/objectives.json");
  Json j = to_json(obj);
  j["lap_complete"] = log.lap_complete;
  j["steps"] = log.size();
  ojson << j.dump(2) << "\n";

  std::printf("E_lat  = %.6g m^2\n", obj.e_lat);
  std::printf("E_jerk = %.6g m^2/s^6\n", obj.e_jerk);
  std::printf("E_v    = %.6g m^2/s^2\n", obj.e_v);
  std::printf("g      = %+d (%s, %zu steps)\n", obj.g,
              log.lap_complete ? "lap complete" : "lap incomplete", log.size());
  return kExitOk;
}

int cmd_tune(const CommonOpts& common, const std::string& approach_override, int budget_override,
             int bpw_override, double grid_override, long n0_override, long seed_override,
             int threads_override, bool resume) {
  RunConfig cfg = make_config(common);
  if (!approach_override.empty()) cfg.optimizer.approach = approach_override;
  if (budget_override > 0) cfg.optimizer.budget = budget_override;
  if (bpw_override > 0) cfg.optimizer.budget_per_weight = bpw_override;
  if (grid_override > 0.0) cfg.optimizer.grid_step = grid_override;
  if (n0_override > 0) cfg.optimizer.n0 = static_cast<int>(n0_override);
  if (seed_override >= 0) cfg.optimizer.seed = static_cast<std::uint64_t>(seed_override);
  if (threads_override > 0) cfg.optimizer.threads = threads_override;
  cfg.validate();
  prepare_output_dir(cfg);
  const TrackSpec track = resolve_track(cfg);

  BoSettings settings;
  settings.box = cfg.box;
  settings.n0 = cfg.optimizer.n0;
  settings.seed = cfg.optimizer.seed;
  settings.acquisition_budget = cfg.optimizer.acquisition_budget;
  settings.threads = cfg.optimizer.threads;
  if (cfg.optimizer.include_expert) settings.include = cfg.controller.weights;
  settings.validate();

  const std::string ledger_path = cfg.output_dir + "/ledger.jsonl";
  std::vector<EvaluationRecord> previous;
  if (resume) {
    if (!fs::exists(ledger_path)) {
      std::cerr << "error: --resume given but " << ledger_path << " does not exist\n";
      return kExitUsage;
    }
    previous = read_ledger(ledger_path);
    std::printf("resuming from %zu completed evaluations\n", previous.size());
  }

  const Evaluator evaluate =
      make_lap_evaluator(track, cfg.controller, cfg.controller.vehicle, cfg.sim, cfg.start_speed);

  BoResult result;
  if (cfg.optimizer.approach == "weighted_sum") {
    const auto grid = generate_weight_grid(cfg.optimizer.grid_step);
    std::printf("approach 1: %zu weightings x %d evaluations\n", grid.size(),
                cfg.optimizer.budget_per_weight);
    result = run_weighted_sum(evaluate, grid, cfg.optimizer.budget_per_weight, settings, previous);
  } else {
    std::printf("approach 2: pareto optimization, %d evaluations\n", cfg.optimizer.budget);
    result = run_pareto(evaluate, cfg.optimizer.budget, settings, previous);
  }

  write_ledger(result.ledger, ledger_path);
  write_archive_json(result.archive, cfg.output_dir + "/archive.json");
  write_archive_csv(result.archive, cfg.output_dir + "/archive.csv");

  // HV curve normalized to the configured (expert) weights' objectives when
  // that point was evaluated; otherwise unnormalized.
  Objective3 baseline = {1.0, 1.0, 1.0};
  if (settings.include) {
    const auto expert_norm = settings.box.to_normalized(*settings.include);
    for (const auto& rec : result.ledger) {
      if (rec.normalized == expert_norm && rec.feasible()) {
        baseline = as_objective3(*rec.objectives);
        break;
      }
    }
  }
  std::vector<Objective3> feasible;
  for (const auto& rec : result.ledger) {
    if (rec.feasible()) feasible.push_back(normalize_front({as_objective3(*rec.objectives)}, baseline)[0]);
  }
  if (!feasible.empty()) {
    const ReferencePoint ref = reference_point({feasible});
    write_hv_curve_csv(result.ledger, ref, baseline, cfg.output_dir + "/hv_curve.csv");
  }

  std::printf("evaluations: %zu, archive size: %zu, feasible: %zu\n", result.ledger.size(),
              result.archive.records.size(), feasible.size());
  std::printf("outputs in %s: ledger.jsonl archive.json archive.csv%s\n", cfg.output_dir.c_str(),
              feasible.empty() ? "" : " hv_curve.csv");
  return kExitOk;
}

int cmd_compare(const std::vector<std::string>& paths, const std::string& baseline_csv,
                const std::string& out_csv) {
  const Objective3 baseline = baseline_csv.empty() ? Objective3{1.0, 1.0, 1.0}
                                                   : parse_baseline(baseline_csv);
  struct Entry {
    std::string path;
    std::size_t evaluations = 0;
    double run_seconds = 0.0;
    std::vector<Objective3> front;
  };
  std::vector<Entry> entries;
  for (const auto& path : paths) {
    Entry e;
    e.path = path;
    const auto records = load_records(path);
    if (records.empty()) throw std::runtime_error(path + ": no records");
    e.evaluations = records.size();
    std::vector<Objective3> feasible;
    for (const auto& rec : records) {
      e.run_seconds += rec.eval_seconds + rec.overhead_seconds;
      if (rec.feasible()) feasible.push_back(as_objective3(*rec.objectives));
    }
    if (feasible.empty()) throw std::runtime_error(path + ": no feasible records");
    const auto front = ParetoFrontObjectives::from_points(normalize_front(feasible, baseline));
    e.front = front.points;
    entries.push_back(std::move(e));
  }

  std::vector<std::vector<Objective3>> fronts;
  for (const auto& e : entries) fronts.push_back(e.front);
  const ReferencePoint ref = reference_point(fronts);

  std::printf("%-40s %12s %12s %12s\n", "source", "evaluations", "run time [s]", "HV-indicator");
  std::optional<std::ofstream> out;
  if (!out_csv.empty()) {
    out.emplace(out_csv);
    if (!*out) throw std::runtime_error("cannot write " + out_csv);
    *out << "source,evaluations,run_seconds,hypervolume\n";
  }
  for (const auto& e : entries) {
    const double hv = hypervolume(e.front, ref);
    std::printf("%-40s %12zu %12.4g %12.6g\n", e.path.c_str(), e.evaluations, e.run_seconds, hv);
    if (out) {
      char buf[512];
      std::snprintf(buf, sizeof(buf), "%s,%zu,%.17g,%.17g\n", e.path.c_str(), e.evaluations,
                    e.run_seconds, hv);
      *out << buf;
    }
  }
  return kExitOk;
}

int cmd_export_track(const CommonOpts& common, const std::string& out_path) {
  RunConfig cfg = make_config(common);
  const TrackSpec track = resolve_track(cfg);
  save_track(track, out_path);
  std::printf("wrote %s (%zu segments, %.1f m, lane %.2f m)\n", out_path.c_str(),
              track.segments().size(), track.length(), track.lane_width());
  return kExitOk;
}

int cmd_hv(const std::vector<std::string>& paths, const std::string& baseline_csv,
           const std::string& curve_dir) {
  const Objective3 baseline = baseline_csv.empty() ? Objective3{1.0, 1.0, 1.0}
                                                   : parse_baseline(baseline_csv);
  std::vector<std::vector<EvaluationRecord>> all;
  std::vector<std::vector<Objective3>> fronts;
  for (const auto& path : paths) {
    auto records = load_records(path);
    if (records.empty()) throw std::runtime_error(path + ": no records");
    std::vector<Objective3> feasible;
    for (const auto& rec : records) {
      if (rec.feasible()) feasible.push_back(as_objective3(*rec.objectives));
    }
    if (feasible.empty()) throw std::runtime_error(path + ": no feasible records");
    fronts.push_back(normalize_front(feasible, baseline));
    all.push_back(std::move(records));
  }
  const ReferencePoint ref = reference_point(fronts);
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const auto front = ParetoFrontObjectives::from_points(fronts[i]);
    const double hv = hypervolume(front.points, ref);
    std::printf("%s: HV = %.6g (%zu records)\n", paths[i].c_str(), hv, all[i].size());
    if (!curve_dir.empty()) {
      fs::create_directories(curve_dir);
      const std::string name = fs::path(paths[i]).stem().string();
      write_hv_curve_csv(all[i], ref, baseline, curve_dir + "/" + name + "_hv_curve.csv");
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MPC path-following weight tuning by constrained multi-objective Bayesian optimization"};
  app.require_subcommand(1);

  CommonOpts common;
  app.add_option("--config", common.config_path, "JSON run configuration");
  app.add_option("--out-dir", common.out_dir,
                 "output directory (overrides config and MPFCTUNE_OUTPUT_DIR)");
  app.add_option("--track", common.track,
                 "track override: default-loop, test-loop, or a track file");

  auto* sim = app.add_subcommand("simulate", "run one closed-loop lap and report the objectives");
  std::string weights_csv;
  sim->add_option("--weights", weights_csv, "q_x,q_y,q_psi,q_a,r_a,r_omega,r_vartheta");

  auto* tune = app.add_subcommand("tune", "run Bayesian optimization of the controller weights");
  std::string approach;
  int budget = 0, bpw = 0, threads = 0;
  double grid_step = 0.0;
  long n0 = 0, seed = -1;
  bool resume = false;
  tune->add_option("--approach", approach, "weighted_sum or pareto")
      ->check(CLI::IsMember({"weighted_sum", "pareto"}));
  tune->add_option("--budget", budget, "total evaluations (pareto)");
  tune->add_option("--budget-per-weight", bpw, "evaluations per weighting (weighted_sum)");
  tune->add_option("--grid-step", grid_step, "weight grid step (weighted_sum)");
  tune->add_option("--n0", n0, "initial Latin-hypercube samples");
  tune->add_option("--seed", seed, "optimization seed");
  tune->add_option("--threads", threads, "parallel weighting instances (weighted_sum)");
  tune->add_flag("--resume", resume, "continue from an existing ledger in the output directory");

  auto* compare = app.add_subcommand("compare", "compare archives/ledgers by hypervolume");
  std::vector<std::string> compare_paths;
  std::string baseline_csv, compare_out;
  compare->add_option("files", compare_paths, "archive.json or ledger.jsonl files")->required();
  compare->add_option("--baseline", baseline_csv, "normalization baseline E_lat,E_jerk,E_v");
  compare->add_option("--out-csv", compare_out, "write the comparison table as CSV");

  auto* track = app.add_subcommand("export-track", "write the configured track as text");
  std::string track_out = "track.txt";
  track->add_option("--out", track_out, "output file");

  auto* hv = app.add_subcommand("hv", "hypervolume of archives/ledgers against a shared reference");
  std::vector<std::string> hv_paths;
  std::string hv_baseline, hv_curves;
  hv->add_option("files", hv_paths, "archive.json or ledger.jsonl files")->required();
  hv->add_option("--baseline", hv_baseline, "normalization baseline E_lat,E_jerk,E_v");
  hv->add_option("--curves-dir", hv_curves, "also write per-ledger HV curves here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (sim->parsed()) return cmd_simulate(common, weights_csv);
    if (tune->parsed()) {
      return cmd_tune(common, approach, budget, bpw, grid_step, n0, seed, threads, resume);
    }
    if (compare->parsed()) return cmd_compare(compare_paths, baseline_csv, compare_out);
    if (track->parsed()) return cmd_export_track(common, track_out);
    if (hv->parsed()) return cmd_hv(hv_paths, hv_baseline, hv_curves);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
