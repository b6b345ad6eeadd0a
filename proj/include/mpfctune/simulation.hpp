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

#ifndef MPFCTUNE_SIMULATION_HPP_
#define MPFCTUNE_SIMULATION_HPP_

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mpfctune/controller.hpp"
#include "mpfctune/track.hpp"
#include "mpfctune/vehicle.hpp"

namespace mpfctune {

/// One closed-loop sample at controller period T_s.
struct LogRecord {
  double t = 0.0;
  VehicleState state;
  ControlInput input;
  double s = 0.0;
  double vartheta = 0.0;
  double e_lat = 0.0;
  double a_x = 0.0;
  double a_lat = 0.0;
  double v_lim = 0.0;
  double jerk = 0.0;
};

/// Uniform-grid log of one lap attempt.
struct SimulationLog {
  std::vector<LogRecord> records;
  double sampling = 0.1;
  bool lap_complete = false;

  std::size_t size() const { return records.size(); }
};

/// Closed-loop metrics for one lap, plus the feasibility flag g.
struct ObjectiveTriple {
  double e_lat = 0.0;   // mean squared lateral deviation [m^2]
  double e_jerk = 0.0;  // mean squared jerk [m^2/s^6]
  double e_v = 0.0;     // mean squared velocity error [m^2/s^2]
  int g = -1;           // +1 feasible, -1 otherwise
};

struct SimOptions {
  double substep = 0.01;       // plant integration step [s]
  double budget_factor = 3.0;  // step budget relative to the nominal lap time
};

/// Start pose with the front-axle midpoint on the path at s = 0.
inline AugmentedState initial_state(const TrackSpec& track, const VehicleParams& params,
                                    double v0) {
  const PathPoint p = track.eval_path(0.0);
  AugmentedState x;
  x.vehicle.psi = p.psi_ref;
  x.vehicle.x = p.x_ref - params.l_f * std::cos(p.psi_ref);
  x.vehicle.y = p.y_ref - params.l_f * std::sin(p.psi_ref);
  x.vehicle.v = v0;
  x.vehicle.v_ref = v0;
  x.s = 0.0;
  return x;
}

/// Time needed to drive every segment exactly at its speed limit.
inline double nominal_lap_time(const TrackSpec& track) {
  double t = 0.0;
  for (const Segment& seg : track.segments()) t += seg.length / seg.speed_limit;
  return t;
}

namespace detail {

/// Fills the jerk column by differentiating a_x on the T_s grid: central
/// differences inside, one-sided at the ends.
inline void fill_jerk(SimulationLog& log) {
  const std::size_t n = log.records.size();
  if (n < 2) {
    if (n == 1) log.records[0].jerk = 0.0;
    return;
  }
  const double dt = log.sampling;
  log.records[0].jerk = (log.records[1].a_x - log.records[0].a_x) / dt;
  for (std::size_t k = 1; k + 1 < n; ++k) {
    log.records[k].jerk = (log.records[k + 1].a_x - log.records[k - 1].a_x) / (2.0 * dt);
  }
  log.records[n - 1].jerk = (log.records[n - 1].a_x - log.records[n - 2].a_x) / dt;
}

}  // namespace detail

/// Runs one lap of the closed loop: alternates controller steps and plant
/// integration at the simulation substep until the path parameter reaches
/// the track length or the step budget runs out. The log is truncated (and
/// the lap marked incomplete) if the solver reports an infeasible start or
/// the plant state diverges.
inline SimulationLog run_lap(const TrackSpec& track, const ControllerConfig& cfg,
                             const VehicleParams& plant, const AugmentedState& start,
                             const SimOptions& opts = {}) {
  cfg.validate();
  plant.validate();
  if (!(opts.substep > 0.0) || opts.substep > cfg.sampling) {
    throw std::invalid_argument("run_lap: substep must be in (0, T_s]");
  }

  SimulationLog log;
  log.sampling = cfg.sampling;
  const long max_steps =
      std::lround(std::floor(opts.budget_factor * nominal_lap_time(track) / cfg.sampling));
  const int substeps = static_cast<int>(std::lround(cfg.sampling / opts.substep));

  MpfcController controller(cfg, track);
  AugmentedState x = start;
  for (long k = 0; k < max_steps; ++k) {
    const auto step = controller.step(x);
    if (step.solution.status == SolveStatus::kInfeasibleStart) break;

    LogRecord rec;
    rec.t = k * cfg.sampling;
    rec.state = x.vehicle;
    rec.input = step.input;
    rec.s = x.s;
    rec.vartheta = step.vartheta;
    rec.e_lat = track.path_deviation_wrapped(output(x.vehicle, plant), x.s).e_lat;
    rec.a_x = longitudinal_acceleration(x.vehicle, plant);
    rec.a_lat = lateral_acceleration(x.vehicle);
    rec.v_lim = track.speed_limit_wrapped(x.s);
    log.records.push_back(rec);

    try {
      for (int i = 0; i < substeps; ++i) {
        x.vehicle = step_rk4(x.vehicle, step.input, plant, opts.substep);
      }
    } catch (const std::runtime_error&) {
      break;  // plant diverged; incomplete lap
    }
    x.s += step.vartheta * cfg.sampling;
    if (x.s >= track.length()) {
      log.lap_complete = true;
      break;
    }
  }
  detail::fill_jerk(log);
  return log;
}

/// Mean-square objectives of a logged lap.
inline ObjectiveTriple compute_objectives(const SimulationLog& log, const TrackSpec& track) {
  (void)track;
  if (log.records.empty()) throw std::invalid_argument("compute_objectives: empty log");
  ObjectiveTriple obj;
  for (const LogRecord& r : log.records) {
    obj.e_lat += r.e_lat * r.e_lat;
    obj.e_jerk += r.jerk * r.jerk;
    const double ev = r.v_lim - r.state.v;
    obj.e_v += ev * ev;
  }
  const double n = static_cast<double>(log.records.size());
  obj.e_lat /= n;
  obj.e_jerk /= n;
  obj.e_v /= n;
  // g stays pessimistic here; evaluate_log combines with check_feasibility
  return obj;
}

/// Feasibility flag g of a lap: +1 iff the lap completed and the
/// acceleration and lane constraints held at every sample.
inline int check_feasibility(const SimulationLog& log, const TrackSpec& track,
                             const RunConstraints& limits = {}) {
  if (log.records.empty()) return -1;
  if (!log.lap_complete) return -1;
  const double half_lane = 0.5 * track.lane_width();
  for (const LogRecord& r : log.records) {
    if (!limits.a_x.contains(r.a_x)) return -1;
    if (std::abs(r.a_lat) > limits.a_lat_max) return -1;
    if (std::abs(r.e_lat) > half_lane) return -1;
  }
  return 1;
}

/// Lap evaluation bundle: objectives (when any sample exists) plus g.
inline ObjectiveTriple evaluate_log(const SimulationLog& log, const TrackSpec& track,
                                    const RunConstraints& limits = {}) {
  ObjectiveTriple obj = compute_objectives(log, track);
  obj.g = check_feasibility(log, track, limits);
  return obj;
}

// ---------------------------------------------------------------------------
// CSV export/import of lap logs. Column order is fixed and documented by
// log_csv_header(); all values round-trip at full double precision.
// ---------------------------------------------------------------------------

inline const char* log_csv_header() {
  return "t,x,y,psi,psi_dot,beta,v,v_ref,delta_s,delta_s_ref,"
         "a_ref,omega_s_ref,s,vartheta,e_lat,a_x,a_lat,v_lim,jerk";
}

inline void write_log_csv(const SimulationLog& log, std::ostream& out) {
  out << log_csv_header() << "\n";
  char buf[64];
  auto put = [&](double v, char sep) {
    std::snprintf(buf, sizeof(buf), "%.17g%c", v, sep);
    out << buf;
  };
  for (const LogRecord& r : log.records) {
    put(r.t, ',');
    for (double c : r.state.as_array()) put(c, ',');
    put(r.input.a_ref, ',');
    put(r.input.omega_s_ref, ',');
    put(r.s, ',');
    put(r.vartheta, ',');
    put(r.e_lat, ',');
    put(r.a_x, ',');
    put(r.a_lat, ',');
    put(r.v_lim, ',');
    put(r.jerk, '\n');
  }
}

inline SimulationLog read_log_csv(std::istream& in, double sampling, bool lap_complete) {
  SimulationLog log;
  log.sampling = sampling;
  log.lap_complete = lap_complete;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("log csv: missing header");
  if (line != log_csv_header()) throw std::runtime_error("log csv: unexpected header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::array<double, 19> v{};
    for (std::size_t i = 0; i < v.size(); ++i) {
      std::string cell;
      if (!std::getline(ls, cell, ',')) throw std::runtime_error("log csv: short row");
      v[i] = std::stod(cell);
    }
    LogRecord r;
    r.t = v[0];
    r.state = VehicleState::from_array({v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9]});
    r.input = {v[10], v[11]};
    r.s = v[12];
    r.vartheta = v[13];
    r.e_lat = v[14];
    r.a_x = v[15];
    r.a_lat = v[16];
    r.v_lim = v[17];
    r.jerk = v[18];
    log.records.push_back(r);
  }
  return log;
}

}  // namespace mpfctune

#endif  // MPFCTUNE_SIMULATION_HPP_
