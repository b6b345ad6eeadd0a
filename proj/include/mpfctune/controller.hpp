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

#ifndef MPFCTUNE_CONTROLLER_HPP_
#define MPFCTUNE_CONTROLLER_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "mpfctune/math.hpp"
#include "mpfctune/track.hpp"
#include "mpfctune/vehicle.hpp"

namespace mpfctune {

/// The seven tunable cost weights: diagonal of Q (= P) and R.
struct WeightVector {
  double q_x = 2.0;
  double q_y = 2.0;
  double q_psi = 5.0;
  double q_a = 0.05;
  double r_a = 0.1;
  double r_omega = 0.5;
  double r_vartheta = 0.5;

  static constexpr std::size_t kDim = 7;

  std::array<double, kDim> as_array() const {
    return {q_x, q_y, q_psi, q_a, r_a, r_omega, r_vartheta};
  }
  static WeightVector from_array(const std::array<double, kDim>& a) {
    return {a[0], a[1], a[2], a[3], a[4], a[5], a[6]};
  }
  static const std::array<const char*, kDim>& names() {
    static const std::array<const char*, kDim> n = {
        "q_x", "q_y", "q_psi", "q_a", "r_a", "r_omega", "r_vartheta"};
    return n;
  }
  void validate() const {
    for (double w : as_array()) {
      if (!(w > 0.0) || !std::isfinite(w)) {
        throw std::invalid_argument("WeightVector: weights must be strictly positive");
      }
    }
  }
};

/// Run constraints checked on logged laps and mirrored as soft penalties
/// inside the prediction.
struct RunConstraints {
  Interval a_x{-3.5, 2.5};             // longitudinal acceleration [m/s^2]
  double a_lat_max = 0.3 * kGravity;   // lateral acceleration bound [m/s^2]
};

/// Vehicle state augmented with the path parameter (a virtual state).
struct AugmentedState {
  VehicleState vehicle;
  double s = 0.0;
};

/// Continuous speed target along the path, used inside the prediction.
///
/// The raw speed limit is piecewise constant, which would make the OCP cost
/// discontinuous in the virtual inputs (a finite-difference solver cannot
/// cross such jumps). This profile caps each segment's limit at the
/// lateral-acceleration-feasible curve speed and connects segments with
/// braking and acceleration ramps, sampled on a grid and interpolated
/// linearly. It never exceeds the posted limit.
class SpeedProfile {
 public:
  SpeedProfile(const TrackSpec& track, double a_lat_max, double decel, double accel,
               double grid_step = 0.5)
      : ds_(grid_step), closed_(track.closed()) {
    if (!(a_lat_max > 0.0) || !(decel > 0.0) || !(accel > 0.0) || !(grid_step > 0.0)) {
      throw std::invalid_argument("SpeedProfile: rates must be positive");
    }
    length_ = track.length();
    const std::size_t n = static_cast<std::size_t>(std::ceil(length_ / ds_)) + 1;
    grid_.resize(n);
    double pos = 0.0;
    const auto& segs = track.segments();
    std::vector<double> seg_end(segs.size());
    std::vector<double> seg_veff(segs.size());
    for (std::size_t j = 0; j < segs.size(); ++j) {
      pos += segs[j].length;
      seg_end[j] = pos;
      const double kappa = std::abs(segs[j].curvature);
      const double v_curve = kappa > 0.0 ? std::sqrt(a_lat_max / kappa)
                                         : std::numeric_limits<double>::infinity();
      seg_veff[j] = std::min(segs[j].speed_limit, v_curve);
    }
    auto veff_at = [&](double s) {
      if (closed_) {
        s = std::fmod(s, length_);
        if (s < 0.0) s += length_;
      } else {
        s = mpfctune::clamp(s, 0.0, length_);
      }
      std::size_t j = 0;
      while (j + 1 < segs.size() && s >= seg_end[j]) ++j;
      return seg_veff[j];
    };
    for (std::size_t i = 0; i < n; ++i) {
      const double s = std::min(static_cast<double>(i) * ds_, length_);
      // sample conservatively over the adjacent cells: interpolation between
      // grid points must never exceed the posted limit at any s in between
      const double v = std::min({veff_at(s - ds_), veff_at(s), veff_at(s + ds_)});
      grid_[i] = v * v;  // stored as v^2
    }
    // backward braking pass and forward acceleration pass (twice around on
    // closed loops so the ramps cross the seam)
    const int rounds = closed_ ? 2 : 1;
    for (int r = 0; r < rounds; ++r) {
      if (closed_) grid_[n - 1] = std::min(grid_[n - 1], grid_[0]);
      for (std::size_t i = n; i-- > 1;) {
        grid_[i - 1] = std::min(grid_[i - 1], grid_[i] + 2.0 * decel * ds_);
      }
    }
    for (int r = 0; r < rounds; ++r) {
      if (closed_) grid_[0] = std::min(grid_[0], grid_[n - 1]);
      for (std::size_t i = 0; i + 1 < n; ++i) {
        grid_[i + 1] = std::min(grid_[i + 1], grid_[i] + 2.0 * accel * ds_);
      }
    }
    if (closed_) grid_[n - 1] = grid_[0];  // exact wrap continuity
  }

  double operator()(double s) const {
    if (closed_) {
      s = std::fmod(s, length_);
      if (s < 0.0) s += length_;
    } else {
      s = mpfctune::clamp(s, 0.0, length_);
    }
    const double u = s / ds_;
    const std::size_t i = std::min(static_cast<std::size_t>(u), grid_.size() - 2);
    const double w = u - static_cast<double>(i);
    return std::sqrt(grid_[i] + w * (grid_[i + 1] - grid_[i]));
  }

 private:
  double ds_;
  bool closed_;
  double length_ = 0.0;
  std::vector<double> grid_;  // squared speeds at grid points
};

enum class SolveStatus { kConverged, kIterationCap, kInfeasibleStart };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::kConverged: return "converged";
    case SolveStatus::kIterationCap: return "iteration-cap";
    case SolveStatus::kInfeasibleStart: return "infeasible-start";
  }
  return "?";
}

struct ControllerConfig {
  double horizon = 2.0;      // T_p [s]
  double sampling = 0.1;     // T_s [s]
  int intervals = 20;        // N piecewise-constant control intervals
  WeightVector weights;
  VehicleParams vehicle;     // prediction model, carries U and X
  RunConstraints constraints;
  double vartheta_max = 0.0;  // V = [0, vartheta_max]; <= 0 means "track max limit"
  double penalty_weight = 2000.0;  // soft-constraint weight
  double lane_margin = 0.2;        // [m] kept back from the lane boundary
  double envelope_decel = 2.0;     // speed-profile braking ramp [m/s^2]
  double envelope_accel = 2.0;     // speed-profile acceleration ramp [m/s^2]
  double envelope_lat_fraction = 0.9;  // share of a_lat_max the profile may use
  int iteration_cap = 50;
  double tolerance = 1e-7;   // relative cost-improvement stop
  int prediction_substeps = 1;  // RK4 steps per control interval

  double interval_length() const { return horizon / intervals; }

  SpeedProfile make_speed_profile(const TrackSpec& track) const {
    return SpeedProfile(track, envelope_lat_fraction * constraints.a_lat_max,
                        envelope_decel, envelope_accel);
  }

  void validate() const {
    if (!(sampling > 0.0) || !(horizon >= sampling)) {
      throw std::invalid_argument("ControllerConfig: need T_p >= T_s > 0");
    }
    if (intervals < 1) throw std::invalid_argument("ControllerConfig: need N >= 1");
    if (iteration_cap < 1 || prediction_substeps < 1 || !(tolerance > 0.0) ||
        !(penalty_weight >= 0.0) || !(envelope_decel > 0.0) || !(envelope_accel > 0.0) ||
        !(envelope_lat_fraction > 0.0 && envelope_lat_fraction <= 1.0)) {
      throw std::invalid_argument("ControllerConfig: bad solver settings");
    }
    weights.validate();
    vehicle.validate();
  }
};

/// Piecewise-constant input and virtual-input trajectories over N intervals.
struct OcpSolution {
  std::vector<ControlInput> inputs;
  std::vector<double> varthetas;
  double cost = std::numeric_limits<double>::infinity();
  SolveStatus status = SolveStatus::kInfeasibleStart;
  int iterations = 0;
};

/// Quadratic stage cost of one prediction node:
/// ||(e, a_lat)||^2_Q + ||(u, vartheta - vartheta_ref)||^2_R.
inline double stage_cost(const PathDeviation& e, double a_lat, const ControlInput& u,
                         double vartheta, double vartheta_ref, const WeightVector& w) {
  const double dth = vartheta - vartheta_ref;
  return w.q_x * e.dx * e.dx + w.q_y * e.dy * e.dy + w.q_psi * e.dpsi * e.dpsi +
         w.q_a * a_lat * a_lat + w.r_a * u.a_ref * u.a_ref +
         w.r_omega * u.omega_s_ref * u.omega_s_ref + w.r_vartheta * dth * dth;
}

namespace detail {

/// Soft-constraint violation measure at one prediction node (unweighted).
/// `v_allowed` is the continuous speed-profile value at the node's s.
inline double node_violation(const VehicleState& x, double e_lat, double v_allowed,
                             const ControllerConfig& cfg, double lane_width) {
  const double half_lane = 0.5 * lane_width - cfg.lane_margin;
  const double a_x = longitudinal_acceleration(x, cfg.vehicle);
  const double a_lat = lateral_acceleration(x);
  double pen = hinge_sq(std::abs(e_lat) - half_lane);
  pen += hinge_sq(a_x - cfg.constraints.a_x.hi) + hinge_sq(cfg.constraints.a_x.lo - a_x);
  pen += hinge_sq(std::abs(a_lat) - cfg.constraints.a_lat_max);
  pen += hinge_sq(x.v - v_allowed);
  const StateBounds& xb = cfg.vehicle.state_bounds;
  pen += hinge_sq(x.psi_dot - xb.psi_dot.hi) + hinge_sq(xb.psi_dot.lo - x.psi_dot);
  pen += hinge_sq(x.beta - xb.beta.hi) + hinge_sq(xb.beta.lo - x.beta);
  pen += hinge_sq(x.v - xb.v.hi) + hinge_sq(xb.v.lo - x.v);
  pen += hinge_sq(x.v_ref - xb.v_ref.hi) + hinge_sq(xb.v_ref.lo - x.v_ref);
  pen += hinge_sq(x.delta_s - xb.delta_s.hi) + hinge_sq(xb.delta_s.lo - x.delta_s);
  pen += hinge_sq(x.delta_s_ref - xb.delta_s_ref.hi) + hinge_sq(xb.delta_s_ref.lo - x.delta_s_ref);
  return pen;
}

/// Integrates one control interval without exception overhead; returns false
/// if the state leaves the finite range.
inline bool integrate_interval(VehicleState& x, const ControlInput& u,
                               const VehicleParams& p, double dt, int substeps) {
  const double h = dt / substeps;
  const auto f = [&](const std::array<double, VehicleState::kDim>& xs) {
    return derivative(VehicleState::from_array(xs), u, p);
  };
  for (int i = 0; i < substeps; ++i) {
    x = VehicleState::from_array(rk4_step(x.as_array(), h, f));
    if (!x.finite()) return false;
  }
  return true;
}

}  // namespace detail

/// Cost functional of the OCP for given trajectories: forward-simulates the
/// prediction model, accumulates the stage cost with a left-endpoint
/// rectangle rule, adds the terminal term (P = Q) and the weighted
/// soft-constraint penalties. Returns +inf if the rollout leaves the finite
/// range.
inline double trajectory_cost(const AugmentedState& x0,
                              const std::vector<ControlInput>& inputs,
                              const std::vector<double>& varthetas,
                              const ControllerConfig& cfg, const TrackSpec& track) {
  const int n = cfg.intervals;
  if (static_cast<int>(inputs.size()) != n || static_cast<int>(varthetas.size()) != n) {
    throw std::invalid_argument("trajectory_cost: trajectory length mismatch");
  }
  const SpeedProfile profile = cfg.make_speed_profile(track);
  const double dt = cfg.interval_length();
  VehicleState x = x0.vehicle;
  double s = x0.s;
  if (!x.finite() || !std::isfinite(s)) return std::numeric_limits<double>::infinity();

  double cost = 0.0;
  for (int k = 0; k < n; ++k) {
    const PathDeviation dev = track.path_deviation_wrapped(output(x, cfg.vehicle), s);
    const double vref = profile(s);
    cost += dt * stage_cost(dev, lateral_acceleration(x), inputs[k], varthetas[k], vref,
                            cfg.weights);
    cost += dt * cfg.penalty_weight *
            detail::node_violation(x, dev.e_lat, vref, cfg, track.lane_width());
    if (!detail::integrate_interval(x, inputs[k], cfg.vehicle, dt, cfg.prediction_substeps)) {
      return std::numeric_limits<double>::infinity();
    }
    s += varthetas[k] * dt;
  }
  const PathDeviation dev = track.path_deviation_wrapped(output(x, cfg.vehicle), s);
  const double a_lat = lateral_acceleration(x);
  cost += cfg.weights.q_x * dev.dx * dev.dx + cfg.weights.q_y * dev.dy * dev.dy +
          cfg.weights.q_psi * dev.dpsi * dev.dpsi + cfg.weights.q_a * a_lat * a_lat;
  cost += dt * cfg.penalty_weight *
          detail::node_violation(x, dev.e_lat, profile(s), cfg, track.lane_width());
  return std::isfinite(cost) ? cost : std::numeric_limits<double>::infinity();
}

/// Direct single-shooting OCP solver: projected L-BFGS over the box-
/// constrained decision variables (N control inputs and N virtual inputs),
/// gradients by central finite differences in normalized coordinates.
/// Deterministic; reusable across calls to avoid reallocation.
class OcpSolver {
 public:
  OcpSolver(const ControllerConfig& cfg, const TrackSpec& track)
      : cfg_(cfg), track_(track), profile_(cfg.make_speed_profile(track)),
        n_(cfg.intervals), dim_(3 * cfg.intervals) {
    cfg_.validate();
    vartheta_hi_ = cfg_.vartheta_max > 0.0 ? cfg_.vartheta_max : track_.max_speed_limit();
    lo_.resize(dim_);
    width_.resize(dim_);
    const InputBounds& ub = cfg_.vehicle.input_bounds;
    for (int k = 0; k < n_; ++k) {
      lo_[3 * k + 0] = ub.a_ref.lo;
      width_[3 * k + 0] = ub.a_ref.width();
      lo_[3 * k + 1] = ub.omega_s_ref.lo;
      width_[3 * k + 1] = ub.omega_s_ref.width();
      lo_[3 * k + 2] = 0.0;
      width_[3 * k + 2] = vartheta_hi_;
    }
    node_states_.resize(n_ + 1);
    node_s_.resize(n_ + 1);
    prefix_cost_.resize(n_ + 1);
    grad_.resize(dim_);
    z_.resize(dim_);
  }

  const ControllerConfig& config() const { return cfg_; }
  double vartheta_max() const { return vartheta_hi_; }
  const std::vector<double>& decision_lower() const { return lo_; }
  const std::vector<double>& decision_width() const { return width_; }

  /// Internal cost gradient (normalized coordinates) at the given
  /// trajectories; exposed so the finite-difference scheme can be checked
  /// against an independent differentiation of trajectory_cost.
  std::vector<double> cost_gradient(const AugmentedState& x0,
                                    const std::vector<ControlInput>& inputs,
                                    const std::vector<double>& varthetas) {
    if (static_cast<int>(inputs.size()) != n_ || static_cast<int>(varthetas.size()) != n_) {
      throw std::invalid_argument("cost_gradient: trajectory length mismatch");
    }
    for (int k = 0; k < n_; ++k) {
      z_[3 * k + 0] = normalize(3 * k + 0, inputs[k].a_ref);
      z_[3 * k + 1] = normalize(3 * k + 1, inputs[k].omega_s_ref);
      z_[3 * k + 2] = normalize(3 * k + 2, varthetas[k]);
    }
    if (!std::isfinite(cache_rollout(x0))) {
      throw std::runtime_error("cost_gradient: non-finite rollout");
    }
    gradient();
    return grad_;
  }

  OcpSolution solve(const AugmentedState& x0, const OcpSolution* warm) {
    OcpSolution sol;
    if (!x0.vehicle.finite() || !std::isfinite(x0.s)) {
      sol.status = SolveStatus::kInfeasibleStart;
      return sol;
    }
    initialize_decision(x0, warm);
    double f = cache_rollout(x0);
    if (!std::isfinite(f)) {
      sol.status = SolveStatus::kInfeasibleStart;
      return sol;
    }

    lbfgs_s_.clear();
    lbfgs_y_.clear();
    int iter = 0;
    int stall = 0;
    bool hit_cap = true;
    gradient();
    std::vector<double> z_new(dim_), g_new(dim_), dir(dim_);
    for (iter = 0; iter < cfg_.iteration_cap; ++iter) {
      if (projected_gradient_norm() < 1e-7) {
        hit_cap = false;
        break;
      }
      search_direction(dir);
      double f_new = line_search(x0, f, dir, z_new);
      if (!std::isfinite(f_new) && !lbfgs_s_.empty()) {
        // quasi-Newton direction failed; retry with plain steepest descent
        lbfgs_s_.clear();
        lbfgs_y_.clear();
        search_direction(dir);
        f_new = line_search(x0, f, dir, z_new);
      }
      if (!std::isfinite(f_new)) {
        hit_cap = false;
        break;  // no acceptable step in either direction
      }
      const double improvement = f - f_new;
      std::swap(z_, z_new);
      f = cache_rollout(x0);  // refresh node cache at the accepted iterate
      std::swap(grad_, g_new);
      gradient();
      update_lbfgs(z_new, g_new);
      if (improvement <= cfg_.tolerance * std::max(1.0, std::abs(f))) {
        if (++stall >= 2) {
          hit_cap = false;
          break;
        }
      } else {
        stall = 0;
      }
    }

    sol.inputs.resize(n_);
    sol.varthetas.resize(n_);
    for (int k = 0; k < n_; ++k) {
      sol.inputs[k] = {denorm(3 * k + 0), denorm(3 * k + 1)};
      sol.varthetas[k] = denorm(3 * k + 2);
    }
    sol.cost = f;
    sol.iterations = iter;
    sol.status = hit_cap ? SolveStatus::kIterationCap : SolveStatus::kConverged;
    return sol;
  }

 private:
  double denorm(int i) const { return lo_[i] + width_[i] * z_[i]; }

  void initialize_decision(const AugmentedState& x0, const OcpSolution* warm) {
    if (warm != nullptr && static_cast<int>(warm->inputs.size()) == n_) {
      for (int k = 0; k < n_; ++k) {
        z_[3 * k + 0] = normalize(3 * k + 0, warm->inputs[k].a_ref);
        z_[3 * k + 1] = normalize(3 * k + 1, warm->inputs[k].omega_s_ref);
        z_[3 * k + 2] = normalize(3 * k + 2, warm->varthetas[k]);
      }
      return;
    }
    const double vth = mpfctune::clamp(profile_(x0.s), 0.0, vartheta_hi_);
    for (int k = 0; k < n_; ++k) {
      z_[3 * k + 0] = normalize(3 * k + 0, 0.0);
      z_[3 * k + 1] = normalize(3 * k + 1, 0.0);
      z_[3 * k + 2] = normalize(3 * k + 2, vth);
    }
  }

  double normalize(int i, double value) const {
    return mpfctune::clamp((value - lo_[i]) / width_[i], 0.0, 1.0);
  }

  // Full rollout at z_, caching node states and cost prefixes so that
  // finite-difference probes only re-simulate the suffix they perturb.
  double cache_rollout(const AugmentedState& x0) {
    node_states_[0] = x0.vehicle;
    node_s_[0] = x0.s;
    prefix_cost_[0] = 0.0;
    const double dt = cfg_.interval_length();
    for (int k = 0; k < n_; ++k) {
      VehicleState x = node_states_[k];
      const double s = node_s_[k];
      const ControlInput u{denorm(3 * k), denorm(3 * k + 1)};
      const double vth = denorm(3 * k + 2);
      const PathDeviation dev = track_.path_deviation_wrapped(output(x, cfg_.vehicle), s);
      const double vref = profile_(s);
      double c = dt * stage_cost(dev, lateral_acceleration(x), u, vth, vref, cfg_.weights);
      c += dt * cfg_.penalty_weight *
           detail::node_violation(x, dev.e_lat, vref, cfg_, track_.lane_width());
      if (!std::isfinite(c) ||
          !detail::integrate_interval(x, u, cfg_.vehicle, dt, cfg_.prediction_substeps)) {
        return std::numeric_limits<double>::infinity();
      }
      prefix_cost_[k + 1] = prefix_cost_[k] + c;
      node_states_[k + 1] = x;
      node_s_[k + 1] = s + vth * dt;
    }
    const double total = prefix_cost_[n_] + terminal_cost(node_states_[n_], node_s_[n_]);
    return std::isfinite(total) ? total : std::numeric_limits<double>::infinity();
  }

  double terminal_cost(const VehicleState& x, double s) const {
    const PathDeviation dev = track_.path_deviation_wrapped(output(x, cfg_.vehicle), s);
    const double a_lat = lateral_acceleration(x);
    const WeightVector& w = cfg_.weights;
    double c = w.q_x * dev.dx * dev.dx + w.q_y * dev.dy * dev.dy +
               w.q_psi * dev.dpsi * dev.dpsi + w.q_a * a_lat * a_lat;
    c += cfg_.interval_length() * cfg_.penalty_weight *
         detail::node_violation(x, dev.e_lat, profile_(s), cfg_, track_.lane_width());
    return c;
  }

  // Cost of the suffix starting at cached node k0 where only the decision
  // variables of interval k0 changed (z_ still holds the later intervals).
  double suffix_cost(int k0, double a, double w, double vth) {
    const double dt = cfg_.interval_length();
    VehicleState x = node_states_[k0];
    double s = node_s_[k0];
    double cost = prefix_cost_[k0];
    for (int k = k0; k < n_; ++k) {
      const ControlInput u = k == k0 ? ControlInput{a, w}
                                     : ControlInput{denorm(3 * k), denorm(3 * k + 1)};
      const double th = k == k0 ? vth : denorm(3 * k + 2);
      const PathDeviation dev = track_.path_deviation_wrapped(output(x, cfg_.vehicle), s);
      const double vref = profile_(s);
      double c = dt * stage_cost(dev, lateral_acceleration(x), u, th, vref, cfg_.weights);
      c += dt * cfg_.penalty_weight *
           detail::node_violation(x, dev.e_lat, vref, cfg_, track_.lane_width());
      cost += c;
      if (!std::isfinite(cost) ||
          !detail::integrate_interval(x, u, cfg_.vehicle, dt, cfg_.prediction_substeps)) {
        return std::numeric_limits<double>::infinity();
      }
      s += th * dt;
    }
    return cost + terminal_cost(x, s);
  }

  // Central finite-difference gradient in normalized coordinates, reusing
  // the cached nominal node states.
  void gradient() {
    constexpr double eps = 1e-6;
    for (int k = 0; k < n_; ++k) {
      const double a = denorm(3 * k), w = denorm(3 * k + 1), v = denorm(3 * k + 2);
      const std::array<double, 3> nominal{a, w, v};
      for (int j = 0; j < 3; ++j) {
        const int idx = 3 * k + j;
        std::array<double, 3> plus = nominal, minus = nominal;
        plus[j] = lo_[idx] + width_[idx] * (z_[idx] + eps);
        minus[j] = lo_[idx] + width_[idx] * (z_[idx] - eps);
        const double fp = suffix_cost(k, plus[0], plus[1], plus[2]);
        const double fm = suffix_cost(k, minus[0], minus[1], minus[2]);
        grad_[idx] = (fp - fm) / (2.0 * eps);
        if (!std::isfinite(grad_[idx])) grad_[idx] = 0.0;
      }
    }
  }

  double projected_gradient_norm() const {
    double norm = 0.0;
    for (int i = 0; i < dim_; ++i) {
      double g = grad_[i];
      if (z_[i] <= 0.0 && g > 0.0) g = 0.0;
      if (z_[i] >= 1.0 && g < 0.0) g = 0.0;
      norm = std::max(norm, std::abs(g));
    }
    return norm;
  }

  // L-BFGS two-loop recursion; falls back to steepest descent with an
  // empty history.
  void search_direction(std::vector<double>& dir) const {
    dir.assign(grad_.begin(), grad_.end());
    const std::size_t m = lbfgs_s_.size();
    std::vector<double> alpha(m);
    for (std::size_t i = m; i-- > 0;) {
      double sy = 0.0, sg = 0.0;
      for (int j = 0; j < dim_; ++j) {
        sy += lbfgs_s_[i][j] * lbfgs_y_[i][j];
        sg += lbfgs_s_[i][j] * dir[j];
      }
      alpha[i] = sg / sy;
      for (int j = 0; j < dim_; ++j) dir[j] -= alpha[i] * lbfgs_y_[i][j];
    }
    if (m > 0) {
      double sy = 0.0, yy = 0.0;
      for (int j = 0; j < dim_; ++j) {
        sy += lbfgs_s_.back()[j] * lbfgs_y_.back()[j];
        yy += lbfgs_y_.back()[j] * lbfgs_y_.back()[j];
      }
      const double gamma = sy / std::max(yy, 1e-300);
      for (int j = 0; j < dim_; ++j) dir[j] *= gamma;
    }
    for (std::size_t i = 0; i < m; ++i) {
      double yd = 0.0, sy = 0.0;
      for (int j = 0; j < dim_; ++j) {
        yd += lbfgs_y_[i][j] * dir[j];
        sy += lbfgs_s_[i][j] * lbfgs_y_[i][j];
      }
      const double beta = yd / sy;
      for (int j = 0; j < dim_; ++j) dir[j] += (alpha[i] - beta) * lbfgs_s_[i][j];
    }
    for (double& d : dir) d = -d;
    // cap the step so the unit trial never jumps more than a box width per
    // coordinate (penalty gradients can be huge near constraint boundaries)
    double sup = 0.0;
    for (double d : dir) sup = std::max(sup, std::abs(d));
    const double cap = m == 0 ? 1.0 : 5.0;
    if (sup > cap) {
      for (double& d : dir) d *= cap / sup;
    }
  }

  // Backtracking Armijo line search along dir with projection onto [0,1]^dim.
  // Returns the new cost and fills z_new, or NaN if no step was acceptable.
  double line_search(const AugmentedState& x0, double f0, const std::vector<double>& dir,
                     std::vector<double>& z_new) {
    constexpr double c1 = 1e-4;
    double alpha = 1.0;
    double best_f = std::numeric_limits<double>::infinity();
    double best_alpha = 0.0;
    for (int bt = 0; bt < 20; ++bt, alpha *= 0.5) {
      double directional = 0.0;
      for (int i = 0; i < dim_; ++i) {
        z_new[i] = mpfctune::clamp(z_[i] + alpha * dir[i], 0.0, 1.0);
        directional += grad_[i] * (z_new[i] - z_[i]);
      }
      if (directional >= 0.0) continue;  // projection removed all descent
      const double f_new = trial_cost(x0, z_new);
      if (f_new <= f0 + c1 * directional) return f_new;
      if (f_new < best_f) {
        best_f = f_new;
        best_alpha = alpha;
      }
    }
    // Armijo never held (the finite-difference model can overestimate the
    // descent near penalty kinks); fall back to the best strict decrease.
    if (best_f < f0) {
      for (int i = 0; i < dim_; ++i) {
        z_new[i] = mpfctune::clamp(z_[i] + best_alpha * dir[i], 0.0, 1.0);
      }
      return best_f;
    }
    return std::numeric_limits<double>::quiet_NaN();
  }

  // Full rollout of a trial decision vector, without touching the node cache.
  double trial_cost(const AugmentedState& x0, std::vector<double>& z) {
    std::swap(z_, z);
    const double dt = cfg_.interval_length();
    VehicleState x = x0.vehicle;
    double s = x0.s;
    double cost = 0.0;
    for (int k = 0; k < n_; ++k) {
      const ControlInput u{denorm(3 * k), denorm(3 * k + 1)};
      const double th = denorm(3 * k + 2);
      const PathDeviation dev = track_.path_deviation_wrapped(output(x, cfg_.vehicle), s);
      const double vref = profile_(s);
      double c = dt * stage_cost(dev, lateral_acceleration(x), u, th, vref, cfg_.weights);
      c += dt * cfg_.penalty_weight *
           detail::node_violation(x, dev.e_lat, vref, cfg_, track_.lane_width());
      cost += c;
      if (!std::isfinite(cost) ||
          !detail::integrate_interval(x, u, cfg_.vehicle, dt, cfg_.prediction_substeps)) {
        cost = std::numeric_limits<double>::infinity();
        break;
      }
      s += th * dt;
    }
    if (std::isfinite(cost)) cost += terminal_cost(x, s);
    std::swap(z_, z);
    return std::isfinite(cost) ? cost : std::numeric_limits<double>::infinity();
  }

  void update_lbfgs(const std::vector<double>& z_old, const std::vector<double>& g_old) {
    std::vector<double> s(dim_), y(dim_);
    double sy = 0.0;
    for (int i = 0; i < dim_; ++i) {
      s[i] = z_[i] - z_old[i];
      y[i] = grad_[i] - g_old[i];
      sy += s[i] * y[i];
    }
    if (sy <= 1e-12) return;  // curvature condition failed; skip pair
    lbfgs_s_.push_back(std::move(s));
    lbfgs_y_.push_back(std::move(y));
    if (lbfgs_s_.size() > 8) {
      lbfgs_s_.erase(lbfgs_s_.begin());
      lbfgs_y_.erase(lbfgs_y_.begin());
    }
  }

  ControllerConfig cfg_;
  const TrackSpec& track_;
  SpeedProfile profile_;
  int n_;
  int dim_;
  double vartheta_hi_ = 0.0;
  std::vector<double> lo_, width_;
  std::vector<double> z_, grad_;
  std::vector<VehicleState> node_states_;
  std::vector<double> node_s_, prefix_cost_;
  std::vector<std::vector<double>> lbfgs_s_, lbfgs_y_;
};

/// One-shot OCP solve (fresh solver, optional warm start).
inline OcpSolution solve_ocp(const AugmentedState& x0, const ControllerConfig& cfg,
                             const TrackSpec& track, const OcpSolution* warm = nullptr) {
  OcpSolver solver(cfg, track);
  return solver.solve(x0, warm);
}

/// Receding-horizon controller: solves the OCP each call, applies the first
/// interval, and keeps the shifted solution as the next warm start. One
/// instance per simulation thread.
class MpfcController {
 public:
  MpfcController(const ControllerConfig& cfg, const TrackSpec& track)
      : solver_(cfg, track) {}

  struct StepResult {
    ControlInput input;
    double vartheta = 0.0;
    OcpSolution solution;
  };

  /// Solves the OCP at the current augmented state and returns the applied
  /// input u = u*(t_k) and virtual input for the timing law.
  StepResult step(const AugmentedState& x0) {
    OcpSolution sol = solver_.solve(x0, warm_ ? &*warm_ : nullptr);
    StepResult r;
    if (sol.status == SolveStatus::kInfeasibleStart) {
      r.solution = std::move(sol);
      warm_.reset();
      return r;
    }
    r.input = sol.inputs.front();
    r.vartheta = sol.varthetas.front();
    // shift one interval for the next warm start, repeating the last entry
    OcpSolution shifted = sol;
    for (std::size_t k = 0; k + 1 < shifted.inputs.size(); ++k) {
      shifted.inputs[k] = shifted.inputs[k + 1];
      shifted.varthetas[k] = shifted.varthetas[k + 1];
    }
    warm_ = std::move(shifted);
    r.solution = std::move(sol);
    return r;
  }

  void reset() { warm_.reset(); }
  const ControllerConfig& config() const { return solver_.config(); }
  double vartheta_max() const { return solver_.vartheta_max(); }

 private:
  OcpSolver solver_;
  std::optional<OcpSolution> warm_;
};

}  // namespace mpfctune

#endif  // MPFCTUNE_CONTROLLER_HPP_
