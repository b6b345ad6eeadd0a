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

#ifndef MPFCTUNE_VEHICLE_HPP_
#define MPFCTUNE_VEHICLE_HPP_

#include <array>
#include <cmath>
#include <stdexcept>

#include "mpfctune/math.hpp"

namespace mpfctune {

/// Closed interval [lo, hi].
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double x) const { return x >= lo && x <= hi; }
  double clamp(double x) const { return x < lo ? lo : (x > hi ? hi : x); }
  double width() const { return hi - lo; }
};

/// Nine-state vehicle model state: planar pose, yaw rate, side slip,
/// velocity plus its tracked target, steering wheel angle plus its target.
struct VehicleState {
  double x = 0.0;            // position east [m]
  double y = 0.0;            // position north [m]
  double psi = 0.0;          // yaw angle [rad]
  double psi_dot = 0.0;      // yaw rate [rad/s]
  double beta = 0.0;         // side slip angle [rad]
  double v = 0.0;            // velocity [m/s]
  double v_ref = 0.0;        // target velocity state [m/s]
  double delta_s = 0.0;      // steering wheel angle [rad]
  double delta_s_ref = 0.0;  // steering wheel target angle [rad]

  static constexpr std::size_t kDim = 9;

  std::array<double, kDim> as_array() const {
    return {x, y, psi, psi_dot, beta, v, v_ref, delta_s, delta_s_ref};
  }
  static VehicleState from_array(const std::array<double, kDim>& a) {
    return {a[0], a[1], a[2], a[3], a[4], a[5], a[6], a[7], a[8]};
  }
  bool finite() const {
    for (double c : as_array()) {
      if (!std::isfinite(c)) return false;
    }
    return true;
  }
};

using VehicleStateDerivative = std::array<double, VehicleState::kDim>;

/// Control input: target acceleration and steering wheel target angular rate.
struct ControlInput {
  double a_ref = 0.0;        // [m/s^2]
  double omega_s_ref = 0.0;  // [rad/s]

  bool finite() const { return std::isfinite(a_ref) && std::isfinite(omega_s_ref); }
};

/// Output map value: front-axle midpoint position and yaw.
struct VehicleOutput {
  double x_f = 0.0;
  double y_f = 0.0;
  double psi = 0.0;
};

/// Input box U.
struct InputBounds {
  Interval a_ref{-3.5, 2.5};
  Interval omega_s_ref{-8.0, 8.0};

  bool contains(const ControlInput& u) const {
    return a_ref.contains(u.a_ref) && omega_s_ref.contains(u.omega_s_ref);
  }
  ControlInput clamp(const ControlInput& u) const {
    return {a_ref.clamp(u.a_ref), omega_s_ref.clamp(u.omega_s_ref)};
  }
};

/// State box X for the dynamic states (position and yaw are unbounded).
struct StateBounds {
  Interval psi_dot{-1.5, 1.5};
  Interval beta{-0.4, 0.4};
  Interval v{0.0, 25.0};
  Interval v_ref{0.0, 25.0};
  Interval delta_s{-3.0 * kPi, 3.0 * kPi};
  Interval delta_s_ref{-3.0 * kPi, 3.0 * kPi};
};

/// Single-track model parameters with linear tire forces, first-order
/// actuator tracking and the reference integrator chain.
struct VehicleParams {
  double mass = 1500.0;            // [kg]
  double inertia_z = 2500.0;       // yaw inertia [kg m^2]
  double l_f = 1.2;                // CoG to front axle [m]
  double l_r = 1.4;                // CoG to rear axle [m]
  double c_f = 80000.0;            // front cornering stiffness [N/rad]
  double c_r = 80000.0;            // rear cornering stiffness [N/rad]
  double steering_ratio = 15.0;    // steering wheel to road wheel [-]
  double tau_v = 0.5;              // velocity tracking time constant [s]
  double tau_delta = 0.2;          // steering tracking time constant [s]
  double v_kinematic = 0.5;        // below this speed use kinematic relations [m/s]
  double tau_kinematic = 0.1;      // relaxation toward kinematic yaw/slip [s]
  InputBounds input_bounds;        // U
  StateBounds state_bounds;        // X

  void validate() const {
    if (mass <= 0.0 || inertia_z <= 0.0 || c_f <= 0.0 || c_r <= 0.0 ||
        steering_ratio <= 0.0 || tau_v <= 0.0 || tau_delta <= 0.0 ||
        l_f + l_r <= 0.0 || v_kinematic <= 0.0 || tau_kinematic <= 0.0) {
      throw std::invalid_argument("VehicleParams: non-positive physical parameter");
    }
  }
};

/// Time derivative of the nine-state model.
///
/// Kinematics follow the velocity direction psi+beta. Above the low-speed
/// threshold, yaw rate and side slip obey the linear-tire single-track
/// dynamics; below it they relax to the kinematic bicycle values so that the
/// 1/v terms never blow up. The last four states are the two first-order
/// tracking laws and the two reference integrators.
inline VehicleStateDerivative derivative(const VehicleState& state,
                                         const ControlInput& input,
                                         const VehicleParams& p) {
  if (!state.finite() || !input.finite()) {
    throw std::invalid_argument("derivative: non-finite state or input");
  }
  VehicleStateDerivative d{};

  const double delta_f = state.delta_s / p.steering_ratio;  // road wheel angle
  d[0] = state.v * std::cos(state.psi + state.beta);
  d[1] = state.v * std::sin(state.psi + state.beta);
  d[2] = state.psi_dot;

  if (state.v >= p.v_kinematic) {
    const double alpha_f = delta_f - state.beta - p.l_f * state.psi_dot / state.v;
    const double alpha_r = -state.beta + p.l_r * state.psi_dot / state.v;
    const double f_yf = p.c_f * alpha_f;
    const double f_yr = p.c_r * alpha_r;
    d[3] = (p.l_f * f_yf - p.l_r * f_yr) / p.inertia_z;
    d[4] = (f_yf + f_yr) / (p.mass * state.v) - state.psi_dot;
  } else {
    const double wheelbase = p.l_f + p.l_r;
    const double beta_kin = std::atan(p.l_r * std::tan(delta_f) / wheelbase);
    const double psi_dot_kin = state.v * std::cos(state.beta) * std::tan(delta_f) / wheelbase;
    d[3] = (psi_dot_kin - state.psi_dot) / p.tau_kinematic;
    d[4] = (beta_kin - state.beta) / p.tau_kinematic;
  }

  d[5] = (state.v_ref - state.v) / p.tau_v;
  d[6] = input.a_ref;
  d[7] = (state.delta_s_ref - state.delta_s) / p.tau_delta;
  d[8] = input.omega_s_ref;
  return d;
}

/// Output map: front-axle midpoint position and yaw angle.
inline VehicleOutput output(const VehicleState& state, const VehicleParams& p) {
  if (!state.finite()) throw std::invalid_argument("output: non-finite state");
  return {state.x + p.l_f * std::cos(state.psi),
          state.y + p.l_f * std::sin(state.psi),
          state.psi};
}

/// Lateral acceleration approximation a_lat = v * psi_dot.
inline double lateral_acceleration(const VehicleState& state) {
  return state.v * state.psi_dot;
}

/// Longitudinal acceleration of the model, a_x = dv/dt.
inline double longitudinal_acceleration(const VehicleState& state, const VehicleParams& p) {
  return (state.v_ref - state.v) / p.tau_v;
}

/// One fixed-step RK4 integration step of the vehicle model.
inline VehicleState step_rk4(const VehicleState& state, const ControlInput& input,
                             const VehicleParams& p, double dt) {
  if (dt <= 0.0) throw std::invalid_argument("step_rk4: dt must be positive");
  if (!state.finite() || !input.finite()) {
    throw std::invalid_argument("step_rk4: non-finite state or input");
  }
  const auto f = [&](const std::array<double, VehicleState::kDim>& xs) {
    return derivative(VehicleState::from_array(xs), input, p);
  };
  VehicleState next;
  try {
    next = VehicleState::from_array(rk4_step(state.as_array(), dt, f));
  } catch (const std::invalid_argument&) {
    throw std::runtime_error("step_rk4: integration diverged");
  }
  if (!next.finite()) throw std::runtime_error("step_rk4: integration diverged");
  return next;
}

}  // namespace mpfctune

#endif  // MPFCTUNE_VEHICLE_HPP_
