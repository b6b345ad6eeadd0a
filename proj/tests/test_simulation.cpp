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

#include "mpfctune/simulation.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

namespace mpfctune {
namespace {

SimulationLog synthetic_log(std::size_t n, double ts, bool complete,
                            std::function<void(std::size_t, LogRecord&)> fill) {
  SimulationLog log;
  log.sampling = ts;
  log.lap_complete = complete;
  for (std::size_t k = 0; k < n; ++k) {
    LogRecord r;
    r.t = k * ts;
    fill(k, r);
    log.records.push_back(r);
  }
  detail::fill_jerk(log);
  return log;
}

TEST(RunLap, TestLoopCompletesWithDefaults) {
  const TrackSpec track = build_test_loop();
  ControllerConfig cfg;
  const AugmentedState x0 = initial_state(track, cfg.vehicle, track.speed_limit(0.0));
  const SimulationLog log = run_lap(track, cfg, cfg.vehicle, x0);
  EXPECT_TRUE(log.lap_complete);
  EXPECT_GT(log.size(), 0u);
  EXPECT_EQ(evaluate_log(log, track).g, 1);
  for (const LogRecord& r : log.records) {
    ASSERT_LE(r.state.v, r.v_lim + 0.1);  // OCP keeps speed limits on feasible laps
  }
  // timing law: the path parameter advances by vartheta * T_s between calls
  for (std::size_t k = 0; k + 1 < log.size(); ++k) {
    ASSERT_DOUBLE_EQ(log.records[k + 1].s,
                     log.records[k].s + log.records[k].vartheta * log.sampling);
  }
}

TEST(RunLap, ZeroBudgetIsIncomplete) {
  const TrackSpec track = build_test_loop();
  ControllerConfig cfg;
  const AugmentedState x0 = initial_state(track, cfg.vehicle, track.speed_limit(0.0));
  SimOptions opts;
  opts.budget_factor = 0.0;
  const SimulationLog log = run_lap(track, cfg, cfg.vehicle, x0, opts);
  EXPECT_FALSE(log.lap_complete);
  EXPECT_EQ(log.size(), 0u);
  EXPECT_EQ(check_feasibility(log, track), -1);
}

TEST(RunLap, DeterministicLogs) {
  const TrackSpec track = build_test_loop();
  ControllerConfig cfg;
  const AugmentedState x0 = initial_state(track, cfg.vehicle, track.speed_limit(0.0));
  SimOptions opts;
  opts.budget_factor = 0.5;  // partial lap is enough to compare
  const SimulationLog a = run_lap(track, cfg, cfg.vehicle, x0, opts);
  const SimulationLog b = run_lap(track, cfg, cfg.vehicle, x0, opts);
  std::ostringstream sa, sb;
  write_log_csv(a, sa);
  write_log_csv(b, sb);
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(RunLap, DivergentStartTruncates) {
  const TrackSpec track = build_test_loop();
  ControllerConfig cfg;
  AugmentedState x0 = initial_state(track, cfg.vehicle, track.speed_limit(0.0));
  x0.vehicle.v = std::numeric_limits<double>::quiet_NaN();
  const SimulationLog log = run_lap(track, cfg, cfg.vehicle, x0);
  EXPECT_FALSE(log.lap_complete);
  EXPECT_EQ(log.size(), 0u);
}

TEST(ComputeObjectives, PerfectDriveIsZero) {
  const TrackSpec track = build_test_loop();
  const auto log = synthetic_log(100, 0.1, true, [](std::size_t, LogRecord& r) {
    r.e_lat = 0.0;
    r.a_x = 0.0;
    r.v_lim = 10.0;
    r.state.v = 10.0;
  });
  const ObjectiveTriple obj = compute_objectives(log, track);
  EXPECT_DOUBLE_EQ(obj.e_lat, 0.0);
  EXPECT_DOUBLE_EQ(obj.e_jerk, 0.0);
  EXPECT_DOUBLE_EQ(obj.e_v, 0.0);
}

TEST(ComputeObjectives, ConstantLateralOffset) {
  const TrackSpec track = build_test_loop();
  const auto log = synthetic_log(50, 0.1, true, [](std::size_t, LogRecord& r) {
    r.e_lat = 0.2;
    r.v_lim = 10.0;
    r.state.v = 10.0;
  });
  EXPECT_NEAR(compute_objectives(log, track).e_lat, 0.04, 1e-15);
}

TEST(ComputeObjectives, SineAccelerationJerk) {
  const TrackSpec track = build_test_loop();
  const double ts = 0.01;
  const auto log = synthetic_log(10000, ts, true, [&](std::size_t k, LogRecord& r) {
    r.a_x = std::sin(k * ts);
    r.v_lim = 10.0;
    r.state.v = 10.0;
  });
  // d/dt sin = cos, whose mean square over many periods is 1/2
  EXPECT_NEAR(compute_objectives(log, track).e_jerk, 0.5, 0.005);
}

TEST(ComputeObjectives, EmptyLogThrows) {
  const TrackSpec track = build_test_loop();
  SimulationLog log;
  EXPECT_THROW(compute_objectives(log, track), std::invalid_argument);
}

TEST(ComputeObjectives, QuadraticScaling) {
  const TrackSpec track = build_test_loop();
  auto base = synthetic_log(64, 0.1, true, [](std::size_t k, LogRecord& r) {
    r.e_lat = 0.1 * std::sin(0.3 * k);
    r.v_lim = 10.0;
    r.state.v = 10.0;
  });
  const double e1 = compute_objectives(base, track).e_lat;
  for (auto& r : base.records) r.e_lat *= 3.0;
  const double e2 = compute_objectives(base, track).e_lat;
  EXPECT_NEAR(e2, 9.0 * e1, 1e-12);
}

TEST(CheckFeasibility, BrakingBeyondBoundFails) {
  const TrackSpec track = build_test_loop();
  auto log = synthetic_log(20, 0.1, true, [](std::size_t, LogRecord& r) {
    r.v_lim = 10.0;
    r.state.v = 10.0;
  });
  log.records[7].a_x = -4.0;
  EXPECT_EQ(check_feasibility(log, track), -1);
}

TEST(CheckFeasibility, WithinAllBoundsPasses) {
  const TrackSpec track = build_test_loop();
  const auto log = synthetic_log(20, 0.1, true, [](std::size_t k, LogRecord& r) {
    r.a_lat = (k % 2 == 0) ? 2.0 : -2.0;  // below 0.3 g = 2.943
    r.a_x = 1.0;
    r.e_lat = 0.3;
    r.v_lim = 10.0;
    r.state.v = 9.0;
  });
  EXPECT_EQ(check_feasibility(log, track), 1);
}

TEST(CheckFeasibility, IncompleteLapFails) {
  const TrackSpec track = build_test_loop();
  const auto log = synthetic_log(20, 0.1, false, [](std::size_t, LogRecord& r) {
    r.v_lim = 10.0;
    r.state.v = 10.0;
  });
  EXPECT_EQ(check_feasibility(log, track), -1);
}

TEST(CheckFeasibility, LaneDepartureFails) {
  const TrackSpec track = build_test_loop();  // lane width 3.5, half = 1.75
  auto log = synthetic_log(20, 0.1, true, [](std::size_t, LogRecord& r) {
    r.v_lim = 10.0;
    r.state.v = 10.0;
  });
  log.records[3].e_lat = 1.8;
  EXPECT_EQ(check_feasibility(log, track), -1);
}

TEST(CheckFeasibility, PureFunctionOfLog) {
  const TrackSpec track = build_test_loop();
  const auto log = synthetic_log(20, 0.1, true, [](std::size_t, LogRecord& r) {
    r.v_lim = 10.0;
    r.state.v = 10.0;
  });
  const int g1 = check_feasibility(log, track);
  const int g2 = check_feasibility(log, track);
  EXPECT_EQ(g1, g2);
}

TEST(Jerk, CentralDifferencesMatchHandComputed) {
  SimulationLog log;
  log.sampling = 0.5;
  for (double ax : {1.0, 2.0, 4.0, 7.0}) {
    LogRecord r;
    r.a_x = ax;
    log.records.push_back(r);
  }
  detail::fill_jerk(log);
  EXPECT_DOUBLE_EQ(log.records[0].jerk, 2.0);   // forward (2-1)/0.5
  EXPECT_DOUBLE_EQ(log.records[1].jerk, 3.0);   // central (4-1)/1
  EXPECT_DOUBLE_EQ(log.records[2].jerk, 5.0);   // central (7-2)/1
  EXPECT_DOUBLE_EQ(log.records[3].jerk, 6.0);   // backward (7-4)/0.5
}

TEST(LogCsv, RoundTripsExactly) {
  const TrackSpec track = build_test_loop();
  ControllerConfig cfg;
  const AugmentedState x0 = initial_state(track, cfg.vehicle, track.speed_limit(0.0));
  SimOptions opts;
  opts.budget_factor = 0.2;
  const SimulationLog log = run_lap(track, cfg, cfg.vehicle, x0, opts);
  ASSERT_GT(log.size(), 0u);
  std::ostringstream out;
  write_log_csv(log, out);
  std::istringstream in(out.str());
  const SimulationLog back = read_log_csv(in, log.sampling, log.lap_complete);
  ASSERT_EQ(back.size(), log.size());
  for (std::size_t k = 0; k < log.size(); ++k) {
    EXPECT_EQ(back.records[k].state.v, log.records[k].state.v);
    EXPECT_EQ(back.records[k].e_lat, log.records[k].e_lat);
    EXPECT_EQ(back.records[k].jerk, log.records[k].jerk);
    EXPECT_EQ(back.records[k].input.a_ref, log.records[k].input.a_ref);
  }
}

TEST(NominalLapTime, SegmentSum) {
  const TrackSpec track = build_test_loop();
  // 40/10 + 20*pi/6 + 40/10 + 20*pi/6
  EXPECT_NEAR(nominal_lap_time(track), 8.0 + 40.0 * kPi / 6.0, 1e-12);
}

}  // namespace
}  // namespace mpfctune
