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

#ifndef MPFCTUNE_TRACK_HPP_
#define MPFCTUNE_TRACK_HPP_

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mpfctune/math.hpp"
#include "mpfctune/vehicle.hpp"

namespace mpfctune {

/// Centerline point: position and tangent heading at a path parameter.
struct PathPoint {
  double x_ref = 0.0;
  double y_ref = 0.0;
  double psi_ref = 0.0;
};

/// Deviation of a vehicle output from the path: the raw output-space error
/// e = (dx_f, dy_f, dpsi) and the signed cross-track distance (left of the
/// path is positive).
struct PathDeviation {
  double dx = 0.0;
  double dy = 0.0;
  double dpsi = 0.0;   // wrapped to (-pi, pi]
  double e_lat = 0.0;  // [m]
};

enum class SegmentType { kStraight, kArc };

/// One piecewise-constant-curvature segment of the centerline.
struct Segment {
  SegmentType type = SegmentType::kStraight;
  double length = 0.0;     // [m] > 0
  double curvature = 0.0;  // signed [1/m]; 0 for straights, >0 turns left
  double speed_limit = 0.0;  // [m/s]
};

/// Arc-length parameterized track: a sequence of straight and constant-
/// curvature segments. Immutable after construction.
class TrackSpec {
 public:
  TrackSpec(std::vector<Segment> segments, double lane_width)
      : segments_(std::move(segments)), lane_width_(lane_width) {
    if (segments_.empty()) throw std::invalid_argument("TrackSpec: no segments");
    if (lane_width_ <= 0.0) throw std::invalid_argument("TrackSpec: lane width must be positive");
    cumulative_.reserve(segments_.size() + 1);
    cumulative_.push_back(0.0);
    start_poses_.reserve(segments_.size());
    double x = 0.0, y = 0.0, h = 0.0;
    for (const Segment& seg : segments_) {
      if (seg.length <= 0.0) throw std::invalid_argument("TrackSpec: segment length must be positive");
      if (seg.speed_limit <= 0.0) throw std::invalid_argument("TrackSpec: speed limit must be positive");
      if (seg.type == SegmentType::kStraight && seg.curvature != 0.0) {
        throw std::invalid_argument("TrackSpec: straight segment with nonzero curvature");
      }
      if (seg.type == SegmentType::kArc && seg.curvature == 0.0) {
        throw std::invalid_argument("TrackSpec: arc segment with zero curvature");
      }
      start_poses_.push_back({x, y, h});
      advance(seg, seg.length, x, y, h);
      cumulative_.push_back(cumulative_.back() + seg.length);
    }
    end_pose_ = {x, y, h};
    closed_ = std::hypot(x, y) < 1e-6 &&
              std::abs(wrap_angle(h)) < 1e-9;
  }

  double length() const { return cumulative_.back(); }
  double lane_width() const { return lane_width_; }
  bool closed() const { return closed_; }
  const std::vector<Segment>& segments() const { return segments_; }

  /// Centerline point at path parameter s in [0, length()].
  PathPoint eval_path(double s) const {
    if (!(s >= 0.0 && s <= length())) {
      throw std::out_of_range("eval_path: path parameter outside [0, s_max]");
    }
    const std::size_t i = segment_index(s);
    const PathPoint& p0 = start_poses_[i];
    double x = p0.x_ref, y = p0.y_ref, h = p0.psi_ref;
    advance(segments_[i], s - cumulative_[i], x, y, h);
    return {x, y, wrap_angle(h)};
  }

  /// Like eval_path but wraps s modulo the loop length on closed tracks;
  /// used by predictions that run past the lap end.
  PathPoint eval_path_wrapped(double s) const {
    if (closed_) {
      s = std::fmod(s, length());
      if (s < 0.0) s += length();
    } else {
      s = mpfctune::clamp(s, 0.0, length());
    }
    return eval_path(s);
  }

  /// Piecewise-constant speed limit of the segment containing s. Segment
  /// boundaries belong to the following segment (left-closed convention).
  double speed_limit(double s) const {
    if (!(s >= 0.0 && s <= length())) {
      throw std::out_of_range("speed_limit: path parameter outside [0, s_max]");
    }
    return segments_[segment_index(s)].speed_limit;
  }

  double speed_limit_wrapped(double s) const {
    if (closed_) {
      s = std::fmod(s, length());
      if (s < 0.0) s += length();
    } else {
      s = mpfctune::clamp(s, 0.0, length());
    }
    return speed_limit(s);
  }

  double max_speed_limit() const {
    double m = 0.0;
    for (const Segment& seg : segments_) m = std::max(m, seg.speed_limit);
    return m;
  }

  /// Output-space deviation from the path at parameter s.
  PathDeviation path_deviation(const VehicleOutput& out, double s) const {
    const PathPoint p = eval_path(s);
    PathDeviation dev;
    dev.dx = out.x_f - p.x_ref;
    dev.dy = out.y_f - p.y_ref;
    dev.dpsi = wrap_angle(out.psi - p.psi_ref);
    dev.e_lat = -std::sin(p.psi_ref) * dev.dx + std::cos(p.psi_ref) * dev.dy;
    return dev;
  }

  PathDeviation path_deviation_wrapped(const VehicleOutput& out, double s) const {
    if (closed_) {
      s = std::fmod(s, length());
      if (s < 0.0) s += length();
    } else {
      s = mpfctune::clamp(s, 0.0, length());
    }
    return path_deviation(out, s);
  }

 private:
  static void advance(const Segment& seg, double ds, double& x, double& y, double& h) {
    if (seg.type == SegmentType::kStraight) {
      x += ds * std::cos(h);
      y += ds * std::sin(h);
    } else {
      const double h1 = h + seg.curvature * ds;
      x += (std::sin(h1) - std::sin(h)) / seg.curvature;
      y -= (std::cos(h1) - std::cos(h)) / seg.curvature;
      h = h1;
    }
  }

  // Index of the segment containing s; boundaries map to the following
  // segment, s = s_max maps to the last one.
  std::size_t segment_index(double s) const {
    std::size_t lo = 0, hi = segments_.size();
    while (lo + 1 < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (s >= cumulative_[mid]) lo = mid; else hi = mid;
    }
    return lo;
  }

  std::vector<Segment> segments_;
  double lane_width_;
  std::vector<double> cumulative_;     // cumulative arc length, size n+1
  std::vector<PathPoint> start_poses_;  // pose at the start of each segment
  PathPoint end_pose_;
  bool closed_ = false;
};

/// Default closed road loop: a rounded rectangle driven counterclockwise
/// with a chicane on the first leg. Roughly 1 km, straights at 50 km/h,
/// curve radii between 15 m and 30 m at 30 km/h, lane width 3.5 m.
inline TrackSpec build_default_loop() {
  constexpr double v_straight = 13.9;  // [m/s]
  constexpr double v_curve = 8.3;      // [m/s]
  constexpr double lane_width = 3.5;   // [m]

  std::vector<Segment> segs;
  auto straight = [&](double len) {
    segs.push_back({SegmentType::kStraight, len, 0.0, v_straight});
  };
  auto arc = [&](double radius, double sign, double turn = kPi / 2.0) {
    segs.push_back({SegmentType::kArc, radius * turn, sign / radius, v_curve});
  };

  straight(75.0);
  arc(25.0, -1.0);  // chicane: right-left-left-right, net +100 m east
  arc(25.0, +1.0);
  arc(25.0, +1.0);
  arc(25.0, -1.0);
  straight(75.0);
  arc(15.0, +1.0);
  straight(150.0);
  arc(20.0, +1.0);
  straight(260.0);
  arc(15.0, +1.0);
  straight(140.0);
  arc(30.0, +1.0);
  return TrackSpec(std::move(segs), lane_width);
}

/// A short closed loop for fast tests: one straight out, 180-degree turn,
/// straight back, 180-degree turn.
inline TrackSpec build_test_loop() {
  constexpr double v_straight = 10.0;
  constexpr double v_curve = 6.0;
  std::vector<Segment> segs = {
      {SegmentType::kStraight, 40.0, 0.0, v_straight},
      {SegmentType::kArc, 20.0 * kPi, 1.0 / 20.0, v_curve},
      {SegmentType::kStraight, 40.0, 0.0, v_straight},
      {SegmentType::kArc, 20.0 * kPi, 1.0 / 20.0, v_curve},
  };
  return TrackSpec(std::move(segs), 3.5);
}

// ---------------------------------------------------------------------------
// Plain-text track format. One directive per line, '#' starts a comment:
//   lane_width <m>
//   segment straight <length_m> 0 <speed_limit_mps>
//   segment arc <length_m> <curvature_1pm> <speed_limit_mps>
// ---------------------------------------------------------------------------

inline std::string track_to_text(const TrackSpec& track) {
  std::ostringstream os;
  char buf[96];
  std::snprintf(buf, sizeof(buf), "lane_width %.17g\n", track.lane_width());
  os << "# mpfctune track\n" << buf;
  for (const Segment& seg : track.segments()) {
    std::snprintf(buf, sizeof(buf), "segment %s %.17g %.17g %.17g\n",
                  seg.type == SegmentType::kStraight ? "straight" : "arc",
                  seg.length, seg.curvature, seg.speed_limit);
    os << buf;
  }
  return os.str();
}

inline TrackSpec track_from_text(std::istream& in) {
  double lane_width = 0.0;
  std::vector<Segment> segs;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    if (key == "lane_width") {
      if (!(ls >> lane_width)) throw std::runtime_error("track: bad lane_width on line " + std::to_string(lineno));
    } else if (key == "segment") {
      std::string type;
      Segment seg;
      if (!(ls >> type >> seg.length >> seg.curvature >> seg.speed_limit)) {
        throw std::runtime_error("track: bad segment on line " + std::to_string(lineno));
      }
      if (type == "straight") seg.type = SegmentType::kStraight;
      else if (type == "arc") seg.type = SegmentType::kArc;
      else throw std::runtime_error("track: unknown segment type '" + type + "' on line " + std::to_string(lineno));
      segs.push_back(seg);
    } else {
      throw std::runtime_error("track: unknown directive '" + key + "' on line " + std::to_string(lineno));
    }
  }
  return TrackSpec(std::move(segs), lane_width);
}

inline TrackSpec load_track(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("track: cannot open " + path);
  return track_from_text(in);
}

inline void save_track(const TrackSpec& track, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("track: cannot write " + path);
  out << track_to_text(track);
}

}  // namespace mpfctune

#endif  // MPFCTUNE_TRACK_HPP_
