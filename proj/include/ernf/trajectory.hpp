#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <vector>

#include "ernf/error.hpp"

namespace ernf {

using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;

// Camera-to-world pose. The camera frame is x right, y down, z forward.
struct PoseSample {
  double t = 0.0;
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();
};

// Poses sampled at a constant rate: sample i sits at t0 + i / rate.
class Trajectory {
 public:
  Trajectory() = default;
  // Takes ownership of the sample array; sample times are re-derived from
  // (t0, rate) so the spacing is exact.
  Trajectory(double t0, double rate, std::vector<PoseSample> samples);

  const std::vector<PoseSample>& samples() const { return samples_; }
  double rate() const { return rate_; }
  double t_begin() const { return t0_; }
  double t_end() const { return samples_.empty() ? t0_ : samples_.back().t; }
  std::size_t size() const { return samples_.size(); }

 private:
  double t0_ = 0.0;
  double rate_ = 1.0;
  std::vector<PoseSample> samples_;
};

struct CameraIntrinsics {
  double fx = 1.0, fy = 1.0;
  double cx = 0.0, cy = 0.0;
  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) fail(ErrorCode::InvalidParams, "focal lengths must be positive");
  }
};

// Shortest-arc spherical interpolation; flips the sign of b when needed so
// q and -q interpolate identically.
Quat slerp(const Quat& a, const Quat& b, double s);

// LERP on position, SLERP on orientation, exact at sample times.
PoseSample interpolate_pose(const Trajectory& trajectory, double t);

// Orientation looking from `eye` at `target`, with the world +z axis as up.
Quat look_at(const Vec3& eye, const Vec3& target);

struct SpiralParams {
  double radius = 3.0;
  // Camera height gained over the whole sequence (world units, from z = 0).
  double height_span = 2.0;
  double revolutions = 4.0;
  // Speed oscillation factor: relative azimuth speed is v_b^sin(2 pi f t).
  double speed_oscillation = 1.0;
  double frequency = 1.0;  // Hz
  double duration = 4.0;   // s
  double rate = 1000.0;    // Hz
  double t_start = 0.0;
  void validate() const;
};

// Maximum camera elevation; keeps the look-at frame away from the pole.
inline constexpr double kMaxElevationDeg = 89.0;

// Hemispherical spiral around the origin with the camera looking at the origin.
Trajectory generate_spiral(const SpiralParams& params);

// Azimuth theta(t) (radians, unwrapped) at every trajectory sample time,
// normalised so theta(duration) = revolutions * 2 pi.
std::vector<double> spiral_azimuth(const SpiralParams& params);

// A trajectory that holds one pose for the given time span.
Trajectory constant_trajectory(const PoseSample& pose, double t0, double t1, double rate);

}  // namespace ernf
