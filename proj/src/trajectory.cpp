#include "ernf/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace ernf {

Trajectory::Trajectory(double t0, double rate, std::vector<PoseSample> samples)
    : t0_(t0), rate_(rate), samples_(std::move(samples)) {
  if (!(rate > 0.0)) fail(ErrorCode::InvalidParams, "trajectory rate must be positive");
  if (samples_.empty()) fail(ErrorCode::InvalidParams, "trajectory needs at least one sample");
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    samples_[i].t = t0 + static_cast<double>(i) / rate;
    samples_[i].orientation.normalize();
  }
}

Quat slerp(const Quat& a, const Quat& b_in, double s) {
  Quat b = b_in;
  double d = a.dot(b);
  if (d < 0.0) {
    b.coeffs() = -b.coeffs();
    d = -d;
  }
  Quat out;
  if (d > 1.0 - 1e-12) {
    out.coeffs() = (1.0 - s) * a.coeffs() + s * b.coeffs();
  } else {
    const double theta = std::acos(std::clamp(d, -1.0, 1.0));
    const double inv = 1.0 / std::sin(theta);
    out.coeffs() = std::sin((1.0 - s) * theta) * inv * a.coeffs() + std::sin(s * theta) * inv * b.coeffs();
  }
  out.normalize();
  return out;
}

PoseSample interpolate_pose(const Trajectory& trajectory, double t) {
  const auto& samples = trajectory.samples();
  if (samples.empty()) fail(ErrorCode::OutOfRange, "empty trajectory");
  if (!(t >= trajectory.t_begin()) || !(t <= trajectory.t_end())) {
    std::ostringstream os;
    os << "t = " << t << " outside [" << trajectory.t_begin() << ", " << trajectory.t_end() << "]";
    fail(ErrorCode::OutOfRange, os.str());
  }
  if (samples.size() == 1) return samples.front();
  const double x = (t - trajectory.t_begin()) * trajectory.rate();
  std::size_t i = static_cast<std::size_t>(std::floor(x));
  i = std::min(i, samples.size() - 2);
  const double s = x - static_cast<double>(i);
  const PoseSample& a = samples[i];
  const PoseSample& b = samples[i + 1];
  if (t == a.t || s <= 0.0) return a;
  if (t == b.t || s >= 1.0) return b;
  PoseSample out;
  out.t = t;
  out.position = (1.0 - s) * a.position + s * b.position;
  out.orientation = slerp(a.orientation, b.orientation, s);
  return out;
}

Quat look_at(const Vec3& eye, const Vec3& target) {
  const Vec3 forward = (target - eye).normalized();
  const Vec3 up(0.0, 0.0, 1.0);
  const Vec3 right = forward.cross(up).normalized();
  const Vec3 down = forward.cross(right);
  Eigen::Matrix3d r;
  r.col(0) = right;
  r.col(1) = down;
  r.col(2) = forward;
  Quat q(r);
  q.normalize();
  return q;
}

void SpiralParams::validate() const {
  auto bad = [](const char* msg) { fail(ErrorCode::InvalidParams, msg); };
  if (!(radius > 0.0)) bad("spiral radius must be positive");
  if (!(duration > 0.0)) bad("spiral duration must be positive");
  if (!(speed_oscillation >= 1.0)) bad("speed oscillation factor v_b must be >= 1");
  if (!(frequency >= 0.0)) bad("oscillation frequency must be >= 0");
  if (!(rate >= 20.0 * frequency) || !(rate > 0.0)) bad("pose rate must be >= 20x the oscillation frequency");
  if (!std::isfinite(revolutions) || !std::isfinite(height_span)) bad("spiral parameters must be finite");
}

std::vector<double> spiral_azimuth(const SpiralParams& params) {
  params.validate();
  const auto n = static_cast<std::size_t>(std::llround(params.duration * params.rate));
  if (n < 1) fail(ErrorCode::InvalidParams, "duration shorter than one pose interval");
  // Trapezoidal integral of the relative speed on a grid 10x finer than the pose rate.
  constexpr std::size_t kOversample = 10;
  const std::size_t m = n * kOversample;
  const double h = params.duration / static_cast<double>(m);
  const double two_pi_f = 2.0 * std::numbers::pi * params.frequency;
  auto speed = [&](double t) { return std::pow(params.speed_oscillation, std::sin(two_pi_f * t)); };
  std::vector<double> integral(n + 1, 0.0);
  double acc = 0.0;
  double prev = speed(0.0);
  for (std::size_t j = 1; j <= m; ++j) {
    const double cur = speed(static_cast<double>(j) * h);
    acc += 0.5 * h * (prev + cur);
    prev = cur;
    if (j % kOversample == 0) integral[j / kOversample] = acc;
  }
  const double omega0 = params.revolutions * 2.0 * std::numbers::pi / acc;
  for (double& v : integral) v *= omega0;
  return integral;
}

Trajectory generate_spiral(const SpiralParams& params) {
  const std::vector<double> theta = spiral_azimuth(params);
  const std::size_t n = theta.size() - 1;
  const double max_sin = std::sin(kMaxElevationDeg * std::numbers::pi / 180.0);
  std::vector<PoseSample> samples(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    const double u = static_cast<double>(i) / static_cast<double>(n);
    const double sin_el = std::clamp(params.height_span * u / params.radius, -max_sin, max_sin);
    const double cos_el = std::sqrt(1.0 - sin_el * sin_el);
    const Vec3 eye = params.radius * Vec3(cos_el * std::cos(theta[i]), cos_el * std::sin(theta[i]), sin_el);
    samples[i].position = eye;
    samples[i].orientation = look_at(eye, Vec3::Zero());
    // Keep neighbouring quaternions in the same hemisphere.
    if (i > 0 && samples[i].orientation.dot(samples[i - 1].orientation) < 0.0)
      samples[i].orientation.coeffs() = -samples[i].orientation.coeffs();
  }
  return Trajectory(params.t_start, params.rate, std::move(samples));
}

Trajectory constant_trajectory(const PoseSample& pose, double t0, double t1, double rate) {
  if (!(t1 > t0)) fail(ErrorCode::InvalidParams, "constant trajectory needs t1 > t0");
  const auto n = static_cast<std::size_t>(std::ceil((t1 - t0) * rate - 1e-9));
  std::vector<PoseSample> samples(n + 1, pose);
  return Trajectory(t0, rate, std::move(samples));
}

}  // namespace ernf
