#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "ernf/core.hpp"
#include "ernf/metrics.hpp"
#include "ernf/simulator.hpp"
#include "ernf/trajectory.hpp"

namespace ernf {

// Radiance floor added after activation and background compositing, keeping log L finite.
inline constexpr double kRadianceFloor = 1e-3;
// Density activation is a sharp SoftPlus; radiance activations use the plain one.
inline constexpr double kDensityBeta = 100.0;
inline constexpr double kRadianceBeta = 1.0;

inline double softplus(double x, double beta = 1.0) {
  const double z = beta * x;
  return (z > 30.0 ? z : std::log1p(std::exp(z))) / beta;
}
// d softplus / dx
inline double softplus_slope(double x, double beta = 1.0) { return 1.0 / (1.0 + std::exp(-beta * x)); }
inline double softplus_inverse(double y, double beta = 1.0) {
  const double z = beta * y;
  return (z > 30.0 ? z : std::log(std::expm1(z))) / beta;
}
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct Aabb {
  Vec3 lo = Vec3::Constant(-1.0);
  Vec3 hi = Vec3::Constant(1.0);
};

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();
  double near = 0.0;
  double far = 1.0;
};

// Volume-rendering quadrature for explicit per-sample optical depths (sigma_i * delta_i)
// and colours, with the residual transmittance compositing `background`.
// Returns sum_i w_i c_i + T_{N+1} * background + floor. If `weights` is
// non-null it receives w_1..w_N followed by T_{N+1}.
double composite(std::span<const double> optical_depth, std::span<const double> color, double background,
                 std::vector<double>* weights = nullptr, double floor = kRadianceFloor);

// Dense voxel grid of raw (pre-activation) values, trilinearly interpolated at
// the grid vertices spanning `box`. All learnable values live in one flat
// array: [density D^3][colour D^3 x C][background C].
class VoxelField {
 public:
  VoxelField() = default;
  VoxelField(int resolution, Aabb box, int channels);

  int resolution() const { return resolution_; }
  int channels() const { return channels_; }
  const Aabb& box() const { return box_; }

  std::size_t voxel_count() const { return static_cast<std::size_t>(resolution_) * resolution_ * resolution_; }
  std::size_t param_count() const { return params_.size(); }
  std::size_t color_offset() const { return voxel_count(); }
  std::size_t background_offset() const { return voxel_count() * (1 + channels_); }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  std::size_t voxel_index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * resolution_ + j) * resolution_ + i;
  }
  double& density_raw(int i, int j, int k) { return params_[voxel_index(i, j, k)]; }
  double& color_raw(int i, int j, int k, int c) {
    return params_[color_offset() + voxel_index(i, j, k) * channels_ + c];
  }
  double& background_raw(int c) { return params_[background_offset() + c]; }
  double background_raw(int c) const { return params_[background_offset() + c]; }
  double background(int c) const { return softplus(background_raw(c), kRadianceBeta); }
  // World position of grid vertex (i, j, k).
  Vec3 vertex_position(int i, int j, int k) const;

  // Activated density and colour at a world point (tests and scene building).
  double density_at(const Vec3& x) const;
  double color_at(const Vec3& x, int c) const;

 private:
  int resolution_ = 0;
  int channels_ = 1;
  Aabb box_;
  std::vector<double> params_;
};

// Clips a ray to the box. Returns false when it misses (or only grazes) the box.
bool clip_to_box(const Aabb& box, const Vec3& origin, const Vec3& direction, double& near, double& far);

// Camera ray through the pixel centre, clipped to the field box.
struct PixelRay {
  Ray ray;
  bool hits_box = false;
};
PixelRay back_project(Pixel u, const PoseSample& pose, const CameraIntrinsics& intrinsics, const Aabb& box);

// Per-channel L (floor included). Throws DegenerateRay if far <= near.
std::vector<double> render_radiance(const VoxelField& field, const Ray& ray, int n_samples);

double render_log_radiance(const VoxelField& field, Pixel u, const PoseSample& pose,
                           const CameraIntrinsics& intrinsics, int n_samples, int channel);

// Reverse-mode derivative of log L for one channel: adds
// upstream * d log L / d params into `grad` and returns log L.
double render_log_radiance_backward(const VoxelField& field, Pixel u, const PoseSample& pose,
                                    const CameraIntrinsics& intrinsics, int n_samples, int channel,
                                    double upstream, std::span<double> grad);

// Full-colour linear-radiance view (every channel at every pixel), pixels in parallel.
Image render_view(const VoxelField& field, const PoseSample& pose, const CameraIntrinsics& intrinsics, int width,
                  int height, int n_samples, int threads = 0);

// A learnable per-pixel log-radiance model, the common interface the losses
// and the trainer work against.
class LogRadianceModel {
 public:
  virtual ~LogRadianceModel() = default;

  virtual std::span<double> params() = 0;
  virtual std::span<const double> params() const = 0;
  std::size_t param_count() const { return params().size(); }

  virtual double log_radiance(Pixel u, double t) const = 0;
  // Adds upstream * d(log L)/d(params) into grad; returns log L.
  virtual double log_radiance_backward(Pixel u, double t, double upstream, std::span<double> grad) const = 0;

  // d/dt log L. `h` is the half-width of the central-difference stencil for
  // models without an analytic time derivative; analytic models ignore it.
  virtual double time_derivative(Pixel u, double t, double h) const = 0;
  virtual double time_derivative_backward(Pixel u, double t, double h, double upstream,
                                          std::span<double> grad) const = 0;
  virtual double second_time_derivative(Pixel u, double t, double h) const = 0;

  // Ray samples spent per log-radiance evaluation; drives batch sizing.
  virtual double samples_per_query() const = 0;
};

// Per-pixel truncated Fourier series of log-radiance over one period:
// a0 + sum_k a_k cos(k w (t - t0)) + b_k sin(k w (t - t0)), w = 2 pi / period.
// Parameters per pixel are laid out [a0, a_1..a_K, b_1..b_K].
class TemporalSignalField final : public LogRadianceModel {
 public:
  static constexpr int kDefaultHarmonics = 16;

  TemporalSignalField(const SensorGeometry& geometry, int harmonics, double t0, double period);

  const SensorGeometry& geometry() const { return geometry_; }
  int harmonics() const { return harmonics_; }
  double t0() const { return t0_; }
  double period() const { return period_; }
  std::size_t params_per_pixel() const { return 2 * static_cast<std::size_t>(harmonics_) + 1; }
  std::span<double> pixel_params(Pixel u) {
    return std::span<double>(params_).subspan(geometry_.index(u) * params_per_pixel(), params_per_pixel());
  }

  std::span<double> params() override { return params_; }
  std::span<const double> params() const override { return params_; }

  double log_radiance(Pixel u, double t) const override;
  double log_radiance_backward(Pixel u, double t, double upstream, std::span<double> grad) const override;
  double time_derivative(Pixel u, double t, double h) const override;
  double time_derivative_backward(Pixel u, double t, double h, double upstream,
                                  std::span<double> grad) const override;
  double second_time_derivative(Pixel u, double t, double h) const override;
  double samples_per_query() const override { return 1.0; }

 private:
  SensorGeometry geometry_;
  int harmonics_;
  double t0_, period_;
  std::vector<double> params_;
};

// A voxel field observed by a moving camera: log L(u, t) renders the pixel's
// mosaic channel from the pose interpolated at t.
class VoxelScene final : public LogRadianceModel {
 public:
  static constexpr int kDefaultSamples = 64;

  VoxelScene(VoxelField field, Trajectory trajectory, CameraIntrinsics intrinsics, SensorGeometry geometry,
             int n_samples = kDefaultSamples);

  VoxelField& field() { return field_; }
  const VoxelField& field() const { return field_; }
  const Trajectory& trajectory() const { return trajectory_; }
  const CameraIntrinsics& intrinsics() const { return intrinsics_; }
  const SensorGeometry& geometry() const { return geometry_; }
  int n_samples() const { return n_samples_; }

  std::span<double> params() override { return field_.params(); }
  std::span<const double> params() const override { return field_.params(); }

  double log_radiance(Pixel u, double t) const override;
  double log_radiance_backward(Pixel u, double t, double upstream, std::span<double> grad) const override;
  double time_derivative(Pixel u, double t, double h) const override;
  double time_derivative_backward(Pixel u, double t, double h, double upstream,
                                  std::span<double> grad) const override;
  double second_time_derivative(Pixel u, double t, double h) const override;
  double samples_per_query() const override { return n_samples_; }

  // Central-difference stencil [t - h, t + h], shifted to stay inside the trajectory.
  std::pair<double, double> stencil(double t, double h) const;

 private:
  VoxelField field_;
  Trajectory trajectory_;
  CameraIntrinsics intrinsics_;
  SensorGeometry geometry_;
  int n_samples_;
};

// d/dt log L at t. Throws OutOfRange when t is outside the model's time span
// (voxel scenes); the stencil itself never leaves the trajectory.
double temporal_log_gradient(const LogRadianceModel& model, Pixel u, double t, double h);

// Presents a model as a simulator radiance source (channel chosen by the model).
class ModelSource final : public RadianceSource {
 public:
  ModelSource(const LogRadianceModel& model, int channels = 1) : model_(model), channels_(channels) {}
  int channels() const override { return channels_; }
  double log_radiance(Pixel u, double t, int) const override { return model_.log_radiance(u, t); }

 private:
  const LogRadianceModel& model_;
  int channels_;
};

}  // namespace ernf
