#include "ernf/scenes.hpp"

#include <algorithm>
#include <numbers>
#include <vector>

#include "ernf/random.hpp"

namespace ernf {

FunctionSource ramp_source(double slope, double offset) {
  return FunctionSource([slope, offset](Pixel, double t, int) { return offset + slope * t; });
}

FunctionSource sinusoid_source(const SensorGeometry& geometry, double amplitude, double frequency, double offset) {
  const double n = static_cast<double>(geometry.pixel_count());
  return FunctionSource(
      [=](Pixel u, double t, int) {
        const double phase = 2.0 * std::numbers::pi * static_cast<double>(geometry.index(u)) / n;
        return offset + amplitude * std::sin(2.0 * std::numbers::pi * frequency * t + phase);
      },
      geometry.channels);
}

FunctionSource random_smooth_source(std::uint64_t seed, int terms, double max_amplitude, double max_frequency) {
  return FunctionSource([=](Pixel u, double t, int channel) {
    // Coefficients are re-derived on every call from (seed, pixel, channel);
    // cheap, stateless and therefore thread-safe.
    const std::uint64_t stream = (static_cast<std::uint64_t>(u.y) << 32) ^ static_cast<std::uint64_t>(u.x) ^
                                 (static_cast<std::uint64_t>(channel) << 56);
    Rng rng(seed, stream);
    double v = 0.0;
    for (int k = 0; k < terms; ++k) {
      const double a = max_amplitude * rng.uniform();
      const double f = max_frequency * (0.1 + 0.9 * rng.uniform());
      const double ph = 2.0 * std::numbers::pi * rng.uniform();
      v += a * std::sin(2.0 * std::numbers::pi * f * t + ph);
    }
    return v;
  });
}

VoxelField make_toy_field(const ToySceneParams& params) {
  VoxelField field(params.resolution, Aabb{}, params.channels);
  const int d = params.resolution;
  constexpr double kEmptyDensity = 1e-4;
  for (int k = 0; k < d; ++k)
    for (int j = 0; j < d; ++j)
      for (int i = 0; i < d; ++i) {
        const Vec3 x = field.vertex_position(i, j, k);
        const double r = x.norm();
        // Smooth shell of width ~2 voxels so the silhouette is not aliased.
        const double edge = 2.0 / (d - 1);
        const double inside = std::clamp((params.sphere_radius - r) / edge + 0.5, 0.0, 1.0);
        const double sigma = std::max(kEmptyDensity, params.density * inside);
        field.density_raw(i, j, k) = softplus_inverse(sigma, kDensityBeta);
        for (int c = 0; c < params.channels; ++c) {
          const double ph = 0.9 * c;
          const double f = params.texture_frequency;
          // Mostly azimuthal variation: the capture orbits about z, so
          // brightness changes along z are seen far less often.
          const double tex = std::sin(f * 4.0 * x.x() + ph) * std::cos(f * 3.0 * x.y() - ph) +
                             0.6 * std::sin(f * (3.5 * (x.x() - x.y()) + 1.5 * x.z()) + 2.0 * ph);
          const double radiance = 0.5 * std::exp(params.texture_contrast * tex);
          field.color_raw(i, j, k, c) = softplus_inverse(radiance, kRadianceBeta);
        }
      }
  for (int c = 0; c < params.channels; ++c) field.background_raw(c) = softplus_inverse(params.background);
  return field;
}

CameraIntrinsics toy_intrinsics(const SensorGeometry& geometry, double distance, double half_width) {
  const double f = 0.5 * std::min(geometry.width, geometry.height) * distance / half_width;
  return {f, f, 0.5 * geometry.width, 0.5 * geometry.height};
}

VoxelField make_initial_field(int resolution, const Aabb& box, int channels, double density, double color,
                              double background) {
  VoxelField field(resolution, box, channels);
  auto p = field.params();
  const double density_raw = softplus_inverse(density, kDensityBeta);
  const double color_raw = softplus_inverse(color, kRadianceBeta);
  std::fill(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(field.color_offset()), density_raw);
  std::fill(p.begin() + static_cast<std::ptrdiff_t>(field.color_offset()),
            p.begin() + static_cast<std::ptrdiff_t>(field.background_offset()), color_raw);
  for (int c = 0; c < channels; ++c) field.background_raw(c) = softplus_inverse(background);
  return field;
}

Trajectory evaluation_views(const SpiralParams& spiral, int n) {
  if (n < 1) fail(ErrorCode::InvalidArgument, "need at least one evaluation view");
  spiral.validate();
  const double z = 0.5 * spiral.height_span;
  const double ring = std::sqrt(std::max(0.0, spiral.radius * spiral.radius - z * z));
  std::vector<PoseSample> poses(n);
  for (int i = 0; i < n; ++i) {
    const double az = 2.0 * std::numbers::pi * (i + 0.5) / n;
    poses[i].position = Vec3(ring * std::cos(az), ring * std::sin(az), z);
    poses[i].orientation = look_at(poses[i].position, Vec3::Zero());
  }
  return Trajectory(0.0, 1.0, std::move(poses));
}

}  // namespace ernf
