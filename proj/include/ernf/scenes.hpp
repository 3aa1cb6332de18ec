#pragma once

#include <cstdint>
#include <functional>

#include "ernf/fields.hpp"
#include "ernf/simulator.hpp"

namespace ernf {

// Wraps a callable (pixel, t, channel) -> log-radiance.
class FunctionSource final : public RadianceSource {
 public:
  using Fn = std::function<double(Pixel, double, int)>;
  explicit FunctionSource(Fn fn, int channels = 1) : fn_(std::move(fn)), channels_(channels) {}
  int channels() const override { return channels_; }
  double log_radiance(Pixel u, double t, int channel) const override { return fn_(u, t, channel); }

 private:
  Fn fn_;
  int channels_;
};

// log L = offset + slope * t at every pixel.
FunctionSource ramp_source(double slope, double offset = 0.0);

// log L = amplitude * sin(2 pi f t + phase(u)) + offset, with phase spread
// over pixels by their index.
FunctionSource sinusoid_source(const SensorGeometry& geometry, double amplitude, double frequency, double offset = 0.0);

// Per-pixel random smooth signal: a few sinusoids with random amplitude,
// frequency and phase drawn from the pixel's own RNG stream.
FunctionSource random_smooth_source(std::uint64_t seed, int terms = 3, double max_amplitude = 1.0,
                                    double max_frequency = 3.0);

// Toy object for voxel reconstructions: a textured opaque sphere inside [-1, 1]^3
// over a constant background. Values are set in activated units.
struct ToySceneParams {
  int resolution = 32;
  int channels = 1;
  double sphere_radius = 0.8;
  double density = 60.0;
  double background = 0.5;
  // Spatial frequency multiplier and log-amplitude of the surface texture.
  double texture_frequency = 2.0;
  double texture_contrast = 0.9;
};
VoxelField make_toy_field(const ToySceneParams& params);

// Pinhole camera centred on the sensor whose shorter image side spans
// [-half_width, half_width] world units at `distance`.
CameraIntrinsics toy_intrinsics(const SensorGeometry& geometry, double distance = 3.0, double half_width = 1.0);

// Trains-to-nothing initial state of a reconstruction field.
VoxelField make_initial_field(int resolution, const Aabb& box, int channels, double density = 1.0,
                              double color = 0.5, double background = 0.5);

// Held-out viewpoints for evaluation: n poses on the spiral's sphere at half
// its height span, azimuths offset by half a step from 0, one per second.
Trajectory evaluation_views(const SpiralParams& spiral, int n);

}  // namespace ernf
