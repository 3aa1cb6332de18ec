#pragma once

#include <cstdint>
#include <vector>

#include "ernf/core.hpp"

namespace ernf {

// Continuous per-pixel log-radiance. Implementations must be safe to call
// concurrently from several threads.
class RadianceSource {
 public:
  virtual ~RadianceSource() = default;
  virtual int channels() const { return 1; }
  virtual double log_radiance(Pixel u, double t, int channel) const = 0;
};

struct SimulationParams {
  ThresholdParams thresholds;
  double sigma = 0.0;  // pixel-to-pixel threshold std-dev, log-radiance units
  double tau = 0.0;    // refractory period, s
  double t0 = 0.0;
  double t1 = 1.0;
  std::uint64_t seed = 0;
  // Upper bound on the marching step; 0 selects (t1 - t0) / 1000.
  double max_step = 0.0;
  int threads = 0;

  void validate() const;
  double resolved_max_step() const { return max_step > 0.0 ? max_step : (t1 - t0) / 1000.0; }
};

// Bisection stops once the bracket is narrower than this and the overshoot
// past the threshold is below the same number.
double bisection_tolerance(double step);

// Events of a single pixel, in time order, for thresholds already realised.
std::vector<Event> simulate_pixel(const RadianceSource& source, Pixel u, int channel,
                                  const ThresholdParams& realised, const SimulationParams& params);

// Full event generation model. Pixels are simulated independently on an
// OpenMP team; the returned stream is canonically ordered, so the result is
// bit-identical for any thread count. RGGB geometries dispatch to the mosaic
// channel of each pixel.
EventStream simulate(const RadianceSource& source, const SensorGeometry& geometry,
                     const SimulationParams& params);

// Single-threaded reference of simulate(), kept for testing.
EventStream simulate_serial(const RadianceSource& source, const SensorGeometry& geometry,
                            const SimulationParams& params);

// simulate() restricted to RGGB sensors; throws ChannelMismatch unless the
// source has 3 channels and the geometry carries the mosaic.
EventStream simulate_bayer(const RadianceSource& source, const SensorGeometry& geometry,
                           const SimulationParams& params);

}  // namespace ernf
