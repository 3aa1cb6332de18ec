#include "ernf/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ernf/parallel.hpp"

namespace ernf {

namespace {

// Sub-samples inspected inside a step before bisecting, so that when both
// thresholds are crossed within one step the earlier crossing is found.
constexpr int kSubSamples = 8;
constexpr int kMaxBisections = 200;
// Halving floor, relative to the maximum step.
constexpr double kMinStepFraction = 0x1.0p-30;

void check_geometry_channels(const RadianceSource& source, const SensorGeometry& geometry) {
  geometry.validate();
  if (geometry.color_filter == ColorFilter::BayerRGGB && source.channels() != 3)
    fail(ErrorCode::ChannelMismatch, "RGGB sensor needs a 3-channel radiance source");
}

struct PixelSampler {
  const RadianceSource& source;
  Pixel u;
  int channel;

  double operator()(double t) const {
    const double v = source.log_radiance(u, t, channel);
    if (!std::isfinite(v)) {
      std::ostringstream os;
      os << "log-radiance at pixel (" << u.x << "," << u.y << "), t = " << t << " is " << v;
      fail(ErrorCode::NonFiniteRadiance, os.str());
    }
    return v;
  }
};

}  // namespace

void SimulationParams::validate() const {
  thresholds.validate();
  if (!(t1 > t0)) fail(ErrorCode::InvalidParams, "simulation window needs t1 > t0");
  if (!(tau >= 0.0)) fail(ErrorCode::InvalidParams, "refractory period must be >= 0");
  if (!(sigma >= 0.0)) fail(ErrorCode::InvalidParams, "threshold sigma must be >= 0");
  if (max_step < 0.0) fail(ErrorCode::InvalidParams, "max_step must be >= 0");
}

double bisection_tolerance(double step) { return std::min(1e-9, 1e-6 * step); }

std::vector<Event> simulate_pixel(const RadianceSource& source, Pixel u, int channel,
                                  const ThresholdParams& th, const SimulationParams& params) {
  const PixelSampler f{source, u, channel};
  const double max_step = params.resolved_max_step();
  const double min_step = max_step * kMinStepFraction;

  std::vector<Event> out;
  double t = params.t0;
  double ref = f(t);
  double t_last = params.t0;
  double step = max_step;

  while (t < params.t1) {
    const double tn = std::min(t + step, params.t1);
    const double d = f(tn) - ref;
    if (d < th.c_pos && d > -th.c_neg) {
      t = tn;
      step = std::min(2.0 * step, max_step);
      continue;
    }
    const double c_hit = d >= th.c_pos ? th.c_pos : th.c_neg;
    if (std::abs(d) > 2.0 * c_hit && step > min_step) {
      step *= 0.5;
      continue;
    }

    // Earliest sub-sample at which either threshold is reached.
    double a = t, b = tn;
    Polarity p = Polarity::Positive;
    for (int k = 1; k <= kSubSamples; ++k) {
      const double s = k == kSubSamples ? tn : t + (tn - t) * k / kSubSamples;
      const double ds = f(s) - ref;
      if (ds >= th.c_pos || ds <= -th.c_neg) {
        b = s;
        p = ds >= th.c_pos ? Polarity::Positive : Polarity::Negative;
        break;
      }
      a = s;
    }
    const double ps = sign(p);
    const double c = th.of(p);
    // g >= 0 once the threshold of polarity p is reached; g(a) < 0 <= g(b).
    auto g = [&](double s) { return ps * (f(s) - ref) - c; };
    const double tol = bisection_tolerance(step);
    double gb = g(b);
    for (int it = 0; it < kMaxBisections && (b - a > tol || gb > tol); ++it) {
      const double m = 0.5 * (a + b);
      if (!(m > a && m < b)) break;
      const double gm = g(m);
      if (gm >= 0.0) {
        b = m;
        gb = gm;
      } else {
        a = m;
      }
    }

    out.push_back({u, p, t_last, b});
    t_last = b;
    if (params.tau == 0.0) {
      // Reference moves to the crossing level itself, so tolerances never accumulate.
      ref += ps * c;
      t = b;
      // A discontinuous source can leave the pixel beyond a threshold already.
      const double d_now = f(t) - ref;
      if (d_now >= th.c_pos || d_now <= -th.c_neg) ref = f(t);
    } else {
      const double t_active = b + params.tau;
      if (t_active >= params.t1) break;
      ref = f(t_active);
      t = t_active;
    }
  }
  return out;
}

namespace {

EventStream assemble(const SensorGeometry& geometry, const SimulationParams& params,
                     std::vector<std::vector<Event>>& per_pixel) {
  EventStream stream;
  stream.geometry = geometry;
  stream.t_start = params.t0;
  stream.t_end = params.t1;
  std::size_t total = 0;
  for (const auto& v : per_pixel) total += v.size();
  stream.events.reserve(total);
  for (auto& v : per_pixel) stream.events.insert(stream.events.end(), v.begin(), v.end());
  sort_canonical(stream);
  return stream;
}

}  // namespace

EventStream simulate(const RadianceSource& source, const SensorGeometry& geometry,
                     const SimulationParams& params) {
  params.validate();
  check_geometry_channels(source, geometry);
  std::vector<std::vector<Event>> per_pixel(geometry.pixel_count());
  parallel_for(per_pixel.size(), params.threads, [&](std::size_t i) {
    const Pixel u = geometry.pixel(i);
    const auto th = ThresholdMap::sample_pixel(params.thresholds, params.sigma, params.seed, i);
    per_pixel[i] = simulate_pixel(source, u, geometry.channel_of(u), th, params);
  });
  return assemble(geometry, params, per_pixel);
}

EventStream simulate_serial(const RadianceSource& source, const SensorGeometry& geometry,
                            const SimulationParams& params) {
  params.validate();
  check_geometry_channels(source, geometry);
  std::vector<std::vector<Event>> per_pixel(geometry.pixel_count());
  for (std::size_t i = 0; i < per_pixel.size(); ++i) {
    const Pixel u = geometry.pixel(i);
    const auto th = ThresholdMap::sample_pixel(params.thresholds, params.sigma, params.seed, i);
    per_pixel[i] = simulate_pixel(source, u, geometry.channel_of(u), th, params);
  }
  return assemble(geometry, params, per_pixel);
}

EventStream simulate_bayer(const RadianceSource& source, const SensorGeometry& geometry,
                           const SimulationParams& params) {
  if (geometry.color_filter != ColorFilter::BayerRGGB)
    fail(ErrorCode::ChannelMismatch, "simulate_bayer needs an RGGB sensor geometry");
  if (source.channels() != 3) fail(ErrorCode::ChannelMismatch, "simulate_bayer needs a 3-channel source");
  return simulate(source, geometry, params);
}

}  // namespace ernf
