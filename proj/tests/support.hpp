#pragma once

// Hand-rolled generators, finite-difference helpers and a scratch directory
// shared by the unit, property and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <unistd.h>

#include "ernf/core.hpp"
#include "ernf/fields.hpp"
#include "ernf/random.hpp"
#include "ernf/scenes.hpp"
#include "ernf/trajectory.hpp"

namespace ernf::test {

// Independent generator for test inputs; never shares state with library RNGs.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : engine_(seed * 0x9E3779B97F4A7C15ULL + 17) {}
  double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  // Log-uniform on [lo, hi], lo > 0.
  double log_uniform(double lo, double hi) { return std::exp(uniform(std::log(lo), std::log(hi))); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }
  double normal(double mean = 0.0, double sd = 1.0) { return std::normal_distribution<double>(mean, sd)(engine_); }
  bool coin() { return integer(0, 1) == 1; }
  Polarity polarity() { return coin() ? Polarity::Positive : Polarity::Negative; }
  std::uint64_t seed() { return engine_(); }
  ThresholdParams thresholds(double ratio_lo = 0.01, double ratio_hi = 100.0) {
    const double c_neg = log_uniform(0.05, 1.0);
    return ThresholdParams::from_ratio(c_neg, log_uniform(ratio_lo, ratio_hi));
  }
  Quat rotation() {
    Quat q(normal(), normal(), normal(), normal());
    q.normalize();
    return q;
  }

 private:
  std::mt19937_64 engine_;
};

inline double rel_err(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Central difference of f with respect to params[k], restoring the value.
inline double central_difference(std::span<double> params, std::size_t k, double h, const std::function<double()>& f) {
  const double x = params[k];
  params[k] = x + h;
  const double fp = f();
  params[k] = x - h;
  const double fm = f();
  params[k] = x;
  return (fp - fm) / (2.0 * h);
}

// Random raw values around a half-transparent, mid-grey field.
inline VoxelField random_voxel_field(Gen& g, int resolution = 4, int channels = 1) {
  VoxelField f(resolution, Aabb{}, channels);
  auto p = f.params();
  for (std::size_t i = 0; i < f.color_offset(); ++i) p[i] = g.uniform(-0.01, 0.05);
  for (std::size_t i = f.color_offset(); i < p.size(); ++i) p[i] = g.uniform(-1.0, 1.0);
  return f;
}

inline TemporalSignalField random_signal_field(Gen& g, const SensorGeometry& geometry, int harmonics, double t0,
                                               double period, double scale = 0.5) {
  TemporalSignalField f(geometry, harmonics, t0, period);
  for (double& v : f.params()) v = g.uniform(-scale, scale);
  return f;
}

// A camera slowly orbiting the unit box, looking at its centre.
inline Trajectory orbit(double t0, double t1, double rate = 200.0, double radius = 3.0) {
  SpiralParams sp;
  sp.radius = radius;
  sp.height_span = 1.0;
  sp.revolutions = 0.25 * (t1 - t0);
  sp.duration = t1 - t0;
  sp.rate = rate;
  sp.t_start = t0;
  return generate_spiral(sp);
}

inline SensorGeometry mono(int w, int h) {
  SensorGeometry g;
  g.width = w;
  g.height = h;
  return g;
}

// A valid stream with random per-pixel event times and polarities.
inline EventStream random_stream(Gen& g, const SensorGeometry& geometry, double t0, double t1, int max_per_pixel) {
  EventStream s;
  s.geometry = geometry;
  s.t_start = t0;
  s.t_end = t1;
  for (std::size_t i = 0; i < geometry.pixel_count(); ++i) {
    const int n = g.integer(0, max_per_pixel);
    std::vector<double> ts;
    for (int k = 0; k < n; ++k) ts.push_back(g.uniform(t0, t1));
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
    double prev = t0;
    for (double t : ts) {
      if (!(t > prev)) continue;
      s.events.push_back({geometry.pixel(i), g.polarity(), prev, t});
      prev = t;
    }
  }
  sort_canonical(s);
  return s;
}

// Unique scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("ernf_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace ernf::test
