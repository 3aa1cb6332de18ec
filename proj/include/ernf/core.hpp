#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ernf/error.hpp"

namespace ernf {

struct Pixel {
  int x = 0;
  int y = 0;
  friend bool operator==(const Pixel&, const Pixel&) = default;
};

enum class Polarity : std::int8_t { Negative = -1, Positive = +1 };

inline double sign(Polarity p) { return p == Polarity::Positive ? 1.0 : -1.0; }

enum class ColorFilter : std::uint8_t { None = 0, BayerRGGB = 1 };

struct SensorGeometry {
  int width = 1;
  int height = 1;
  ColorFilter color_filter = ColorFilter::None;
  // Channel count of the radiance being observed (3 for RGGB sensors).
  int channels = 1;

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  std::size_t index(Pixel u) const { return static_cast<std::size_t>(u.y) * width + u.x; }
  Pixel pixel(std::size_t index) const {
    return {static_cast<int>(index % width), static_cast<int>(index / width)};
  }
  bool contains(Pixel u) const { return u.x >= 0 && u.y >= 0 && u.x < width && u.y < height; }
  // Mosaic channel sampled by pixel u (R at even/even, G on the off-diagonal, B at odd/odd).
  int channel_of(Pixel u) const;
  void validate() const;

  friend bool operator==(const SensorGeometry&, const SensorGeometry&) = default;
};

struct Event {
  Pixel u;
  Polarity p = Polarity::Positive;
  double t_prev = 0.0;  // seconds; stream start for a pixel's first event
  double t_curr = 0.0;  // seconds
};

// Events are kept in canonical order: ascending t_curr, ties by row-major pixel index.
struct EventStream {
  SensorGeometry geometry;
  std::vector<Event> events;
  double t_start = 0.0;
  double t_end = 0.0;

  std::size_t size() const { return events.size(); }
  bool empty() const { return events.empty(); }
};

void sort_canonical(EventStream& stream);

struct ThresholdParams {
  double c_neg = 0.25;
  double c_pos = 0.25;

  static ThresholdParams from_ratio(double c_neg, double ratio) { return {c_neg, c_neg * ratio}; }

  double mean() const { return 0.5 * (c_neg + c_pos); }
  double half_difference() const { return 0.5 * (c_pos - c_neg); }
  double ratio() const { return c_pos / c_neg; }
  double of(Polarity p) const { return p == Polarity::Positive ? c_pos : c_neg; }
  void validate() const;
};

// Per-pixel realisation of the contrast thresholds. Each pixel draws its two
// thresholds once from its own RNG stream, so the map is independent of
// evaluation order and of how pixels are scheduled.
class ThresholdMap {
 public:
  // Lower truncation point of the Gaussian, as a fraction of the nominal threshold.
  static constexpr double kFloorFraction = 0.01;

  static ThresholdMap sample(const SensorGeometry& geometry, const ThresholdParams& nominal,
                             double sigma, std::uint64_t seed);
  static ThresholdParams sample_pixel(const ThresholdParams& nominal, double sigma,
                                      std::uint64_t seed, std::size_t pixel_index);

  const ThresholdParams& nominal() const { return nominal_; }
  double sigma() const { return sigma_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t size() const { return c_pos_.size(); }
  double at(std::size_t pixel_index, Polarity p) const {
    return p == Polarity::Positive ? c_pos_[pixel_index] : c_neg_[pixel_index];
  }
  const std::vector<double>& positive() const { return c_pos_; }
  const std::vector<double>& negative() const { return c_neg_; }

 private:
  ThresholdParams nominal_;
  double sigma_ = 0.0;
  std::uint64_t seed_ = 0;
  std::vector<double> c_pos_, c_neg_;
};

enum class ViolationKind { NonMonotone, BrokenLinkage, OutOfBounds, OutsideWindow, BadPolarity };

struct Violation {
  ViolationKind kind;
  std::size_t event_index;
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::size_t count(ViolationKind kind) const;
};

ValidationReport validate_stream(const EventStream& stream);

// t_ref = t_prev + tau. Throws RefractoryExceedsInterval when the result would
// not precede t_curr, i.e. tau is inconsistent with this event.
double derive_t_ref(const Event& event, double tau);

struct StreamStats {
  std::size_t event_count = 0;
  // Mean over pixels (with at least one pair) of the mean consecutive-event interval.
  double mean_interval = 0.0;
  std::optional<double> sparsity;  // |reference| / |stream|
  double equivalent_views = 0.0;
};

// Storage cost of one event and of one image sample, used for the
// equivalent-view statistic (2x11 position bits + 1 polarity bit + 24 time bits).
inline constexpr double kBitsPerEvent = 47.0;
inline constexpr double kBitsPerPixelChannel = 8.0;

StreamStats stream_stats(const EventStream& stream, const EventStream* reference = nullptr);

}  // namespace ernf
