#include "ernf/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "ernf/random.hpp"

namespace ernf {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::RefractoryExceedsInterval: return "RefractoryExceedsInterval";
    case ErrorCode::GeometryMismatch: return "GeometryMismatch";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::NonFiniteRadiance: return "NonFiniteRadiance";
    case ErrorCode::ChannelMismatch: return "ChannelMismatch";
    case ErrorCode::DegenerateRay: return "DegenerateRay";
    case ErrorCode::EmptyInterval: return "EmptyInterval";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::NoIntervals: return "NoIntervals";
    case ErrorCode::DivergedLoss: return "DivergedLoss";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::TooSmall: return "TooSmall";
    case ErrorCode::InvalidCovariance: return "InvalidCovariance";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::CorruptFile: return "CorruptFile";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Config: return "Config";
  }
  return "Unknown";
}

int SensorGeometry::channel_of(Pixel u) const {
  if (color_filter == ColorFilter::None) return 0;
  const bool odd_row = (u.y & 1) != 0;
  const bool odd_col = (u.x & 1) != 0;
  if (!odd_row && !odd_col) return 0;
  if (odd_row && odd_col) return 2;
  return 1;
}

void SensorGeometry::validate() const {
  if (width < 1 || height < 1) fail(ErrorCode::InvalidArgument, "sensor width and height must be >= 1");
  if (channels < 1) fail(ErrorCode::InvalidArgument, "channel count must be >= 1");
  if (color_filter == ColorFilter::BayerRGGB && channels != 3)
    fail(ErrorCode::ChannelMismatch, "an RGGB sensor observes exactly 3 channels");
  if (width > 65535 || height > 65535) fail(ErrorCode::InvalidArgument, "sensor dimensions exceed 16 bits");
}

void sort_canonical(EventStream& stream) {
  const auto& g = stream.geometry;
  std::stable_sort(stream.events.begin(), stream.events.end(), [&](const Event& a, const Event& b) {
    if (a.t_curr != b.t_curr) return a.t_curr < b.t_curr;
    return g.index(a.u) < g.index(b.u);
  });
}

void ThresholdParams::validate() const {
  if (!(c_neg > 0.0) || !(c_pos > 0.0) || !std::isfinite(c_neg) || !std::isfinite(c_pos))
    fail(ErrorCode::InvalidParams, "contrast thresholds must be positive and finite");
}

ThresholdParams ThresholdMap::sample_pixel(const ThresholdParams& nominal, double sigma,
                                           std::uint64_t seed, std::size_t pixel_index) {
  if (sigma == 0.0) return nominal;
  Rng rng(seed, pixel_index);
  ThresholdParams out;
  const double inf = std::numeric_limits<double>::infinity();
  out.c_pos = sample_truncated_normal(rng, nominal.c_pos, sigma, kFloorFraction * nominal.c_pos, inf);
  out.c_neg = sample_truncated_normal(rng, nominal.c_neg, sigma, kFloorFraction * nominal.c_neg, inf);
  return out;
}

ThresholdMap ThresholdMap::sample(const SensorGeometry& geometry, const ThresholdParams& nominal,
                                  double sigma, std::uint64_t seed) {
  nominal.validate();
  if (!(sigma >= 0.0)) fail(ErrorCode::InvalidParams, "threshold sigma must be >= 0");
  ThresholdMap map;
  map.nominal_ = nominal;
  map.sigma_ = sigma;
  map.seed_ = seed;
  const std::size_t n = geometry.pixel_count();
  map.c_pos_.resize(n);
  map.c_neg_.resize(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    const auto th = sample_pixel(nominal, sigma, seed, static_cast<std::size_t>(i));
    map.c_pos_[i] = th.c_pos;
    map.c_neg_[i] = th.c_neg;
  }
  return map;
}

std::size_t ValidationReport::count(ViolationKind kind) const {
  return static_cast<std::size_t>(
      std::count_if(violations.begin(), violations.end(), [&](const Violation& v) { return v.kind == kind; }));
}

ValidationReport validate_stream(const EventStream& stream) {
  ValidationReport report;
  const auto& g = stream.geometry;
  // Last t_curr seen per pixel; unset means the pixel has not fired yet.
  std::vector<double> last(g.pixel_count(), std::numeric_limits<double>::quiet_NaN());
  auto add = [&](ViolationKind kind, std::size_t i, const std::string& msg) {
    report.violations.push_back({kind, i, msg});
  };
  for (std::size_t i = 0; i < stream.events.size(); ++i) {
    const Event& e = stream.events[i];
    if (!g.contains(e.u)) {
      std::ostringstream os;
      os << "pixel (" << e.u.x << "," << e.u.y << ") outside " << g.width << "x" << g.height;
      add(ViolationKind::OutOfBounds, i, os.str());
      continue;
    }
    if (e.p != Polarity::Positive && e.p != Polarity::Negative) add(ViolationKind::BadPolarity, i, "polarity not +/-1");
    if (!(e.t_curr > stream.t_start) || !(e.t_curr <= stream.t_end))
      add(ViolationKind::OutsideWindow, i, "t_curr outside (t_start, t_end]");
    double& prev = last[g.index(e.u)];
    const double expected_prev = std::isnan(prev) ? stream.t_start : prev;
    if (!std::isnan(prev) && !(e.t_curr > prev)) {
      std::ostringstream os;
      os << "t_curr " << e.t_curr << " does not follow " << prev;
      add(ViolationKind::NonMonotone, i, os.str());
    } else if (e.t_prev != expected_prev) {
      std::ostringstream os;
      os << "t_prev " << e.t_prev << " but previous event at this pixel is " << expected_prev;
      add(ViolationKind::BrokenLinkage, i, os.str());
    }
    if (std::isnan(prev) || e.t_curr > prev) prev = e.t_curr;
  }
  return report;
}

double derive_t_ref(const Event& event, double tau) {
  if (!(tau >= 0.0)) fail(ErrorCode::InvalidArgument, "refractory period must be >= 0");
  const double t_ref = event.t_prev + tau;
  if (!(t_ref < event.t_curr)) {
    std::ostringstream os;
    os << "t_prev + tau = " << t_ref << " >= t_curr = " << event.t_curr;
    fail(ErrorCode::RefractoryExceedsInterval, os.str());
  }
  return t_ref;
}

StreamStats stream_stats(const EventStream& stream, const EventStream* reference) {
  const auto& g = stream.geometry;
  StreamStats stats;
  stats.event_count = stream.size();
  if (reference != nullptr) {
    if (!(reference->geometry == g)) fail(ErrorCode::GeometryMismatch, "reference stream geometry differs");
    stats.sparsity = stream.empty() ? std::numeric_limits<double>::infinity()
                                    : static_cast<double>(reference->size()) / static_cast<double>(stream.size());
  }
  std::vector<double> sum(g.pixel_count(), 0.0);
  std::vector<double> last(g.pixel_count(), std::numeric_limits<double>::quiet_NaN());
  std::vector<std::size_t> pairs(g.pixel_count(), 0);
  for (const Event& e : stream.events) {
    const std::size_t k = g.index(e.u);
    if (!std::isnan(last[k])) {
      sum[k] += e.t_curr - last[k];
      ++pairs[k];
    }
    last[k] = e.t_curr;
  }
  double acc = 0.0;
  std::size_t active = 0;
  for (std::size_t k = 0; k < sum.size(); ++k) {
    if (pairs[k] == 0) continue;
    acc += sum[k] / static_cast<double>(pairs[k]);
    ++active;
  }
  stats.mean_interval = active ? acc / static_cast<double>(active) : 0.0;
  stats.equivalent_views = static_cast<double>(stats.event_count) * kBitsPerEvent /
                           (static_cast<double>(g.pixel_count()) * g.channels * kBitsPerPixelChannel);
  return stats;
}

}  // namespace ernf
