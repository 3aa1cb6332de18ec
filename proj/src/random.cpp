#include "ernf/random.hpp"

#include <cmath>
#include <limits>

#include "ernf/error.hpp"

namespace ernf {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::uniform_open() {
  double u;
  do {
    u = uniform();
  } while (u == 0.0);
  return u;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Marsaglia polar method.
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double m = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * m;
  has_spare_ = true;
  return u * m;
}

double sample_truncated_normal(Rng& rng, double mean, double sd, double lo, double hi) {
  if (!(hi > lo)) fail(ErrorCode::EmptyInterval, "truncation interval is empty");
  if (sd == 0.0) {
    if (mean > lo && mean < hi) return mean;
    fail(ErrorCode::InvalidArgument, "degenerate normal outside truncation interval");
  }
  for (int attempt = 0; attempt < 1'000'000; ++attempt) {
    const double x = rng.normal(mean, sd);
    if (x > lo && x < hi) return x;
  }
  fail(ErrorCode::InvalidArgument, "truncated normal rejection did not terminate");
}

}  // namespace ernf
