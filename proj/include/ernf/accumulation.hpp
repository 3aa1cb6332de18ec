#pragma once

#include <cstdint>

#include "ernf/core.hpp"

namespace ernf {

// Counts and threshold statistics for one accumulation window.
struct AccumulationSpec {
  int n_pos = 0;
  int n_neg = 0;
  double c_pos = 0.25;
  double c_neg = 0.25;
  double sigma_pos = 0.0;
  double sigma_neg = 0.0;
  double cov = 0.0;  // covariance between the two thresholds of a pixel

  void validate() const;
};

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
};

// Exact moments of sum_p p N_p c_p under Gaussian thresholds.
Moments acc_moments(const AccumulationSpec& spec);

// Trials per Monte-Carlo chunk; each chunk owns Rng(seed, chunk index).
inline constexpr std::size_t kMonteCarloChunk = 8192;

// Sample moments (population variance) over `trials` draws of the bivariate
// threshold pair. Chunks are combined in index order, so the result does not
// depend on the thread count.
Moments acc_monte_carlo(const AccumulationSpec& spec, std::size_t trials, std::uint64_t seed, int threads = 0);
Moments acc_monte_carlo_serial(const AccumulationSpec& spec, std::size_t trials, std::uint64_t seed);

struct NormalizedTargets {
  double pos = 1.0;     // C_pos / C_mean
  double neg = 1.0;     // C_neg / C_mean
  double center = 1.0;  // mean of the two, always 1
  double offset = 0.0;  // half-difference / C_mean
};

NormalizedTargets normalized_targets(const ThresholdParams& th);

}  // namespace ernf
