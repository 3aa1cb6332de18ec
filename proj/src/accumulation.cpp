#include "ernf/accumulation.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "ernf/parallel.hpp"
#include "ernf/random.hpp"

namespace ernf {

void AccumulationSpec::validate() const {
  if (n_pos < 0 || n_neg < 0) fail(ErrorCode::InvalidParams, "event counts must be >= 0");
  if (!(sigma_pos >= 0.0) || !(sigma_neg >= 0.0)) fail(ErrorCode::InvalidParams, "threshold std-devs must be >= 0");
  if (!std::isfinite(c_pos) || !std::isfinite(c_neg) || !std::isfinite(cov))
    fail(ErrorCode::InvalidParams, "non-finite accumulation spec");
  if (std::abs(cov) > sigma_pos * sigma_neg) fail(ErrorCode::InvalidCovariance, "|cov| exceeds sigma_pos * sigma_neg");
}

Moments acc_moments(const AccumulationSpec& s) {
  s.validate();
  const double np = s.n_pos, nn = s.n_neg;
  return {np * s.c_pos - nn * s.c_neg,
          np * np * s.sigma_pos * s.sigma_pos + nn * nn * s.sigma_neg * s.sigma_neg - 2.0 * np * nn * s.cov};
}

namespace {

// Running count / mean / sum of squared deviations.
struct Welford {
  double n = 0.0, mean = 0.0, m2 = 0.0;
  void push(double x) {
    n += 1.0;
    const double d = x - mean;
    mean += d / n;
    m2 += d * (x - mean);
  }
  // Parallel combination of two disjoint sample sets.
  void merge(const Welford& o) {
    if (o.n == 0.0) return;
    const double total = n + o.n;
    const double d = o.mean - mean;
    mean += d * o.n / total;
    m2 += o.m2 + d * d * n * o.n / total;
    n = total;
  }
};

Welford run_chunk(const AccumulationSpec& s, std::size_t count, std::uint64_t seed, std::size_t chunk) {
  const double base = static_cast<double>(s.n_pos) * s.c_pos - static_cast<double>(s.n_neg) * s.c_neg;
  const double sp = s.sigma_pos, sn = s.sigma_neg;
  const double rho = (sp > 0.0 && sn > 0.0) ? std::clamp(s.cov / (sp * sn), -1.0, 1.0) : 0.0;
  const double rho_c = std::sqrt(1.0 - rho * rho);
  Rng rng(seed, chunk);
  Welford w;
  for (std::size_t i = 0; i < count; ++i) {
    const double z1 = rng.normal();
    const double z2 = rng.normal();
    // Threshold deviations; kept apart from the mean so correlated terms cancel exactly.
    const double dev = s.n_pos * sp * z1 - s.n_neg * sn * (rho * z1 + rho_c * z2);
    w.push(base + dev);
  }
  return w;
}

Moments finish(const Welford& w) { return {w.mean, w.m2 / w.n}; }

}  // namespace

Moments acc_monte_carlo(const AccumulationSpec& spec, std::size_t trials, std::uint64_t seed, int threads) {
  spec.validate();
  if (trials < 1) fail(ErrorCode::InvalidArgument, "trials must be >= 1");
  const std::size_t chunks = chunk_count(trials, kMonteCarloChunk);
  std::vector<Welford> parts(chunks);
  parallel_for(chunks, threads, [&](std::size_t c) {
    const std::size_t lo = c * kMonteCarloChunk;
    parts[c] = run_chunk(spec, std::min(trials, lo + kMonteCarloChunk) - lo, seed, c);
  });
  Welford total;
  for (const Welford& p : parts) total.merge(p);
  return finish(total);
}

Moments acc_monte_carlo_serial(const AccumulationSpec& spec, std::size_t trials, std::uint64_t seed) {
  spec.validate();
  if (trials < 1) fail(ErrorCode::InvalidArgument, "trials must be >= 1");
  Welford total;
  for (std::size_t c = 0, lo = 0; lo < trials; ++c, lo += kMonteCarloChunk)
    total.merge(run_chunk(spec, std::min(trials, lo + kMonteCarloChunk) - lo, seed, c));
  return finish(total);
}

NormalizedTargets normalized_targets(const ThresholdParams& th) {
  th.validate();
  const double offset = th.half_difference() / th.mean();
  NormalizedTargets n;
  n.pos = 1.0 + offset;
  n.neg = 1.0 - offset;
  n.center = 0.5 * (n.pos + n.neg);
  n.offset = offset;
  return n;
}

}  // namespace ernf
