#pragma once

#include <cstdint>
#include <random>

namespace ernf {

// SplitMix64 finalizer. Used to derive independent per-pixel / per-event /
// per-chunk seeds from a single user seed so results never depend on which
// worker handled which item.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

// Thin wrapper over mt19937_64 with distribution code we own, because the
// standard distributions are implementation-defined and would break
// cross-toolchain reproducibility of simulated files.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t seed, std::uint64_t stream) : engine_(mix_seed(seed, stream)) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform on [0, 1).
  double uniform();
  // Uniform on (0, 1).
  double uniform_open();
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Normal(mean, sd^2) conditioned on (lo, hi) by plain rejection. Callers keep
// the acceptance region wide (the t_sam case accepts ~95.4% of draws).
double sample_truncated_normal(Rng& rng, double mean, double sd, double lo, double hi);

}  // namespace ernf
