#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "ernf/core.hpp"
#include "ernf/fields.hpp"
#include "ernf/random.hpp"

namespace ernf {

struct LossWeights {
  double lambda_diff = 1.0;
  double lambda_grad = 0.001;
  void validate() const {
    if (!(lambda_diff >= 0.0) || !(lambda_grad >= 0.0)) fail(ErrorCode::InvalidParams, "loss weights must be >= 0");
  }
};

// ((delta - p C_p) / C_mean)^2
double loss_diff(double delta_log_pred, Polarity p, const ThresholdParams& th);

// Std-dev of the t_sam distribution relative to the interval length.
inline constexpr double kTSamRelativeSd = 0.25;

// Normal(mid, (len/4)^2) truncated to (t_ref, t_curr).
double sample_t_sam(double t_ref, double t_curr, Rng& rng);
// The same draw expressed as the fraction u in (0, 1), t_sam = t_ref + u (t_curr - t_ref).
double sample_t_sam_fraction(Rng& rng);

// |pred - target| / |target| with target = p C_p / (t_curr - t_ref).
double loss_grad(double pred_gradient, Polarity p, const ThresholdParams& th, double t_ref, double t_curr);

// ((delta - sum_p p N_p C_p) / C_mean)^2 for the events accumulated over one window.
double loss_accumulated(int n_pos, int n_neg, double delta_log_pred, const ThresholdParams& th);
double loss_accumulated(std::span<const Event> window_events, double delta_log_pred, const ThresholdParams& th);

struct TotalLossOptions {
  LossWeights weights;
  ThresholdParams thresholds;
  double tau = 0.0;
  // Events with t_prev <= t_start are first events of their pixel: no dead
  // time precedes them, so their t_ref is t_prev whatever tau is.
  double t_start = -std::numeric_limits<double>::infinity();
  // Finite-difference half-step for temporal gradients, relative to t_curr - t_prev.
  double h_rel = 1e-3;
  // t_sam of event i is drawn from Rng(seed, id_i).
  std::uint64_t seed = 0;
  int threads = 0;
  // Skip the extra model evaluations behind d_tau when tau is not learned.
  bool tau_gradient = true;
};

struct LossResult {
  double loss = 0.0;
  double mean_diff = 0.0;  // unweighted batch means of the two terms
  double mean_grad = 0.0;
  std::vector<double> grad;  // d loss / d model params
  double d_c_pos = 0.0;      // d loss / d C_{+1}, C_{-1} held fixed
  double d_tau = 0.0;        // d loss / d tau
  double samples = 0.0;      // ray samples spent on the l_diff renders
};

// Mean over the batch of lambda_diff l_diff + lambda_grad l_grad, with exact
// gradients of the resulting scalar. `ids` are stable event identifiers (e.g.
// stream indices) that seed each event's t_sam. Chunked OpenMP evaluation with
// a fixed-order reduction: bit-identical for any thread count.
LossResult total_loss(std::span<const Event> batch, std::span<const std::size_t> ids, const LogRadianceModel& model,
                      const TotalLossOptions& options);

// Plain single-threaded accumulation in event order; reference for total_loss.
LossResult total_loss_serial(std::span<const Event> batch, std::span<const std::size_t> ids,
                             const LogRadianceModel& model, const TotalLossOptions& options);

// One pixel's events over one non-overlapping time window.
struct AccumulationWindow {
  Pixel u;
  double t_begin = 0.0, t_end = 0.0;
  int n_pos = 0, n_neg = 0;
};

// Non-empty windows of length `window` tiling [t_start, t_end] at every pixel.
std::vector<AccumulationWindow> build_accumulation_windows(const EventStream& stream, double window);

// Accumulation baseline: mean of loss_accumulated over windows, predicted
// delta = log L(t_end) - log L(t_begin).
LossResult accumulated_total_loss(std::span<const AccumulationWindow> windows, const LogRadianceModel& model,
                                  const ThresholdParams& thresholds, int threads = 0);

}  // namespace ernf
