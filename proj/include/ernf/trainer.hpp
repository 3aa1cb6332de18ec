#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ernf/core.hpp"
#include "ernf/fields.hpp"
#include "ernf/losses.hpp"

namespace ernf {

// Lower/upper clamp of the refractory sigmoid, as a fraction of tau_max.
inline constexpr double kTauClamp = 0.01;

// Learnable sensor intrinsics. C_neg is fixed; C_pos = C_neg * softplus(ratio_raw);
// tau = tau_max * clamp(sigmoid(tau_raw), kTauClamp, 1 - kTauClamp).
struct LearnableIntrinsics {
  double c_neg = 0.25;
  double ratio_raw = 0.0;
  double tau_raw = 0.0;
  double tau_max = 0.0;

  static LearnableIntrinsics make(double c_neg, double ratio, double tau_max = 0.0, double tau = 0.0);

  double ratio() const { return softplus(ratio_raw); }
  double c_pos() const { return c_neg * ratio(); }
  ThresholdParams thresholds() const { return {c_neg, c_pos()}; }
  double tau() const;
  // d tau / d tau_raw inside the clamp range.
  double tau_slope() const;
  // Raw bounds equivalent to the clamp.
  static double tau_raw_min();
  static double tau_raw_max();
};

// Minimum consecutive-event interval over all pixels (first events excluded).
double tau_max_from_stream(const EventStream& stream);

enum class TrainLoss { Event, Accumulation };

struct TrainConfig {
  int iterations = 4000;
  double learning_rate = 0.01;
  double decay = 0.33;
  std::vector<double> milestones{0.5, 0.75, 0.9};
  double threshold_lr_multiplier = 10.0;
  // Refractory rate in tau units, as a multiple of tau_max, times the base rate;
  // converted to the raw domain through the sigmoid slope at initialisation.
  double refractory_range_multiplier = 50.0;
  double weight_decay = 1e-6;
  double sample_budget = 65536.0;  // ray samples per batch
  LossWeights weights;
  double h_rel = 1e-3;

  bool learn_threshold = false;
  bool learn_refractory = false;
  // tau used for t_ref when it is not learned; 0 reproduces t_ref = t_prev.
  double known_tau = 0.0;

  TrainLoss loss = TrainLoss::Event;
  double accumulation_window = 1.0 / 24.0;  // seconds

  std::uint64_t seed = 0;
  int threads = 0;
  int log_every = 0;  // progress callback period, 0 = never

  void validate() const;
  double lr_at(int iteration) const;
};

struct TraceEntry {
  int iteration = 0;
  double loss = 0.0;
  double ratio = 0.0;
  double tau = 0.0;
};

struct AdamMoments {
  std::vector<double> m, v;
};

struct TrainState {
  std::vector<double> params;
  LearnableIntrinsics intrinsics;
  AdamMoments field_moments;
  AdamMoments intrinsic_moments;  // [ratio_raw, tau_raw]
  int iteration = 0;
  std::vector<TraceEntry> trace;
  std::size_t batch_size = 0;
  double batch_samples = 0.0;  // ray samples per batch actually used
};

// One bias-corrected Adam step (beta1 0.9, beta2 0.999, eps 1e-8) at step count t >= 1.
void adam_step(std::span<double> params, std::span<const double> grad, AdamMoments& moments, double lr, int t);

// Ray samples the loss spends per event (or per window for the accumulation loss).
double samples_per_item(const LogRadianceModel& model, const TrainConfig& config);
std::size_t batch_size_for(const LogRadianceModel& model, const TrainConfig& config, std::size_t available);

using ProgressFn = std::function<void(const TraceEntry&)>;

// Trains `model` in place on `stream` and returns the final state.
TrainState fit(const EventStream& stream, LogRadianceModel& model, const TrainConfig& config,
               const LearnableIntrinsics& init, const ProgressFn& progress = {});

}  // namespace ernf
