#include "ernf/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ernf/random.hpp"

namespace ernf {

namespace {

double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace

LearnableIntrinsics LearnableIntrinsics::make(double c_neg, double ratio, double tau_max, double tau) {
  if (!(c_neg > 0.0) || !(ratio > 0.0)) fail(ErrorCode::InvalidParams, "C_neg and ratio must be > 0");
  if (!(tau_max >= 0.0)) fail(ErrorCode::InvalidParams, "tau_max must be >= 0");
  LearnableIntrinsics li;
  li.c_neg = c_neg;
  li.ratio_raw = softplus_inverse(ratio);
  li.tau_max = tau_max;
  if (tau_max > 0.0) li.tau_raw = std::clamp(logit(tau / tau_max), tau_raw_min(), tau_raw_max());
  return li;
}

double LearnableIntrinsics::tau_raw_min() { return logit(kTauClamp); }
double LearnableIntrinsics::tau_raw_max() { return logit(1.0 - kTauClamp); }

double LearnableIntrinsics::tau() const {
  return tau_max * std::clamp(sigmoid(tau_raw), kTauClamp, 1.0 - kTauClamp);
}

double LearnableIntrinsics::tau_slope() const {
  const double s = std::clamp(sigmoid(tau_raw), kTauClamp, 1.0 - kTauClamp);
  return tau_max * s * (1.0 - s);
}

double tau_max_from_stream(const EventStream& stream) {
  double best = std::numeric_limits<double>::infinity();
  std::vector<char> seen(stream.geometry.pixel_count(), 0);
  for (const Event& e : stream.events) {
    char& s = seen[stream.geometry.index(e.u)];
    if (s) best = std::min(best, e.t_curr - e.t_prev);
    s = 1;
  }
  if (!std::isfinite(best)) fail(ErrorCode::NoIntervals, "no pixel has two events");
  return best;
}

void TrainConfig::validate() const {
  if (iterations < 0) fail(ErrorCode::InvalidParams, "iterations must be >= 0");
  if (!(learning_rate > 0.0) || !(decay > 0.0) || !(threshold_lr_multiplier > 0.0) ||
      !(refractory_range_multiplier > 0.0))
    fail(ErrorCode::InvalidParams, "learning rates must be > 0");
  if (!(weight_decay >= 0.0)) fail(ErrorCode::InvalidParams, "weight decay must be >= 0");
  if (!(sample_budget > 0.0)) fail(ErrorCode::InvalidParams, "sample budget must be > 0");
  for (std::size_t i = 0; i < milestones.size(); ++i)
    if (!(milestones[i] > 0.0 && milestones[i] < 1.0) || (i > 0 && !(milestones[i] > milestones[i - 1])))
      fail(ErrorCode::InvalidParams, "milestones must increase inside (0, 1)");
  if (!(known_tau >= 0.0)) fail(ErrorCode::InvalidParams, "tau must be >= 0");
  if (!(accumulation_window > 0.0)) fail(ErrorCode::InvalidParams, "accumulation window must be > 0");
  if (!(h_rel > 0.0)) fail(ErrorCode::InvalidParams, "h_rel must be > 0");
  weights.validate();
}

double TrainConfig::lr_at(int iteration) const {
  double lr = learning_rate;
  for (double m : milestones)
    if (static_cast<double>(iteration) >= m * iterations) lr *= decay;
  return lr;
}

void adam_step(std::span<double> params, std::span<const double> grad, AdamMoments& mo, double lr, int t) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  if (mo.m.size() != params.size()) {
    mo.m.assign(params.size(), 0.0);
    mo.v.assign(params.size(), 0.0);
  }
  const double c1 = 1.0 - std::pow(b1, t), c2 = 1.0 - std::pow(b2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    mo.m[i] = b1 * mo.m[i] + (1.0 - b1) * grad[i];
    mo.v[i] = b2 * mo.v[i] + (1.0 - b2) * grad[i] * grad[i];
    params[i] -= lr * (mo.m[i] / c1) / (std::sqrt(mo.v[i] / c2) + eps);
  }
}

double samples_per_item(const LogRadianceModel& model, const TrainConfig& config) {
  if (config.loss == TrainLoss::Accumulation) return 2.0 * model.samples_per_query();
  const double queries = (config.weights.lambda_diff > 0.0 ? 2.0 : 0.0) + (config.weights.lambda_grad > 0.0 ? 2.0 : 0.0);
  return std::max(1.0, queries) * model.samples_per_query();
}

std::size_t batch_size_for(const LogRadianceModel& model, const TrainConfig& config, std::size_t available) {
  const auto b = static_cast<std::size_t>(std::llround(config.sample_budget / samples_per_item(model, config)));
  return std::clamp<std::size_t>(b, 1, std::max<std::size_t>(available, 1));
}

namespace {

// Seeded Fisher-Yates; std::shuffle's algorithm is implementation-defined.
void shuffle(std::vector<std::size_t>& v, std::uint64_t seed, std::uint64_t epoch) {
  Rng rng(seed, epoch);
  std::iota(v.begin(), v.end(), std::size_t{0});
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.next_u64() % i]);
}

// Streams fixed-size batches drawn without replacement within each epoch.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::size_t batch, std::uint64_t seed) : order_(n), batch_(batch), seed_(seed) {
    shuffle(order_, seed_, epoch_);
  }
  std::span<const std::size_t> next() {
    if (cursor_ + batch_ > order_.size()) {
      shuffle(order_, seed_, ++epoch_);
      cursor_ = 0;
    }
    std::span<const std::size_t> out(order_.data() + cursor_, batch_);
    cursor_ += batch_;
    return out;
  }

 private:
  std::vector<std::size_t> order_;
  std::size_t batch_;
  std::uint64_t seed_;
  std::uint64_t epoch_ = 0;
  std::size_t cursor_ = 0;
};

constexpr std::uint64_t kBatchStream = 0x62617463ULL;
constexpr std::uint64_t kTSamStream = 0x7473616dULL;

}  // namespace

TrainState fit(const EventStream& stream, LogRadianceModel& model, const TrainConfig& config,
               const LearnableIntrinsics& init, const ProgressFn& progress) {
  config.validate();
  const ValidationReport report = validate_stream(stream);
  if (!report.ok()) fail(ErrorCode::InvalidArgument, "event stream fails validation");
  if (stream.empty()) fail(ErrorCode::EmptyBatch, "no events to train on");
  if (config.learn_refractory && !(init.tau_max > 0.0))
    fail(ErrorCode::InvalidParams, "learning tau needs tau_max > 0");

  TrainState st;
  st.intrinsics = init;
  auto params = model.params();
  const bool accumulation = config.loss == TrainLoss::Accumulation;

  std::vector<AccumulationWindow> windows;
  if (accumulation) windows = build_accumulation_windows(stream, config.accumulation_window);
  const std::size_t items = accumulation ? windows.size() : stream.size();
  if (items == 0) fail(ErrorCode::EmptyBatch, "no training items");
  st.batch_size = batch_size_for(model, config, items);
  st.batch_samples = static_cast<double>(st.batch_size) * samples_per_item(model, config);

  const double slope0 = init.tau_max > 0.0 ? init.tau_slope() : 1.0;
  const double tau_lr_scale = config.refractory_range_multiplier * init.tau_max / slope0;

  BatchSampler sampler(items, st.batch_size, mix_seed(config.seed, kBatchStream));
  std::vector<Event> batch(st.batch_size);
  std::vector<AccumulationWindow> window_batch(accumulation ? st.batch_size : 0);
  std::vector<double> grad;
  const std::size_t np = params.size();

  for (int it = 0; it < config.iterations; ++it) {
    const auto ids = sampler.next();
    LossResult r;
    const double tau = config.learn_refractory ? st.intrinsics.tau() : config.known_tau;
    if (accumulation) {
      for (std::size_t i = 0; i < ids.size(); ++i) window_batch[i] = windows[ids[i]];
      r = accumulated_total_loss(window_batch, model, st.intrinsics.thresholds(), config.threads);
    } else {
      for (std::size_t i = 0; i < ids.size(); ++i) batch[i] = stream.events[ids[i]];
      TotalLossOptions o;
      o.weights = config.weights;
      o.thresholds = st.intrinsics.thresholds();
      o.tau = tau;
      o.t_start = stream.t_start;
      o.h_rel = config.h_rel;
      o.seed = mix_seed(mix_seed(config.seed, kTSamStream), static_cast<std::uint64_t>(it));
      o.threads = config.threads;
      o.tau_gradient = config.learn_refractory;
      r = total_loss(batch, ids, model, o);
    }

    grad = std::move(r.grad);
    for (std::size_t k = 0; k < np; ++k) grad[k] += config.weight_decay * params[k];
    for (double g : grad)
      if (!std::isfinite(g)) fail(ErrorCode::DivergedLoss, "non-finite gradient");

    const double lr = config.lr_at(it);
    adam_step(params, grad, st.field_moments, lr, it + 1);

    if (config.learn_threshold || config.learn_refractory) {
      LearnableIntrinsics& li = st.intrinsics;
      double raw[2] = {li.ratio_raw, li.tau_raw};
      const double g[2] = {config.learn_threshold ? r.d_c_pos * li.c_neg * softplus_slope(li.ratio_raw) : 0.0,
                           config.learn_refractory ? r.d_tau * li.tau_slope() : 0.0};
      if (st.intrinsic_moments.m.size() != 2) st.intrinsic_moments = {{0.0, 0.0}, {0.0, 0.0}};
      // Each intrinsic has its own rate, so step them one at a time.
      AdamMoments one;
      for (int k = 0; k < 2; ++k) {
        const bool on = k == 0 ? config.learn_threshold : config.learn_refractory;
        if (!on) continue;
        one.m = {st.intrinsic_moments.m[k]};
        one.v = {st.intrinsic_moments.v[k]};
        const double klr = k == 0 ? lr * config.threshold_lr_multiplier : lr * tau_lr_scale;
        adam_step(std::span<double>(&raw[k], 1), std::span<const double>(&g[k], 1), one, klr, it + 1);
        st.intrinsic_moments.m[k] = one.m[0];
        st.intrinsic_moments.v[k] = one.v[0];
      }
      li.ratio_raw = raw[0];
      li.tau_raw = std::clamp(raw[1], LearnableIntrinsics::tau_raw_min(), LearnableIntrinsics::tau_raw_max());
      if (!std::isfinite(li.ratio_raw) || !std::isfinite(li.tau_raw))
        fail(ErrorCode::DivergedLoss, "non-finite intrinsics");
    }

    st.iteration = it + 1;
    const TraceEntry entry{it, r.loss, st.intrinsics.ratio(), config.learn_refractory ? st.intrinsics.tau() : tau};
    st.trace.push_back(entry);
    if (progress && config.log_every > 0 && (it % config.log_every == 0 || it + 1 == config.iterations))
      progress(entry);
  }

  st.params.assign(params.begin(), params.end());
  return st;
}

}  // namespace ernf
