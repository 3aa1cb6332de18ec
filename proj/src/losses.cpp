#include "ernf/losses.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "ernf/parallel.hpp"

namespace ernf {

double loss_diff(double delta_log_pred, Polarity p, const ThresholdParams& th) {
  const double r = (delta_log_pred - sign(p) * th.of(p)) / th.mean();
  return r * r;
}

double sample_t_sam_fraction(Rng& rng) { return sample_truncated_normal(rng, 0.5, kTSamRelativeSd, 0.0, 1.0); }

double sample_t_sam(double t_ref, double t_curr, Rng& rng) {
  if (!(t_curr > t_ref)) fail(ErrorCode::EmptyInterval, "t_sam needs t_ref < t_curr");
  return t_ref + sample_t_sam_fraction(rng) * (t_curr - t_ref);
}

double loss_grad(double pred_gradient, Polarity p, const ThresholdParams& th, double t_ref, double t_curr) {
  if (!(t_curr > t_ref)) fail(ErrorCode::EmptyInterval, "t_ref must precede t_curr");
  const double target = sign(p) * th.of(p) / (t_curr - t_ref);
  return std::abs(pred_gradient - target) / std::abs(target);
}

double loss_accumulated(int n_pos, int n_neg, double delta_log_pred, const ThresholdParams& th) {
  const double target = n_pos * th.c_pos - n_neg * th.c_neg;
  const double r = (delta_log_pred - target) / th.mean();
  return r * r;
}

double loss_accumulated(std::span<const Event> window_events, double delta_log_pred, const ThresholdParams& th) {
  int n_pos = 0, n_neg = 0;
  for (const Event& e : window_events) (e.p == Polarity::Positive ? n_pos : n_neg)++;
  return loss_accumulated(n_pos, n_neg, delta_log_pred, th);
}

namespace {

struct Partial {
  double weighted = 0.0, diff = 0.0, grad_term = 0.0, d_c_pos = 0.0, d_tau = 0.0;
  void add(const Partial& o) {
    weighted += o.weighted;
    diff += o.diff;
    grad_term += o.grad_term;
    d_c_pos += o.d_c_pos;
    d_tau += o.d_tau;
  }
};

// Loss of one event with its gradients scaled by `scale` (= 1/|B|).
Partial event_loss(const Event& e, std::size_t id, const LogRadianceModel& model, const TotalLossOptions& o,
                   double scale, std::span<double> grad) {
  const ThresholdParams& th = o.thresholds;
  const double s = sign(e.p);
  const double cp = th.of(e.p);
  const double cm = th.mean();
  const bool first = e.t_prev <= o.t_start;
  const double tau = first ? 0.0 : o.tau;
  const double t_ref = e.t_prev + tau;
  if (!(t_ref < e.t_curr)) fail(ErrorCode::RefractoryExceedsInterval, "tau exceeds an inter-event interval");
  const bool is_pos = e.p == Polarity::Positive;

  Partial out;

  // Difference term.
  const double lam_d = o.weights.lambda_diff;
  if (lam_d > 0.0) {
    const double f_curr = model.log_radiance(e.u, e.t_curr);
    const double f_ref = model.log_radiance(e.u, t_ref);
    const double delta = f_curr - f_ref;
    const double r = (delta - s * cp) / cm;
    const double l = r * r;
    out.diff = l;
    out.weighted += lam_d * l;
    const double dl_ddelta = 2.0 * r / cm;
    const double up = lam_d * scale * dl_ddelta;
    model.log_radiance_backward(e.u, e.t_curr, up, grad);
    model.log_radiance_backward(e.u, t_ref, -up, grad);
    // d r / d C_pos: C_p enters the target for positive events, C_mean always.
    const double dr_dcpos = (is_pos ? -s / cm : 0.0) - 0.5 * (delta - s * cp) / (cm * cm);
    out.d_c_pos += lam_d * scale * 2.0 * r * dr_dcpos;
    if (o.tau_gradient && !first) {
      const double df_ref = model.time_derivative(e.u, t_ref, o.h_rel * (e.t_curr - e.t_prev));
      out.d_tau += up * -df_ref;
    }
  }

  // Temporal-gradient term.
  const double lam_g = o.weights.lambda_grad;
  if (lam_g > 0.0) {
    const double span = e.t_curr - t_ref;
    Rng rng(o.seed, id);
    const double frac = sample_t_sam_fraction(rng);
    const double t_sam = t_ref + frac * span;
    const double h = o.h_rel * (e.t_curr - e.t_prev);
    const double pred = model.time_derivative(e.u, t_sam, h);
    const double target = s * cp / span;
    const double err = pred - target;
    const double l = std::abs(err) / std::abs(target);
    out.grad_term = l;
    out.weighted += lam_g * l;
    const double sgn_err = err > 0.0 ? 1.0 : (err < 0.0 ? -1.0 : 0.0);
    const double dl_dpred = sgn_err / std::abs(target);
    const double dl_dtarget = -sgn_err / std::abs(target) - l * (target > 0.0 ? 1.0 : -1.0) / std::abs(target);
    const double up = lam_g * scale;
    model.time_derivative_backward(e.u, t_sam, h, up * dl_dpred, grad);
    if (is_pos) out.d_c_pos += up * dl_dtarget * s / span;
    if (o.tau_gradient && !first) {
      // t_ref moves with tau; t_sam = t_ref + frac * span moves by (1 - frac).
      const double f2 = model.second_time_derivative(e.u, t_sam, h);
      out.d_tau += up * (dl_dpred * f2 * (1.0 - frac) + dl_dtarget * target / span);
    }
  }
  return out;
}

void check_batch(std::span<const Event> batch, std::span<const std::size_t> ids, const TotalLossOptions& o) {
  if (batch.empty()) fail(ErrorCode::EmptyBatch, "loss over an empty batch");
  if (ids.size() != batch.size()) fail(ErrorCode::InvalidArgument, "one id per event required");
  o.weights.validate();
  o.thresholds.validate();
  if (!(o.tau >= 0.0)) fail(ErrorCode::InvalidParams, "tau must be >= 0");
  if (!(o.h_rel > 0.0)) fail(ErrorCode::InvalidParams, "h_rel must be > 0");
}

LossResult finish(const Partial& sum, std::size_t n, std::vector<double> grad, const LogRadianceModel& model,
                  const TotalLossOptions& o) {
  const double inv = 1.0 / static_cast<double>(n);
  LossResult r;
  r.loss = sum.weighted * inv;
  r.mean_diff = sum.diff * inv;
  r.mean_grad = sum.grad_term * inv;
  r.grad = std::move(grad);
  r.d_c_pos = sum.d_c_pos;
  r.d_tau = sum.d_tau;
  r.samples = (o.weights.lambda_diff > 0.0 ? 2.0 : 0.0) * static_cast<double>(n) * model.samples_per_query();
  if (!std::isfinite(r.loss)) fail(ErrorCode::DivergedLoss, "non-finite loss");
  return r;
}

}  // namespace

LossResult total_loss(std::span<const Event> batch, std::span<const std::size_t> ids, const LogRadianceModel& model,
                      const TotalLossOptions& o) {
  check_batch(batch, ids, o);
  const std::size_t n = batch.size();
  const std::size_t np = model.param_count();
  const double scale = 1.0 / static_cast<double>(n);
  const std::size_t chunks = chunk_count(n);

  std::vector<Partial> partial(chunks);
  std::vector<std::vector<double>> grads(chunks);
  parallel_for(chunks, o.threads, [&](std::size_t c) {
    grads[c].assign(np, 0.0);
    const std::size_t lo = c * kReductionChunk, hi = std::min(n, lo + kReductionChunk);
    for (std::size_t i = lo; i < hi; ++i) partial[c].add(event_loss(batch[i], ids[i], model, o, scale, grads[c]));
  });

  Partial sum;
  std::vector<double> grad = std::move(grads[0]);
  sum.add(partial[0]);
  for (std::size_t c = 1; c < chunks; ++c) {
    sum.add(partial[c]);
    for (std::size_t k = 0; k < np; ++k) grad[k] += grads[c][k];
  }
  return finish(sum, n, std::move(grad), model, o);
}

LossResult total_loss_serial(std::span<const Event> batch, std::span<const std::size_t> ids,
                             const LogRadianceModel& model, const TotalLossOptions& o) {
  check_batch(batch, ids, o);
  const double scale = 1.0 / static_cast<double>(batch.size());
  std::vector<double> grad(model.param_count(), 0.0);
  Partial sum;
  for (std::size_t i = 0; i < batch.size(); ++i) sum.add(event_loss(batch[i], ids[i], model, o, scale, grad));
  return finish(sum, batch.size(), std::move(grad), model, o);
}

std::vector<AccumulationWindow> build_accumulation_windows(const EventStream& stream, double window) {
  if (!(window > 0.0)) fail(ErrorCode::InvalidArgument, "window length must be > 0");
  const double span = stream.t_end - stream.t_start;
  if (!(span > 0.0)) fail(ErrorCode::InvalidArgument, "stream has an empty time span");
  const auto n_windows = static_cast<std::size_t>(std::ceil(span / window - 1e-9));
  // (window, pixel) -> counts; ordered so the output is deterministic.
  std::map<std::pair<std::size_t, std::size_t>, std::pair<int, int>> counts;
  for (const Event& e : stream.events) {
    auto w = static_cast<std::size_t>((e.t_curr - stream.t_start) / window);
    w = std::min(w, n_windows - 1);
    auto& c = counts[{w, stream.geometry.index(e.u)}];
    (e.p == Polarity::Positive ? c.first : c.second)++;
  }
  std::vector<AccumulationWindow> out;
  out.reserve(counts.size());
  for (const auto& [key, c] : counts) {
    AccumulationWindow w;
    w.u = stream.geometry.pixel(key.second);
    w.t_begin = stream.t_start + static_cast<double>(key.first) * window;
    w.t_end = std::min(stream.t_end, w.t_begin + window);
    w.n_pos = c.first;
    w.n_neg = c.second;
    out.push_back(w);
  }
  return out;
}

LossResult accumulated_total_loss(std::span<const AccumulationWindow> windows, const LogRadianceModel& model,
                                  const ThresholdParams& th, int threads) {
  if (windows.empty()) fail(ErrorCode::EmptyBatch, "loss over an empty batch");
  th.validate();
  const std::size_t n = windows.size();
  const std::size_t np = model.param_count();
  const double scale = 1.0 / static_cast<double>(n);
  const std::size_t chunks = chunk_count(n);
  std::vector<double> chunk_loss(chunks, 0.0);
  std::vector<std::vector<double>> grads(chunks);
  parallel_for(chunks, threads, [&](std::size_t c) {
    grads[c].assign(np, 0.0);
    const std::size_t lo = c * kReductionChunk, hi = std::min(n, lo + kReductionChunk);
    for (std::size_t i = lo; i < hi; ++i) {
      const AccumulationWindow& w = windows[i];
      const double delta = model.log_radiance(w.u, w.t_end) - model.log_radiance(w.u, w.t_begin);
      const double target = w.n_pos * th.c_pos - w.n_neg * th.c_neg;
      const double r = (delta - target) / th.mean();
      chunk_loss[c] += r * r;
      const double up = scale * 2.0 * r / th.mean();
      model.log_radiance_backward(w.u, w.t_end, up, grads[c]);
      model.log_radiance_backward(w.u, w.t_begin, -up, grads[c]);
    }
  });
  LossResult r;
  r.grad = std::move(grads[0]);
  double sum = chunk_loss[0];
  for (std::size_t c = 1; c < chunks; ++c) {
    sum += chunk_loss[c];
    for (std::size_t k = 0; k < np; ++k) r.grad[k] += grads[c][k];
  }
  r.loss = r.mean_diff = sum * scale;
  r.samples = 2.0 * static_cast<double>(n) * model.samples_per_query();
  if (!std::isfinite(r.loss)) fail(ErrorCode::DivergedLoss, "non-finite loss");
  return r;
}

}  // namespace ernf
