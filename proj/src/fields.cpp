#include "ernf/fields.hpp"

#include <algorithm>
#include <array>
#include <numbers>
#include <limits>
#include <sstream>

#include "ernf/parallel.hpp"

namespace ernf {

double composite(std::span<const double> optical_depth, std::span<const double> color, double background,
                 std::vector<double>* weights, double floor) {
  if (optical_depth.size() != color.size()) fail(ErrorCode::ShapeMismatch, "composite: depth/colour size mismatch");
  if (weights) weights->assign(optical_depth.size() + 1, 0.0);
  double transmittance = 1.0;
  double radiance = 0.0;
  for (std::size_t i = 0; i < optical_depth.size(); ++i) {
    const double next = transmittance * std::exp(-optical_depth[i]);
    const double w = transmittance - next;
    radiance += w * color[i];
    if (weights) (*weights)[i] = w;
    transmittance = next;
  }
  if (weights) weights->back() = transmittance;
  return radiance + transmittance * background + floor;
}

VoxelField::VoxelField(int resolution, Aabb box, int channels)
    : resolution_(resolution), channels_(channels), box_(box) {
  if (resolution < 2) fail(ErrorCode::InvalidParams, "voxel resolution must be >= 2");
  if (channels < 1) fail(ErrorCode::InvalidParams, "voxel field needs at least one channel");
  if (!((box.hi - box.lo).array() > 0.0).all()) fail(ErrorCode::InvalidParams, "voxel box must have positive extent");
  params_.assign(voxel_count() * (1 + channels) + channels, 0.0);
}

Vec3 VoxelField::vertex_position(int i, int j, int k) const {
  const Vec3 g(i, j, k);
  return box_.lo + (box_.hi - box_.lo).cwiseProduct(g / (resolution_ - 1));
}

namespace {

// Eight trilinear corners of a world point.
struct Stencil {
  std::array<std::size_t, 8> index;
  std::array<double, 8> weight;
};

Stencil make_stencil(const VoxelField& field, const Vec3& x) {
  const int d = field.resolution();
  const Aabb& box = field.box();
  std::array<int, 3> i0{};
  std::array<double, 3> f{};
  for (int a = 0; a < 3; ++a) {
    double g = (x[a] - box.lo[a]) / (box.hi[a] - box.lo[a]) * (d - 1);
    g = std::clamp(g, 0.0, static_cast<double>(d - 1));
    int i = static_cast<int>(g);
    i = std::min(i, d - 2);
    i0[a] = i;
    f[a] = g - i;
  }
  Stencil s{};
  int n = 0;
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) {
        s.index[n] = field.voxel_index(i0[0] + dx, i0[1] + dy, i0[2] + dz);
        s.weight[n] = (dx ? f[0] : 1.0 - f[0]) * (dy ? f[1] : 1.0 - f[1]) * (dz ? f[2] : 1.0 - f[2]);
        ++n;
      }
  return s;
}

double interpolate(const Stencil& s, const double* base, std::size_t stride = 1, std::size_t offset = 0) {
  double v = 0.0;
  for (int n = 0; n < 8; ++n) v += s.weight[n] * base[s.index[n] * stride + offset];
  return v;
}

// Forward state of one ray for a single channel.
struct RayTrace {
  std::vector<Stencil> stencil;
  std::vector<double> density_raw, color_raw, depth, color;
  double delta = 0.0;
};

void trace(const VoxelField& field, const Ray& ray, int n_samples, int channel, RayTrace& out) {
  const auto p = field.params();
  const double* density = p.data();
  const double* color = p.data() + field.color_offset();
  out.stencil.resize(n_samples);
  out.density_raw.resize(n_samples);
  out.color_raw.resize(n_samples);
  out.depth.resize(n_samples);
  out.color.resize(n_samples);
  out.delta = (ray.far - ray.near) / n_samples;
  for (int i = 0; i < n_samples; ++i) {
    const double s = ray.near + (i + 0.5) * out.delta;
    const Stencil st = make_stencil(field, ray.origin + s * ray.direction);
    out.stencil[i] = st;
    out.density_raw[i] = interpolate(st, density);
    out.color_raw[i] = interpolate(st, color, field.channels(), channel);
    out.depth[i] = softplus(out.density_raw[i], kDensityBeta) * out.delta;
    out.color[i] = softplus(out.color_raw[i], kRadianceBeta);
  }
}

void check_ray(const Ray& ray, int n_samples) {
  if (n_samples < 1) fail(ErrorCode::InvalidArgument, "n_samples must be >= 1");
  if (!(ray.far > ray.near)) fail(ErrorCode::DegenerateRay, "ray far bound must exceed near bound");
}

// log L and, when grad is non-empty, its reverse-mode derivative for one channel.
double log_radiance_impl(const VoxelField& field, const PixelRay& pr, int n_samples, int channel, double upstream,
                         std::span<double> grad) {
  if (channel < 0 || channel >= field.channels()) fail(ErrorCode::ChannelMismatch, "channel out of range");
  const double bg_raw = field.background_raw(channel);
  const double bg = softplus(bg_raw, kRadianceBeta);
  const bool want_grad = !grad.empty() && upstream != 0.0;
  if (!pr.hits_box) {
    const double radiance = bg + kRadianceFloor;
    if (want_grad) grad[field.background_offset() + channel] += upstream / radiance * softplus_slope(bg_raw);
    return std::log(radiance);
  }
  check_ray(pr.ray, n_samples);
  thread_local RayTrace tr;
  trace(field, pr.ray, n_samples, channel, tr);
  thread_local std::vector<double> w;
  const double radiance = composite(tr.depth, tr.color, bg, &w);
  if (!want_grad) return std::log(radiance);

  const double up = upstream / radiance;
  const double t_final = w[n_samples];
  const int channels = field.channels();
  const std::size_t color_base = field.color_offset();
  // suffix = sum_{i>k} w_i c_i + T_{N+1} bg, swept from the back.
  double suffix = t_final * bg;
  // T_{k+1}, also swept from the back.
  double t_next = t_final;
  for (int k = n_samples - 1; k >= 0; --k) {
    const double d_depth = t_next * tr.color[k] - suffix;
    const double g_density = up * tr.delta * d_depth * softplus_slope(tr.density_raw[k], kDensityBeta);
    const double g_color = up * w[k] * softplus_slope(tr.color_raw[k], kRadianceBeta);
    const Stencil& st = tr.stencil[k];
    for (int n = 0; n < 8; ++n) {
      grad[st.index[n]] += g_density * st.weight[n];
      grad[color_base + st.index[n] * channels + channel] += g_color * st.weight[n];
    }
    suffix += w[k] * tr.color[k];
    t_next += w[k];
  }
  grad[field.background_offset() + channel] += up * t_final * softplus_slope(bg_raw);
  return std::log(radiance);
}

}  // namespace

double VoxelField::density_at(const Vec3& x) const {
  return softplus(interpolate(make_stencil(*this, x), params_.data()), kDensityBeta);
}

double VoxelField::color_at(const Vec3& x, int c) const {
  return softplus(interpolate(make_stencil(*this, x), params_.data() + color_offset(), channels_, c), kRadianceBeta);
}

bool clip_to_box(const Aabb& box, const Vec3& origin, const Vec3& direction, double& near, double& far) {
  double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (direction[a] == 0.0) {
      if (origin[a] < box.lo[a] || origin[a] > box.hi[a]) return false;
      continue;
    }
    const double inv = 1.0 / direction[a];
    double ta = (box.lo[a] - origin[a]) * inv;
    double tb = (box.hi[a] - origin[a]) * inv;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (!(t1 > t0 + 1e-12)) return false;
  near = t0;
  far = t1;
  return true;
}

PixelRay back_project(Pixel u, const PoseSample& pose, const CameraIntrinsics& k, const Aabb& box) {
  const Vec3 dir_cam((u.x + 0.5 - k.cx) / k.fx, (u.y + 0.5 - k.cy) / k.fy, 1.0);
  PixelRay pr;
  pr.ray.origin = pose.position;
  pr.ray.direction = (pose.orientation * dir_cam).normalized();
  pr.hits_box = clip_to_box(box, pr.ray.origin, pr.ray.direction, pr.ray.near, pr.ray.far);
  return pr;
}

std::vector<double> render_radiance(const VoxelField& field, const Ray& ray, int n_samples) {
  check_ray(ray, n_samples);
  std::vector<double> out(field.channels());
  RayTrace tr;
  for (int c = 0; c < field.channels(); ++c) {
    trace(field, ray, n_samples, c, tr);
    out[c] = composite(tr.depth, tr.color, field.background(c));
  }
  return out;
}

double render_log_radiance(const VoxelField& field, Pixel u, const PoseSample& pose,
                           const CameraIntrinsics& intrinsics, int n_samples, int channel) {
  return log_radiance_impl(field, back_project(u, pose, intrinsics, field.box()), n_samples, channel, 0.0, {});
}

double render_log_radiance_backward(const VoxelField& field, Pixel u, const PoseSample& pose,
                                    const CameraIntrinsics& intrinsics, int n_samples, int channel,
                                    double upstream, std::span<double> grad) {
  if (grad.size() != field.param_count()) fail(ErrorCode::ShapeMismatch, "gradient buffer size mismatch");
  return log_radiance_impl(field, back_project(u, pose, intrinsics, field.box()), n_samples, channel, upstream,
                           grad);
}

Image render_view(const VoxelField& field, const PoseSample& pose, const CameraIntrinsics& intrinsics, int width,
                  int height, int n_samples, int threads) {
  if (width < 1 || height < 1) fail(ErrorCode::InvalidArgument, "view must have at least one pixel");
  intrinsics.validate();
  Image img(width, height, field.channels());
  parallel_for(static_cast<std::size_t>(width) * height, threads, [&](std::size_t i) {
    const Pixel u{static_cast<int>(i % width), static_cast<int>(i / width)};
    const PixelRay pr = back_project(u, pose, intrinsics, field.box());
    for (int c = 0; c < field.channels(); ++c)
      img.at(u.x, u.y, c) = std::exp(log_radiance_impl(field, pr, n_samples, c, 0.0, {}));
  });
  return img;
}

// ---------------------------------------------------------------------------

TemporalSignalField::TemporalSignalField(const SensorGeometry& geometry, int harmonics, double t0, double period)
    : geometry_(geometry), harmonics_(harmonics), t0_(t0), period_(period) {
  geometry.validate();
  if (harmonics < 0) fail(ErrorCode::InvalidParams, "harmonic count must be >= 0");
  if (!(period > 0.0)) fail(ErrorCode::InvalidParams, "signal period must be positive");
  params_.assign(geometry.pixel_count() * params_per_pixel(), 0.0);
}

double TemporalSignalField::log_radiance(Pixel u, double t) const {
  const std::size_t base = geometry_.index(u) * params_per_pixel();
  const double* a = params_.data() + base;
  const double w = 2.0 * std::numbers::pi / period_;
  double v = a[0];
  for (int k = 1; k <= harmonics_; ++k) {
    const double ph = k * w * (t - t0_);
    v += a[k] * std::cos(ph) + a[harmonics_ + k] * std::sin(ph);
  }
  return v;
}

double TemporalSignalField::log_radiance_backward(Pixel u, double t, double upstream, std::span<double> grad) const {
  const std::size_t base = geometry_.index(u) * params_per_pixel();
  const double w = 2.0 * std::numbers::pi / period_;
  grad[base] += upstream;
  for (int k = 1; k <= harmonics_; ++k) {
    const double ph = k * w * (t - t0_);
    grad[base + k] += upstream * std::cos(ph);
    grad[base + harmonics_ + k] += upstream * std::sin(ph);
  }
  return log_radiance(u, t);
}

double TemporalSignalField::time_derivative(Pixel u, double t, double) const {
  const std::size_t base = geometry_.index(u) * params_per_pixel();
  const double* a = params_.data() + base;
  const double w = 2.0 * std::numbers::pi / period_;
  double v = 0.0;
  for (int k = 1; k <= harmonics_; ++k) {
    const double ph = k * w * (t - t0_);
    v += k * w * (-a[k] * std::sin(ph) + a[harmonics_ + k] * std::cos(ph));
  }
  return v;
}

double TemporalSignalField::time_derivative_backward(Pixel u, double t, double h, double upstream,
                                                     std::span<double> grad) const {
  const std::size_t base = geometry_.index(u) * params_per_pixel();
  const double w = 2.0 * std::numbers::pi / period_;
  for (int k = 1; k <= harmonics_; ++k) {
    const double ph = k * w * (t - t0_);
    grad[base + k] += -upstream * k * w * std::sin(ph);
    grad[base + harmonics_ + k] += upstream * k * w * std::cos(ph);
  }
  return time_derivative(u, t, h);
}

double TemporalSignalField::second_time_derivative(Pixel u, double t, double) const {
  const std::size_t base = geometry_.index(u) * params_per_pixel();
  const double* a = params_.data() + base;
  const double w = 2.0 * std::numbers::pi / period_;
  double v = 0.0;
  for (int k = 1; k <= harmonics_; ++k) {
    const double ph = k * w * (t - t0_);
    v -= (k * w) * (k * w) * (a[k] * std::cos(ph) + a[harmonics_ + k] * std::sin(ph));
  }
  return v;
}

// ---------------------------------------------------------------------------

VoxelScene::VoxelScene(VoxelField field, Trajectory trajectory, CameraIntrinsics intrinsics, SensorGeometry geometry,
                       int n_samples)
    : field_(std::move(field)),
      trajectory_(std::move(trajectory)),
      intrinsics_(intrinsics),
      geometry_(geometry),
      n_samples_(n_samples) {
  intrinsics_.validate();
  geometry_.validate();
  if (n_samples < 1) fail(ErrorCode::InvalidParams, "n_samples must be >= 1");
  if (geometry_.channels != field_.channels())
    fail(ErrorCode::ChannelMismatch, "sensor channel count differs from the field's");
}

double VoxelScene::log_radiance(Pixel u, double t) const {
  return render_log_radiance(field_, u, interpolate_pose(trajectory_, t), intrinsics_, n_samples_,
                             geometry_.channel_of(u));
}

double VoxelScene::log_radiance_backward(Pixel u, double t, double upstream, std::span<double> grad) const {
  return render_log_radiance_backward(field_, u, interpolate_pose(trajectory_, t), intrinsics_, n_samples_,
                                      geometry_.channel_of(u), upstream, grad);
}

std::pair<double, double> VoxelScene::stencil(double t, double h) const {
  const double tb = trajectory_.t_begin(), te = trajectory_.t_end();
  double lo = t - h, hi = t + h;
  if (lo < tb) {
    lo = tb;
    hi = std::min(tb + 2.0 * h, te);
  } else if (hi > te) {
    hi = te;
    lo = std::max(te - 2.0 * h, tb);
  }
  return {lo, hi};
}

double VoxelScene::time_derivative(Pixel u, double t, double h) const {
  const auto [lo, hi] = stencil(t, h);
  return (log_radiance(u, hi) - log_radiance(u, lo)) / (hi - lo);
}

double VoxelScene::time_derivative_backward(Pixel u, double t, double h, double upstream,
                                            std::span<double> grad) const {
  const auto [lo, hi] = stencil(t, h);
  const double scale = upstream / (hi - lo);
  const double f_hi = log_radiance_backward(u, hi, scale, grad);
  const double f_lo = log_radiance_backward(u, lo, -scale, grad);
  return (f_hi - f_lo) / (hi - lo);
}

double VoxelScene::second_time_derivative(Pixel u, double t, double h) const {
  const auto [lo, hi] = stencil(t, h);
  const double mid = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  return (log_radiance(u, hi) - 2.0 * log_radiance(u, mid) + log_radiance(u, lo)) / (half * half);
}

double temporal_log_gradient(const LogRadianceModel& model, Pixel u, double t, double h) {
  if (!(h > 0.0)) fail(ErrorCode::InvalidArgument, "finite-difference step must be positive");
  if (const auto* scene = dynamic_cast<const VoxelScene*>(&model)) {
    const auto& tr = scene->trajectory();
    if (!(t - h >= tr.t_begin()) || !(t + h <= tr.t_end())) {
      std::ostringstream os;
      os << "t +- h = [" << t - h << ", " << t + h << "] outside trajectory [" << tr.t_begin() << ", "
         << tr.t_end() << "]";
      fail(ErrorCode::OutOfRange, os.str());
    }
  }
  return model.time_derivative(u, t, h);
}

}  // namespace ernf
