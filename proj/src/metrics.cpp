#include "ernf/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace ernf {

double Image::max() const {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : data) m = std::max(m, v);
  return m;
}

GammaFit gamma_correct(std::span<const ViewPair> pairs) {
  if (pairs.empty()) fail(ErrorCode::RankDeficient, "no views to fit");
  const int channels = pairs[0].predicted.channels;
  for (const ViewPair& vp : pairs) {
    if (!vp.predicted.same_shape(vp.reference) || vp.predicted.channels != channels)
      fail(ErrorCode::ShapeMismatch, "view pair shapes differ");
    for (double v : vp.predicted.data)
      if (!(v > 0.0)) fail(ErrorCode::InvalidArgument, "predicted radiance must be > 0");
    for (double v : vp.reference.data)
      if (!(v > 0.0)) fail(ErrorCode::InvalidArgument, "reference radiance must be > 0");
  }

  GammaFit fit;
  fit.a.resize(channels);
  fit.b.resize(channels);
  for (int c = 0; c < channels; ++c) {
    // Two passes: means, then centred sums.
    double n = 0.0, mx = 0.0, my = 0.0;
    for (const ViewPair& vp : pairs)
      for (std::size_t i = c; i < vp.predicted.size(); i += channels) {
        n += 1.0;
        mx += std::log(vp.predicted.data[i]);
        my += std::log(vp.reference.data[i]);
      }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (const ViewPair& vp : pairs)
      for (std::size_t i = c; i < vp.predicted.size(); i += channels) {
        const double dx = std::log(vp.predicted.data[i]) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(vp.reference.data[i]) - my);
      }
    if (!(sxx > 0.0)) fail(ErrorCode::RankDeficient, "predicted log values are constant in a channel");
    fit.a[c] = sxy / sxx;
    fit.b[c] = my - fit.a[c] * mx;
  }

  for (const ViewPair& vp : pairs) {
    Image out = vp.predicted;
    for (std::size_t i = 0; i < out.size(); ++i) {
      const int c = static_cast<int>(i % channels);
      // pow/exp split keeps an identity fit (a = 1, b = 0) exact.
      out.data[i] = std::exp(fit.b[c]) * std::pow(vp.predicted.data[i], fit.a[c]);
    }
    fit.corrected.push_back(std::move(out));
  }
  return fit;
}

double psnr(const Image& image, const Image& reference, double peak) {
  if (!image.same_shape(reference)) fail(ErrorCode::ShapeMismatch, "psnr of differently shaped images");
  if (!(peak > 0.0)) fail(ErrorCode::InvalidArgument, "peak must be > 0");
  if (image.size() == 0) fail(ErrorCode::ShapeMismatch, "empty image");
  double se = 0.0;
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double d = image.data[i] - reference.data[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(image.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

namespace {

using Kernel = std::array<double, kSsimWindow>;

Kernel gaussian_kernel() {
  Kernel k{};
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double x = i - kSsimWindow / 2;
    k[i] = std::exp(-x * x / (2.0 * kSsimSigma * kSsimSigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable valid-mode filter of one plane: (w - 10) x (h - 10) output.
std::vector<double> filter_valid(const std::vector<double>& plane, int w, int h, const Kernel& k) {
  const int ow = w - kSsimWindow + 1, oh = h - kSsimWindow + 1;
  std::vector<double> tmp(static_cast<std::size_t>(ow) * h), out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < kSsimWindow; ++i) s += k[i] * plane[static_cast<std::size_t>(y) * w + x + i];
      tmp[static_cast<std::size_t>(y) * ow + x] = s;
    }
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < kSsimWindow; ++i) s += k[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  return out;
}

}  // namespace

double ssim(const Image& image, const Image& reference) {
  if (!image.same_shape(reference)) fail(ErrorCode::ShapeMismatch, "ssim of differently shaped images");
  if (image.width < kSsimWindow || image.height < kSsimWindow)
    fail(ErrorCode::TooSmall, "image smaller than the SSIM window");
  constexpr double c1 = (0.01 * 1.0) * (0.01 * 1.0);
  constexpr double c2 = (0.03 * 1.0) * (0.03 * 1.0);
  const Kernel k = gaussian_kernel();
  const int w = image.width, h = image.height;
  const std::size_t n = static_cast<std::size_t>(w) * h;

  double total = 0.0;
  std::size_t count = 0;
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  for (int c = 0; c < image.channels; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = image.data[i * image.channels + c];
      y[i] = reference.data[i * image.channels + c];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = filter_valid(x, w, h, k), my = filter_valid(y, w, h, k);
    const auto sxx = filter_valid(xx, w, h, k), syy = filter_valid(yy, w, h, k), sxy = filter_valid(xy, w, h, k);
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i], vy = syy[i] - my[i] * my[i], cxy = sxy[i] - mx[i] * my[i];
      total += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cxy + c2)) /
               ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

}  // namespace ernf
