#pragma once

#include <span>
#include <vector>

#include "ernf/error.hpp"

namespace ernf {

// Interleaved (row-major, channel-last) float image.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, int c, double fill = 0.0)
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

  std::size_t size() const { return data.size(); }
  double& at(int x, int y, int c) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  double at(int x, int y, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  bool same_shape(const Image& o) const { return width == o.width && height == o.height && channels == o.channels; }
  double max() const;
};

// A predicted and a reference linear-radiance view of the same pose.
struct ViewPair {
  Image predicted;
  Image reference;
};

struct GammaFit {
  std::vector<double> a, b;  // per channel: log ref ~ a * log pred + b
  std::vector<Image> corrected;
};

// Per-channel least-squares affine fit in log space pooled over all pairs.
// Throws RankDeficient when a channel has fewer than two distinct predicted values.
GammaFit gamma_correct(std::span<const ViewPair> pairs);

// 10 log10(peak^2 / MSE); +inf for identical images.
double psnr(const Image& image, const Image& reference, double peak);

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

// Mean SSIM over all fully-contained 11x11 Gaussian windows and channels,
// dynamic range 1.
double ssim(const Image& image, const Image& reference);

}  // namespace ernf
