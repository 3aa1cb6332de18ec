#include <doctest.h>

#include <cmath>
#include <limits>

#include "ernf/metrics.hpp"
#include "support.hpp"

using namespace ernf;
using ernf::test::Gen;

namespace {

Image random_image(Gen& g, int w, int h, int c, double lo = 0.05, double hi = 1.0) {
  Image im(w, h, c);
  for (double& v : im.data) v = g.uniform(lo, hi);
  return im;
}

// Direct 2-D windowed SSIM, one window at a time.
double ssim_oracle(const Image& a, const Image& b) {
  const int r = kSsimWindow / 2;
  double kern[kSsimWindow][kSsimWindow], sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i)
    for (int j = 0; j < kSsimWindow; ++j) {
      const double dx = i - r, dy = j - r;
      kern[i][j] = std::exp(-(dx * dx + dy * dy) / (2.0 * kSsimSigma * kSsimSigma));
      sum += kern[i][j];
    }
  const double c1 = 1e-4, c2 = 9e-4;
  double total = 0.0;
  int count = 0;
  for (int c = 0; c < a.channels; ++c)
    for (int y0 = 0; y0 + kSsimWindow <= a.height; ++y0)
      for (int x0 = 0; x0 + kSsimWindow <= a.width; ++x0) {
        double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
        for (int j = 0; j < kSsimWindow; ++j)
          for (int i = 0; i < kSsimWindow; ++i) {
            const double w = kern[i][j] / sum, x = a.at(x0 + i, y0 + j, c), y = b.at(x0 + i, y0 + j, c);
            mx += w * x;
            my += w * y;
            sxx += w * x * x;
            syy += w * y * y;
            sxy += w * x * y;
          }
        const double vx = sxx - mx * mx, vy = syy - my * my, cv = sxy - mx * my;
        total += (2 * mx * my + c1) * (2 * cv + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        ++count;
      }
  return total / count;
}

}  // namespace

TEST_SUITE("calibration_metrics") {
  TEST_CASE("gamma fit: identity") {
    Gen g(1);
    const Image p = random_image(g, 8, 8, 1);
    const ViewPair pairs[] = {{p, p}};
    const auto fit = gamma_correct(pairs);
    CHECK(fit.a[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(fit.b[0]) < 1e-12);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(fit.corrected[0].data[i] == doctest::Approx(p.data[i]).epsilon(1e-12));
  }

  TEST_CASE("gamma fit: exact power law is recovered per channel") {
    Gen g(2);
    std::vector<ViewPair> pairs;
    const double a[] = {0.5, 1.7, 1.0}, b[] = {2.0, -0.3, 0.0};
    for (int v = 0; v < 3; ++v) {
      const Image p = random_image(g, 6, 5, 3);
      Image r = p;
      for (std::size_t i = 0; i < r.size(); ++i) r.data[i] = std::exp(b[i % 3]) * std::pow(p.data[i], a[i % 3]);
      pairs.push_back({p, r});
    }
    const auto fit = gamma_correct(pairs);
    for (int c = 0; c < 3; ++c) {
      CHECK(std::abs(fit.a[c] - a[c]) < 1e-9);
      CHECK(std::abs(fit.b[c] - b[c]) < 1e-9);
    }
    for (int v = 0; v < 3; ++v)
      for (std::size_t i = 0; i < pairs[v].reference.size(); ++i)
        CHECK(test::rel_err(fit.corrected[v].data[i], pairs[v].reference.data[i]) < 1e-9);
  }

  TEST_CASE("gamma fit: noisy slope within three OLS standard errors") {
    Gen g(3);
    for (int trial = 0; trial < 10; ++trial) {
      const double a = g.uniform(0.3, 3.0), b = g.uniform(-1.0, 1.0), sd = 0.01;
      Image p = random_image(g, 100, 100, 1), r = p;
      double mx = 0.0;
      for (double v : p.data) mx += std::log(v);
      mx /= p.size();
      double sxx = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) {
        r.data[i] = std::exp(a * std::log(p.data[i]) + b + g.normal(0.0, sd));
        sxx += (std::log(p.data[i]) - mx) * (std::log(p.data[i]) - mx);
      }
      const ViewPair pairs[] = {{p, r}};
      CHECK(std::abs(gamma_correct(pairs).a[0] - a) < 3.0 * sd / std::sqrt(sxx));
    }
  }

  TEST_CASE("gamma fit: constant predictions are rank deficient") {
    const ViewPair pairs[] = {{Image(4, 4, 1, 0.3), Image(4, 4, 1, 0.5)}};
    try {
      gamma_correct(pairs);
      FAIL("expected RankDeficient");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::RankDeficient);
    }
    CHECK_THROWS_AS(gamma_correct(std::span<const ViewPair>{}), Error);
  }

  TEST_CASE("property: corrected images do not depend on a global rescale or power of the prediction") {
    Gen g(4);
    for (int trial = 0; trial < 30; ++trial) {
      const Image p = random_image(g, 7, 7, 3), r = random_image(g, 7, 7, 3);
      const double k = g.log_uniform(1e-3, 1e3), e = g.uniform(0.3, 3.0);
      Image q = p;
      for (double& v : q.data) v = k * std::pow(v, e);
      const ViewPair a[] = {{p, r}}, b[] = {{q, r}};
      const auto fa = gamma_correct(a), fb = gamma_correct(b);
      for (std::size_t i = 0; i < p.size(); ++i)
        CHECK(test::rel_err(fa.corrected[0].data[i], fb.corrected[0].data[i]) < 1e-9);
    }
  }

  TEST_CASE("psnr examples") {
    const Image a(4, 4, 1, 0.5);
    CHECK(psnr(a, a, 1.0) == std::numeric_limits<double>::infinity());
    // MSE 0.01 at peak 1 is 20 dB.
    CHECK(psnr(Image(4, 4, 1, 0.6), a, 1.0) == doctest::Approx(20.0).epsilon(1e-12));
    CHECK_THROWS_AS(psnr(Image(4, 3, 1), a, 1.0), Error);
    CHECK_THROWS_AS(psnr(a, a, 0.0), Error);
  }

  TEST_CASE("property: psnr is invariant to a common scale of images and peak") {
    Gen g(5);
    for (int trial = 0; trial < 100; ++trial) {
      const Image x = random_image(g, 5, 5, 2), y = random_image(g, 5, 5, 2);
      const double k = g.log_uniform(1e-3, 1e3);
      Image xk = x, yk = y;
      for (double& v : xk.data) v *= k;
      for (double& v : yk.data) v *= k;
      CHECK(psnr(xk, yk, k) == doctest::Approx(psnr(x, y, 1.0)).epsilon(1e-10));
    }
  }

  TEST_CASE("ssim matches the direct windowed oracle") {
    Gen g(6);
    for (int trial = 0; trial < 5; ++trial) {
      const Image x = random_image(g, 17, 14, 2, 0.0, 1.0), y = random_image(g, 17, 14, 2, 0.0, 1.0);
      CHECK(std::abs(ssim(x, y) - ssim_oracle(x, y)) < 1e-12);
    }
  }

  TEST_CASE("ssim examples") {
    Gen g(7);
    const Image x = random_image(g, 32, 32, 1, 0.0, 1.0);
    CHECK(ssim(x, x) == doctest::Approx(1.0).epsilon(1e-12));
    Image inv = x, noisy = x;
    for (double& v : inv.data) v = 1.0 - v;
    CHECK(ssim(inv, x) < 0.0);
    for (double& v : noisy.data) v += g.normal(0.0, 1e-4);
    CHECK(ssim(noisy, x) > 0.999);
    try {
      ssim(Image(10, 32, 1), Image(10, 32, 1));
      FAIL("expected TooSmall");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::TooSmall);
    }
  }

  TEST_CASE("property: ssim is symmetric and at most 1") {
    Gen g(8);
    for (int trial = 0; trial < 20; ++trial) {
      const Image x = random_image(g, 12, 12, 1, 0.0, 1.0), y = random_image(g, 12, 12, 1, 0.0, 1.0);
      CHECK(ssim(x, y) == doctest::Approx(ssim(y, x)).epsilon(1e-12));
      CHECK(ssim(x, y) <= 1.0 + 1e-12);
    }
  }
}
