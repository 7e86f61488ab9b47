#ifndef SPIM_METRICS_HPP
#define SPIM_METRICS_HPP

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "spim/common.hpp"
#include "spim/image.hpp"

namespace spim {

/// Peak signal-to-noise ratio for unit peak, +inf when images are identical.
inline double psnr(const Image& ref, const Image& test) {
  if (ref.side != test.side) throw invalid_input("psnr needs equal image sizes");
  double mse = 0.0;
  for (std::size_t i = 0; i < ref.pixels.size(); ++i) {
    const double d = ref.pixels[i] - test.pixels[i];
    mse += d * d;
  }
  mse /= static_cast<double>(ref.pixels.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

namespace detail {

inline const std::array<double, 11>& ssim_window_1d() {
  static const std::array<double, 11> w = [] {
    std::array<double, 11> g{};
    const double sigma = 1.5;
    double sum = 0.0;
    for (int i = 0; i < 11; ++i) {
      const double d = i - 5;
      g[i] = std::exp(-d * d / (2.0 * sigma * sigma));
      sum += g[i];
    }
    for (double& v : g) v /= sum;
    return g;
  }();
  return w;
}

} // namespace detail

/// Mean structural similarity over all fully interior 11x11 windows:
/// gaussian weights (sigma 1.5), C1 = 1e-4, C2 = 9e-4 for unit dynamic range.
inline double ssim(const Image& ref, const Image& test) {
  if (ref.side != test.side) throw invalid_input("ssim needs equal image sizes");
  if (ref.side < 11) throw invalid_input("ssim needs side >= 11");
  const auto& w1 = detail::ssim_window_1d();
  const int side = ref.side;
  constexpr double c1 = 1e-4, c2 = 9e-4;

  double total = 0.0;
  int count = 0;
  for (int r = 5; r <= side - 6; ++r) {
    for (int c = 5; c <= side - 6; ++c) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (int dr = -5; dr <= 5; ++dr) {
        for (int dc = -5; dc <= 5; ++dc) {
          const double w = w1[dr + 5] * w1[dc + 5];
          const double a = ref.at(r + dr, c + dc);
          const double b = test.at(r + dr, c + dc);
          mx += w * a;
          my += w * b;
          sxx += w * a * a;
          syy += w * b * b;
          sxy += w * a * b;
        }
      }
      const double vx = sxx - mx * mx;
      const double vy = syy - my * my;
      const double cov = sxy - mx * my;
      total += ((2 * mx * my + c1) * (2 * cov + c2)) /
               ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  }
  return total / count;
}

} // namespace spim

#endif // SPIM_METRICS_HPP
