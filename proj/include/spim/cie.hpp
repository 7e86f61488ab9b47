#ifndef SPIM_CIE_HPP
#define SPIM_CIE_HPP

#include <array>
#include <cmath>

#include "spim/common.hpp"

namespace spim {

struct Xyz {
  double x = 0, y = 0, z = 0;
};

namespace detail {

/// Piecewise Gaussian with separate left/right widths.
inline double cie_bump(double lambda, double mu, double s_left, double s_right) {
  const double s = lambda < mu ? s_left : s_right;
  const double d = (lambda - mu) / s;
  return std::exp(-0.5 * d * d);
}

/// Multi-lobe Gaussian fit of the CIE 1931 2-degree observer
/// (Wyman, Sloan & Shirley, JCGT 2013), evaluated directly in nm.
inline Xyz cie_fit(double nm) {
  Xyz v;
  v.x = 1.056 * cie_bump(nm, 599.8, 37.9, 31.0) +
        0.362 * cie_bump(nm, 442.0, 16.0, 26.7) -
        0.065 * cie_bump(nm, 501.1, 20.4, 26.2);
  v.y = 0.821 * cie_bump(nm, 568.8, 46.9, 40.5) +
        0.286 * cie_bump(nm, 530.9, 16.3, 31.1);
  v.z = 1.217 * cie_bump(nm, 437.0, 11.8, 36.0) +
        0.681 * cie_bump(nm, 459.0, 26.0, 13.8);
  return v;
}

} // namespace detail

/// Colour-matching functions tabulated at 5 nm over [380, 780].
inline const std::array<Xyz, 81>& cie_table_5nm() {
  static const std::array<Xyz, 81> table = [] {
    std::array<Xyz, 81> t{};
    for (int i = 0; i < 81; ++i) t[i] = detail::cie_fit(380.0 + 5.0 * i);
    return t;
  }();
  return table;
}

/// Linear interpolation into the 5 nm table; wavelengths must lie in
/// [380, 780] nm.
inline Xyz cmf_at(double nm) {
  if (!(nm >= 380.0 && nm <= 780.0))
    throw invalid_input("wavelength outside the 380-780 nm observer table");
  const auto& t = cie_table_5nm();
  const double pos = (nm - 380.0) / 5.0;
  const int i = std::min(static_cast<int>(pos), 79);
  const double f = pos - i;
  Xyz v;
  v.x = (1 - f) * t[i].x + f * t[i + 1].x;
  v.y = (1 - f) * t[i].y + f * t[i + 1].y;
  v.z = (1 - f) * t[i].z + f * t[i + 1].z;
  return v;
}

/// XYZ -> linear sRGB (D65, IEC 61966-2-1 primaries).
inline std::array<double, 3> xyz_to_linear_srgb(const Xyz& c) {
  return {3.2404542 * c.x - 1.5371385 * c.y - 0.4985314 * c.z,
          -0.9692660 * c.x + 1.8760108 * c.y + 0.0415560 * c.z,
          0.0556434 * c.x - 0.2040259 * c.y + 1.0572252 * c.z};
}

/// sRGB transfer function on a linear component in [0, 1].
inline double srgb_gamma(double c) {
  return c <= 0.0031308 ? 12.92 * c : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
}

} // namespace spim

#endif // SPIM_CIE_HPP
