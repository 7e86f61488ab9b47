#ifndef SPIM_IMAGE_HPP
#define SPIM_IMAGE_HPP

#include <cstddef>
#include <vector>

#include "spim/common.hpp"

namespace spim {

/// Square grayscale image, row-major, intensities nominally in [0, 1].
struct Image {
  int side = 0;
  std::vector<double> pixels;

  Image() = default;
  explicit Image(int s, double fill = 0.0)
      : side(s), pixels(static_cast<std::size_t>(s) * s, fill) {
    if (s < 1) throw invalid_input("image side must be positive");
  }
  Image(int s, std::vector<double> px) : side(s), pixels(std::move(px)) {
    if (s < 1) throw invalid_input("image side must be positive");
    if (pixels.size() != static_cast<std::size_t>(s) * s)
      throw invalid_input("pixel count does not match side^2");
  }

  int size() const { return side * side; }
  double& at(int r, int c) { return pixels[static_cast<std::size_t>(r) * side + c]; }
  double at(int r, int c) const { return pixels[static_cast<std::size_t>(r) * side + c]; }
};

/// Stack of same-sized planes indexed by strictly increasing wavelengths (nm).
struct SpectralCube {
  std::vector<double> wavelengths_nm;
  std::vector<Image> planes;

  void validate() const {
    if (planes.empty()) throw invalid_input("spectral cube has no planes");
    if (wavelengths_nm.size() != planes.size())
      throw invalid_input("wavelength count does not match plane count");
    for (std::size_t c = 1; c < wavelengths_nm.size(); ++c)
      if (!(wavelengths_nm[c] > wavelengths_nm[c - 1]))
        throw invalid_input("wavelengths must be strictly increasing");
    for (const Image& p : planes)
      if (p.side != planes.front().side)
        throw invalid_input("spectral planes must share one side length");
  }

  int channels() const { return static_cast<int>(planes.size()); }
  int side() const { return planes.empty() ? 0 : planes.front().side; }
};

} // namespace spim

#endif // SPIM_IMAGE_HPP
