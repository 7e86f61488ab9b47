#ifndef SPIM_RECONSTRUCT_HPP
#define SPIM_RECONSTRUCT_HPP

#include <Eigen/Dense>
#include <array>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "spim/cie.hpp"
#include "spim/common.hpp"
#include "spim/image.hpp"
#include "spim/imaging.hpp"
#include "spim/metrics.hpp"
#include "spim/nn/graph.hpp"
#include "spim/trainer.hpp"
#include "spim/tv.hpp"

namespace spim {

struct DecodeResult {
  Image image;
  double seconds = 0.0;  // network pass only
};

/// Standardise the raw measurement, run the decoder, clamp to [0, 1].
inline DecodeResult decode(const Checkpoint& ckpt, const Measurement& y) {
  if (y.m() != ckpt.arch.m)
    throw invalid_input("measurement length does not match checkpoint");

  const auto t0 = std::chrono::steady_clock::now();
  nn::Graph<float> g;
  nn::Tensor<float> yt({ckpt.arch.m});
  for (int i = 0; i < ckpt.arch.m; ++i) yt.data[i] = static_cast<float>(y.values[i]);
  const int y_id = g.instance_standardize(g.leaf(std::move(yt), false));
  std::vector<int> dec_ids;
  for (std::size_t i = 1; i < ckpt.params.size(); ++i)
    dec_ids.push_back(g.leaf(ckpt.params[i], false));
  const int out = decoder_forward(g, dec_ids, ckpt.arch, y_id);
  const auto t1 = std::chrono::steady_clock::now();

  g.assert_finite(out, "decoder output");
  DecodeResult r;
  r.image = Image(ckpt.arch.side);
  const auto& ov = g.value(out).data;
  for (int i = 0; i < ckpt.arch.side * ckpt.arch.side; ++i)
    r.image.pixels[i] = clamp01(static_cast<double>(ov[i]));
  r.seconds = std::chrono::duration<double>(t1 - t0).count();
  return r;
}

enum class Method { led, tval3, sh_ld, le_tval3 };

inline Method method_from_name(const std::string& name) {
  if (name == "led") return Method::led;
  if (name == "tval3") return Method::tval3;
  if (name == "sh-ld") return Method::sh_ld;
  if (name == "le-tval3") return Method::le_tval3;
  throw invalid_input("unknown method '" + name + "'");
}

inline const char* method_name(Method m) {
  switch (m) {
    case Method::led: return "led";
    case Method::tval3: return "tval3";
    case Method::sh_ld: return "sh-ld";
    case Method::le_tval3: return "le-tval3";
  }
  return "?";
}

struct ReconstructResources {
  const Checkpoint* ckpt = nullptr;        // led, sh-ld
  const PatternMatrix* patterns = nullptr; // tval3, le-tval3
  TVConfig tv;
};

/// Per-channel means divided by their maximum.
inline std::vector<double> channel_scale(const MeasurementSet& set) {
  if (set.channels.empty()) throw invalid_input("no channels");
  std::vector<double> means;
  for (const Measurement& ch : set.channels) {
    double m = 0;
    for (double v : ch.values) m += v;
    means.push_back(std::max(m / ch.m(), 0.0));
  }
  const double top = *std::max_element(means.begin(), means.end());
  if (!(top > 0)) throw invalid_input("all channel means are zero");
  for (double& v : means) v /= top;
  return means;
}

/// Channel-by-channel reconstruction. Learned methods standardise inside
/// decode and are rescaled by the saved channel means; TV methods consume the
/// raw measurements, which carry their scale intrinsically.
inline SpectralCube reconstruct_multispectral(Method method, const MeasurementSet& set,
                                              const ReconstructResources& res) {
  if (set.channels.empty()) throw invalid_input("no channels");
  const int m = set.channels.front().m();
  for (const Measurement& ch : set.channels)
    if (ch.m() != m) throw invalid_input("channels must share one measurement count");

  const bool learned = method == Method::led || method == Method::sh_ld;
  if (learned && !res.ckpt) throw invalid_input("method needs a checkpoint");
  if (!learned && !res.patterns) throw invalid_input("method needs a pattern matrix");

  SpectralCube cube;
  cube.wavelengths_nm = set.wavelengths_nm;
  if (cube.wavelengths_nm.empty())
    for (std::size_t c = 0; c < set.channels.size(); ++c)
      cube.wavelengths_nm.push_back(static_cast<double>(c));

  const std::vector<double> scale = learned ? channel_scale(set) : std::vector<double>();
  for (std::size_t c = 0; c < set.channels.size(); ++c) {
    if (learned) {
      DecodeResult r = decode(*res.ckpt, set.channels[c]);
      for (double& v : r.image.pixels) v *= scale[c];
      cube.planes.push_back(std::move(r.image));
    } else {
      auto [img, report] = tval3_reconstruct(*res.patterns, set.channels[c], res.tv);
      cube.planes.push_back(std::move(img));
    }
  }
  cube.validate();
  return cube;
}

/// Exact per-channel inversion of a full (m = n) pattern basis; the result is
/// deliberately left undenoised.
inline SpectralCube spectral_ground_truth(const PatternMatrix& full,
                                          const MeasurementSet& set) {
  if (full.m != full.n) throw invalid_input("ground truth needs a square pattern basis");
  const int n = full.n;
  const int side = full.side();
  if (side * side != n) throw invalid_input("pattern columns must form a square image");
  for (const Measurement& ch : set.channels)
    if (ch.m() != n) throw invalid_input("channel length does not match basis size");

  const Eigen::MatrixXd am = detail::pattern_to_matrix(full);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(am);
  const double rc = lu.rcond();
  if (!(rc > 1e-12)) {
    std::ostringstream msg;
    msg << "pattern basis is numerically singular (rcond estimate " << rc << ")";
    throw numerical_error(msg.str());
  }

  SpectralCube cube;
  cube.wavelengths_nm = set.wavelengths_nm;
  if (cube.wavelengths_nm.empty())
    for (std::size_t c = 0; c < set.channels.size(); ++c)
      cube.wavelengths_nm.push_back(static_cast<double>(c));
  for (const Measurement& ch : set.channels) {
    const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(ch.values.data(), n);
    const Eigen::VectorXd x = lu.solve(y);
    Image img(side);
    for (int i = 0; i < n; ++i) img.pixels[i] = x[i];
    cube.planes.push_back(std::move(img));
  }
  cube.validate();
  return cube;
}

// ---------------------------------------------------------------------------
// sRGB rendering.

struct RgbImage {
  int side = 0;
  std::array<std::vector<double>, 3> planes;  // gamma-encoded, [0,1]
};

/// Raw linear-sRGB planes (no normalisation, no clamping): per pixel
/// XYZ = sum_ch value * CMF(lambda_ch) * dlambda_ch, then the sRGB matrix.
/// Positively homogeneous in the cube values.
inline std::array<std::vector<double>, 4> cube_to_linear_rgb(const SpectralCube& cube) {
  cube.validate();
  const int c = cube.channels();
  const int n = cube.side() * cube.side();
  std::vector<Xyz> cmf(c);
  std::vector<double> width(c, 1.0);
  for (int ch = 0; ch < c; ++ch) cmf[ch] = cmf_at(cube.wavelengths_nm[ch]);
  if (c > 1) {
    for (int ch = 0; ch < c; ++ch) {
      const double lo = ch > 0 ? cube.wavelengths_nm[ch - 1] : cube.wavelengths_nm[ch];
      const double hi =
          ch < c - 1 ? cube.wavelengths_nm[ch + 1] : cube.wavelengths_nm[ch];
      width[ch] = (hi - lo) / (ch > 0 && ch < c - 1 ? 2.0 : 1.0);
    }
  }

  std::array<std::vector<double>, 4> out;  // r, g, b, Y
  for (auto& p : out) p.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    Xyz acc;
    for (int ch = 0; ch < c; ++ch) {
      const double v = cube.planes[ch].pixels[i] * width[ch];
      acc.x += v * cmf[ch].x;
      acc.y += v * cmf[ch].y;
      acc.z += v * cmf[ch].z;
    }
    const auto rgb = xyz_to_linear_srgb(acc);
    out[0][i] = rgb[0];
    out[1][i] = rgb[1];
    out[2][i] = rgb[2];
    out[3][i] = acc.y;
  }
  return out;
}

/// Normalise so the cube's maximum luminance maps to display white, clamp,
/// gamma-encode.
inline RgbImage spectral_to_srgb(const SpectralCube& cube) {
  const auto linear = cube_to_linear_rgb(cube);
  const double max_y = *std::max_element(linear[3].begin(), linear[3].end());
  const double scale = max_y > 0 ? 1.0 / max_y : 0.0;

  RgbImage img;
  img.side = cube.side();
  const std::size_t n = linear[0].size();
  for (int p = 0; p < 3; ++p) {
    img.planes[p].resize(n);
    for (std::size_t i = 0; i < n; ++i)
      img.planes[p][i] = clamp01(srgb_gamma(clamp01(linear[p][i] * scale)));
  }
  return img;
}

inline void save_ppm(std::ostream& os, const RgbImage& img) {
  os << "P6\n" << img.side << ' ' << img.side << "\n255\n";
  const std::size_t n = img.planes[0].size();
  for (std::size_t i = 0; i < n; ++i)
    for (int p = 0; p < 3; ++p)
      os.put(static_cast<char>(
          static_cast<unsigned char>(std::lround(img.planes[p][i] * 255.0))));
}

inline void save_ppm(const std::filesystem::path& path, const RgbImage& img) {
  atomic_write_file(path, [&](std::ostream& os) { save_ppm(os, img); });
}

// ---------------------------------------------------------------------------
// SPCB spectral-cube container: ASCII header, blank line, f32 LE planes.

inline void save_cube(std::ostream& os, const SpectralCube& cube) {
  cube.validate();
  os << "SPCB1\n"
     << "channels=" << cube.channels() << "\n"
     << "side=" << cube.side() << "\n";
  os << "wavelengths=";
  {
    std::ostringstream ws;
    ws.precision(10);
    for (int c = 0; c < cube.channels(); ++c) {
      if (c) ws << ',';
      ws << cube.wavelengths_nm[c];
    }
    os << ws.str();
  }
  os << "\n\n";
  for (const Image& plane : cube.planes)
    for (double v : plane.pixels) detail::put_f32le(os, static_cast<float>(v));
}

inline void save_cube(const std::filesystem::path& path, const SpectralCube& cube) {
  atomic_write_file(path, [&](std::ostream& os) { save_cube(os, cube); });
}

inline SpectralCube load_cube(std::istream& is) {
  std::uint64_t offset = 0;
  std::uint64_t line_start = offset;
  if (detail::read_header_line(is, offset) != "SPCB1")
    throw format_error("bad magic, expected SPCB1", line_start);
  line_start = offset;
  const long long channels = detail::parse_int(
      detail::expect_key(detail::read_header_line(is, offset), "channels", line_start),
      line_start);
  line_start = offset;
  const long long side = detail::parse_int(
      detail::expect_key(detail::read_header_line(is, offset), "side", line_start),
      line_start);
  line_start = offset;
  const std::string wtext =
      detail::expect_key(detail::read_header_line(is, offset), "wavelengths", line_start);
  const std::uint64_t wline = line_start;
  line_start = offset;
  if (!detail::read_header_line(is, offset).empty())
    throw format_error("expected blank line after header", line_start);

  if (channels < 1 || side < 1) throw format_error("inconsistent dimensions in header", 0);
  SpectralCube cube;
  {
    std::istringstream ws(wtext);
    std::string tok;
    while (std::getline(ws, tok, ',')) {
      try {
        std::size_t pos = 0;
        cube.wavelengths_nm.push_back(std::stod(tok, &pos));
        if (pos != tok.size()) throw std::invalid_argument("trailing junk");
      } catch (const std::exception&) {
        throw format_error("malformed wavelength list", wline);
      }
    }
  }
  if (cube.wavelengths_nm.size() != static_cast<std::size_t>(channels))
    throw format_error("wavelength count does not match channel count", wline);

  for (long long c = 0; c < channels; ++c) {
    Image plane(static_cast<int>(side));
    for (double& v : plane.pixels) v = detail::get_f32le(is, offset);
    cube.planes.push_back(std::move(plane));
  }
  if (is.peek() != std::istream::traits_type::eof())
    throw format_error("trailing bytes after cube body", offset);
  try {
    cube.validate();
  } catch (const invalid_input& e) {
    throw format_error(std::string("invalid cube: ") + e.what(), 0);
  }
  return cube;
}

inline SpectralCube load_cube(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw invalid_input("cannot open cube file: " + path.string());
  return load_cube(is);
}

} // namespace spim

#endif // SPIM_RECONSTRUCT_HPP
