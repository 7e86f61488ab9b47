#ifndef SPIM_IMAGING_HPP
#define SPIM_IMAGING_HPP

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "spim/common.hpp"
#include "spim/image.hpp"
#include "spim/patterns.hpp"
#include "spim/rng.hpp"

namespace spim {

/// One channel's detector readings y = E x (possibly noisy / standardised).
struct Measurement {
  std::vector<double> values;
  int channel_index = 0;
  bool standardised = false;
  double saved_mean = 0.0;  // meaningful only when standardised
  double saved_std = 0.0;

  int m() const { return static_cast<int>(values.size()); }
};

struct MeasurementSet {
  std::vector<Measurement> channels;
  std::vector<double> wavelengths_nm;  // empty for plain intensity captures
};

enum class NoiseModel { none, gaussian, poisson_gaussian };

struct NoiseSpec {
  NoiseModel model = NoiseModel::none;
  double sigma = 0.0;  // additive gaussian std
  double gamma = 1.0;  // photon scale for the poisson term
  std::uint64_t seed = 0;
};

/// y_i = sum_j E_ij x_j over the row-major flattened image.
inline Measurement forward_measure(const PatternMatrix& e, const Image& x) {
  if (e.n != x.size())
    throw invalid_input("pattern column count does not match pixel count");
  Measurement y;
  y.values.assign(e.m, 0.0);
  const double* px = x.pixels.data();
  for (int i = 0; i < e.m; ++i) {
    double acc = 0.0;
    if (e.is_binary()) {
      const std::uint8_t* row = &e.bits[static_cast<std::size_t>(i) * e.n];
      for (int j = 0; j < e.n; ++j)
        if (row[j]) acc += px[j];
    } else {
      const float* row = &e.values[static_cast<std::size_t>(i) * e.n];
      for (int j = 0; j < e.n; ++j) acc += static_cast<double>(row[j]) * px[j];
    }
    y.values[i] = acc;
  }
  return y;
}

/// Detector model: none, additive gaussian, or scaled-Poisson plus gaussian
/// (y_tilde = gamma * Pois(y/gamma) + sigma * eps). Output is a raw vector:
/// the standardised flag and saved statistics are cleared.
inline Measurement simulate_noise(const Measurement& y, const NoiseSpec& spec) {
  if (spec.sigma < 0.0 || !std::isfinite(spec.sigma))
    throw invalid_input("noise sigma must be finite and >= 0");
  Measurement out;
  out.values = y.values;
  out.channel_index = y.channel_index;
  if (spec.model == NoiseModel::none) return out;

  Rng rng(spec.seed, static_cast<std::uint64_t>(y.channel_index));
  if (spec.model == NoiseModel::poisson_gaussian) {
    if (!(spec.gamma > 0.0) || !std::isfinite(spec.gamma))
      throw invalid_input("photon scale gamma must be finite and > 0");
    for (double& v : out.values) {
      if (v < 0.0) throw invalid_input("poisson-gaussian noise requires nonnegative signal");
      v = spec.gamma * static_cast<double>(rng.poisson(v / spec.gamma));
    }
  }
  if (spec.sigma > 0.0)
    for (double& v : out.values) v += spec.sigma * rng.gaussian();
  return out;
}

/// Shift to zero mean, scale to unit population std (1e-8 guard for constant
/// input). Original statistics are kept for inversion.
inline Measurement standardize(const Measurement& y) {
  if (y.m() < 2) throw invalid_input("standardisation needs at least two values");
  double mean = 0.0;
  for (double v : y.values) mean += v;
  mean /= y.m();
  double var = 0.0;
  for (double v : y.values) var += (v - mean) * (v - mean);
  const double stddev = std::sqrt(var / y.m());

  Measurement out;
  out.channel_index = y.channel_index;
  out.standardised = true;
  out.saved_mean = mean;
  out.saved_std = stddev;
  out.values.resize(y.values.size());
  for (std::size_t i = 0; i < y.values.size(); ++i)
    out.values[i] = (y.values[i] - mean) / (stddev + 1e-8);
  return out;
}

/// Undo standardize() given its saved statistics.
inline Measurement unstandardize(const Measurement& y) {
  if (!y.standardised) throw invalid_input("measurement is not standardised");
  Measurement out;
  out.channel_index = y.channel_index;
  out.values.resize(y.values.size());
  for (std::size_t i = 0; i < y.values.size(); ++i)
    out.values[i] = y.values[i] * (y.saved_std + 1e-8) + y.saved_mean;
  return out;
}

/// CP = 100 * (1 - m/n).
inline double compression_percentage(int m, int n) {
  if (m < 1 || n < 1 || m > n) throw invalid_input("need 1 <= m <= n");
  return 100.0 * (1.0 - static_cast<double>(m) / static_cast<double>(n));
}

// ---------------------------------------------------------------------------
// SPIM measurement file format: ASCII header, blank line, f32 LE payload
// (channel-major values, then per-channel means and stds when standardised).

inline void save_measurements(std::ostream& os, const MeasurementSet& set) {
  if (set.channels.empty()) throw invalid_input("no channels to save");
  const int m = set.channels.front().m();
  const bool std_flag = set.channels.front().standardised;
  for (const Measurement& ch : set.channels) {
    if (ch.m() != m) throw invalid_input("channels must share one measurement count");
    if (ch.standardised != std_flag)
      throw invalid_input("channels must share the standardised flag");
  }
  if (!set.wavelengths_nm.empty() &&
      set.wavelengths_nm.size() != set.channels.size())
    throw invalid_input("wavelength count does not match channel count");

  os << "SPIM1\n"
     << "m=" << m << "\n"
     << "channels=" << set.channels.size() << "\n";
  os << "wavelengths=";
  if (set.wavelengths_nm.empty()) {
    os << "none";
  } else {
    std::ostringstream ws;
    ws.precision(10);
    for (std::size_t i = 0; i < set.wavelengths_nm.size(); ++i) {
      if (i) ws << ',';
      ws << set.wavelengths_nm[i];
    }
    os << ws.str();
  }
  os << "\n"
     << "standardised=" << (std_flag ? 1 : 0) << "\n\n";

  for (const Measurement& ch : set.channels)
    for (double v : ch.values) detail::put_f32le(os, static_cast<float>(v));
  if (std_flag) {
    for (const Measurement& ch : set.channels)
      detail::put_f32le(os, static_cast<float>(ch.saved_mean));
    for (const Measurement& ch : set.channels)
      detail::put_f32le(os, static_cast<float>(ch.saved_std));
  }
}

inline void save_measurements(const std::filesystem::path& path, const MeasurementSet& set) {
  atomic_write_file(path, [&](std::ostream& os) { save_measurements(os, set); });
}

inline MeasurementSet load_measurements(std::istream& is) {
  std::uint64_t offset = 0;
  std::uint64_t line_start = offset;
  if (detail::read_header_line(is, offset) != "SPIM1")
    throw format_error("bad magic, expected SPIM1", line_start);

  line_start = offset;
  const long long m = detail::parse_int(
      detail::expect_key(detail::read_header_line(is, offset), "m", line_start), line_start);
  line_start = offset;
  const long long channels = detail::parse_int(
      detail::expect_key(detail::read_header_line(is, offset), "channels", line_start),
      line_start);
  line_start = offset;
  const std::string wtext =
      detail::expect_key(detail::read_header_line(is, offset), "wavelengths", line_start);
  const std::uint64_t wline = line_start;
  line_start = offset;
  const long long std_flag = detail::parse_int(
      detail::expect_key(detail::read_header_line(is, offset), "standardised", line_start),
      line_start);
  line_start = offset;
  if (!detail::read_header_line(is, offset).empty())
    throw format_error("expected blank line after header", line_start);

  if (m < 1 || channels < 1) throw format_error("inconsistent dimensions in header", 0);
  if (std_flag != 0 && std_flag != 1)
    throw format_error("standardised flag must be 0 or 1", 0);

  MeasurementSet set;
  if (wtext != "none") {
    std::istringstream ws(wtext);
    std::string tok;
    while (std::getline(ws, tok, ',')) {
      try {
        std::size_t pos = 0;
        set.wavelengths_nm.push_back(std::stod(tok, &pos));
        if (pos != tok.size()) throw std::invalid_argument("trailing junk");
      } catch (const std::exception&) {
        throw format_error("malformed wavelength list", wline);
      }
    }
    if (set.wavelengths_nm.size() != static_cast<std::size_t>(channels))
      throw format_error("wavelength count does not match channel count", wline);
    for (std::size_t i = 1; i < set.wavelengths_nm.size(); ++i)
      if (!(set.wavelengths_nm[i] > set.wavelengths_nm[i - 1]))
        throw format_error("wavelengths must be strictly increasing", wline);
  }

  set.channels.resize(channels);
  for (long long c = 0; c < channels; ++c) {
    Measurement& ch = set.channels[c];
    ch.channel_index = static_cast<int>(c);
    ch.standardised = std_flag == 1;
    ch.values.resize(m);
    for (long long i = 0; i < m; ++i)
      ch.values[i] = detail::get_f32le(is, offset);
  }
  if (std_flag == 1) {
    for (long long c = 0; c < channels; ++c)
      set.channels[c].saved_mean = detail::get_f32le(is, offset);
    for (long long c = 0; c < channels; ++c)
      set.channels[c].saved_std = detail::get_f32le(is, offset);
  }
  if (is.peek() != std::istream::traits_type::eof())
    throw format_error("trailing bytes after measurement body", offset);
  return set;
}

inline MeasurementSet load_measurements(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw invalid_input("cannot open measurement file: " + path.string());
  return load_measurements(is);
}

} // namespace spim

#endif // SPIM_IMAGING_HPP
