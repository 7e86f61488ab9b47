#ifndef SPIM_DATAIO_HPP
#define SPIM_DATAIO_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "spim/common.hpp"
#include "spim/image.hpp"
#include "spim/rng.hpp"

namespace spim {

struct DatasetItem {
  std::string id;
  Image image;
};

struct Dataset {
  std::vector<DatasetItem> items;
  int side = 0;
  int skipped = 0;  // unreadable or unusable files
};

// ---------------------------------------------------------------------------
// PGM (P5), 8-bit or 16-bit big-endian.

namespace detail {

inline int pgm_token(std::istream& is, std::uint64_t& offset) {
  // skips whitespace and '#' comments, returns a nonnegative integer
  int c = is.get();
  while (c != EOF) {
    ++offset;
    if (c == '#') {
      while (c != EOF && c != '\n') {
        c = is.get();
        if (c != EOF) ++offset;
      }
    } else if (!std::isspace(c)) {
      break;
    }
    c = is.get();
  }
  if (c == EOF) throw format_error("truncated header", offset);
  if (!std::isdigit(c)) throw format_error("expected integer in header", offset - 1);
  long long v = 0;
  while (c != EOF && std::isdigit(c)) {
    v = v * 10 + (c - '0');
    if (v > (1ll << 31)) throw format_error("header integer out of range", offset);
    c = is.get();
    if (c != EOF) ++offset;
  }
  if (c == EOF) throw format_error("truncated header", offset);
  if (!std::isspace(c)) throw format_error("expected whitespace after integer", offset - 1);
  return static_cast<int>(v);
}

} // namespace detail

struct PgmImage {
  int width = 0, height = 0;
  std::vector<double> pixels;  // [0,1]
};

inline PgmImage load_pgm(std::istream& is) {
  std::uint64_t offset = 0;
  char m0 = 0, m1 = 0;
  if (!is.get(m0) || !is.get(m1)) throw format_error("truncated header", 0);
  offset = 2;
  if (m0 != 'P' || m1 != '5') throw format_error("bad magic, expected P5", 0);
  const int width = detail::pgm_token(is, offset);
  const int height = detail::pgm_token(is, offset);
  const int maxval = detail::pgm_token(is, offset);
  if (width < 1 || height < 1) throw format_error("bad image dimensions", offset);
  if (maxval < 1 || maxval > 65535) throw format_error("bad maxval", offset);

  PgmImage img;
  img.width = width;
  img.height = height;
  img.pixels.resize(static_cast<std::size_t>(width) * height);
  const int bytes = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(img.pixels.size() * bytes);
  if (!is.read(reinterpret_cast<char*>(raw.data()),
               static_cast<std::streamsize>(raw.size())))
    throw format_error("truncated pixel data", offset);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const unsigned v = bytes == 1
                           ? raw[i]
                           : (static_cast<unsigned>(raw[2 * i]) << 8) | raw[2 * i + 1];
    img.pixels[i] = static_cast<double>(v) / maxval;
  }
  return img;
}

inline PgmImage load_pgm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw invalid_input("cannot open image: " + path.string());
  return load_pgm(is);
}

inline void save_pgm(std::ostream& os, const Image& img, int bits = 8) {
  if (bits != 8 && bits != 16) throw invalid_input("pgm depth must be 8 or 16");
  const int maxval = bits == 8 ? 255 : 65535;
  os << "P5\n" << img.side << ' ' << img.side << '\n' << maxval << '\n';
  for (double v : img.pixels) {
    const long q = std::lround(clamp01(v) * maxval);
    if (bits == 16) os.put(static_cast<char>((q >> 8) & 0xff));
    os.put(static_cast<char>(q & 0xff));
  }
}

inline void save_pgm(const std::filesystem::path& path, const Image& img, int bits = 8) {
  atomic_write_file(path, [&](std::ostream& os) { save_pgm(os, img, bits); });
}

// ---------------------------------------------------------------------------
// Reshaping to the working resolution.

/// Centre-crop to side*2^k (largest k fitting), then k rounds of mean-
/// preserving 2x2 block averaging down to the requested side.
inline Image fit_to_side(const PgmImage& src, int side) {
  const int short_edge = std::min(src.width, src.height);
  if (short_edge < side) throw invalid_input("image smaller than requested side");
  int big = side;
  while (big * 2 <= short_edge) big *= 2;
  const int x0 = (src.width - big) / 2;
  const int y0 = (src.height - big) / 2;

  std::vector<double> cur(static_cast<std::size_t>(big) * big);
  for (int r = 0; r < big; ++r)
    for (int c = 0; c < big; ++c)
      cur[static_cast<std::size_t>(r) * big + c] =
          src.pixels[static_cast<std::size_t>(y0 + r) * src.width + (x0 + c)];

  while (big > side) {
    const int half = big / 2;
    std::vector<double> next(static_cast<std::size_t>(half) * half);
    for (int r = 0; r < half; ++r)
      for (int c = 0; c < half; ++c)
        next[static_cast<std::size_t>(r) * half + c] =
            0.25 * (cur[static_cast<std::size_t>(2 * r) * big + 2 * c] +
                    cur[static_cast<std::size_t>(2 * r) * big + 2 * c + 1] +
                    cur[static_cast<std::size_t>(2 * r + 1) * big + 2 * c] +
                    cur[static_cast<std::size_t>(2 * r + 1) * big + 2 * c + 1]);
    cur = std::move(next);
    big = half;
  }
  return Image(side, std::move(cur));
}

/// Loads every .pgm in the directory (filename order), reshapes to `side`,
/// seeded-shuffles. Unreadable or undersized files are skipped and counted.
inline Dataset load_directory(const std::filesystem::path& dir, int side, int limit,
                              std::uint64_t seed) {
  if (!std::filesystem::is_directory(dir))
    throw invalid_input("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".pgm")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  Dataset ds;
  ds.side = side;
  for (const auto& path : files) {
    try {
      ds.items.push_back({path.filename().string(), fit_to_side(load_pgm(path), side)});
    } catch (const format_error&) {
      ++ds.skipped;
    } catch (const invalid_input&) {
      ++ds.skipped;
    }
  }
  if (ds.items.empty()) throw invalid_input("no usable images in " + dir.string());

  Rng rng(seed, 30);
  std::vector<std::uint32_t> order = rng.permutation(static_cast<std::uint32_t>(ds.items.size()));
  std::vector<DatasetItem> shuffled;
  shuffled.reserve(ds.items.size());
  for (std::uint32_t idx : order) shuffled.push_back(std::move(ds.items[idx]));
  ds.items = std::move(shuffled);
  if (limit > 0 && static_cast<int>(ds.items.size()) > limit) ds.items.resize(limit);
  return ds;
}

// ---------------------------------------------------------------------------
// Synthetic piecewise-constant phantoms (TV-sparse by construction).

/// 2-6 random axis-aligned rectangles and ellipses, intensities in [0.1, 1],
/// later shapes overwrite earlier ones, background 0. Image i depends only on
/// (seed, i), so prefixes agree across different counts.
inline Image synth_phantom(int side, std::uint64_t seed, std::uint64_t index) {
  if (side < 8) throw invalid_input("phantom side must be >= 8");
  Rng rng(seed, 40 + index);
  Image img(side);
  const int shapes = 2 + static_cast<int>(rng.uniform_below(5));
  for (int s = 0; s < shapes; ++s) {
    const bool ellipse = rng.uniform_below(2) == 1;
    const double intensity = rng.uniform_in(0.1, 1.0);
    const double cx = rng.uniform_in(0.0, side);
    const double cy = rng.uniform_in(0.0, side);
    const double rx = rng.uniform_in(0.05 * side, 0.3 * side);
    const double ry = rng.uniform_in(0.05 * side, 0.3 * side);
    for (int r = 0; r < side; ++r) {
      for (int c = 0; c < side; ++c) {
        const double dx = (c + 0.5 - cx) / rx;
        const double dy = (r + 0.5 - cy) / ry;
        const bool inside = ellipse ? dx * dx + dy * dy <= 1.0
                                    : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
        if (inside) img.at(r, c) = intensity;
      }
    }
  }
  return img;
}

inline Dataset synth_phantoms(int count, int side, std::uint64_t seed) {
  if (count < 0) throw invalid_input("phantom count must be >= 0");
  if (side < 8) throw invalid_input("phantom side must be >= 8");
  Dataset ds;
  ds.side = side;
  for (int i = 0; i < count; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "synth-%06d", i);
    ds.items.push_back({id, synth_phantom(side, seed, static_cast<std::uint64_t>(i))});
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Deterministic splits.

struct SplitIndices {
  std::vector<int> train, val, test;
};

/// Seeded shuffle, then cumulative-rounded cuts (each fraction realised
/// within one item; no index lands in two splits).
inline SplitIndices split_dataset(int count, double train_frac, double val_frac,
                                  double test_frac, std::uint64_t seed) {
  if (count < 1) throw invalid_input("nothing to split");
  if (train_frac < 0 || val_frac < 0 || test_frac < 0 ||
      std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-6)
    throw invalid_input("split fractions must be nonnegative and sum to 1");
  Rng rng(seed, 31);
  const std::vector<std::uint32_t> order = rng.permutation(static_cast<std::uint32_t>(count));
  const int c1 = static_cast<int>(std::lround(count * train_frac));
  const int c2 = static_cast<int>(std::lround(count * (train_frac + val_frac)));
  SplitIndices s;
  for (int i = 0; i < count; ++i) {
    const int idx = static_cast<int>(order[i]);
    if (i < c1)
      s.train.push_back(idx);
    else if (i < c2)
      s.val.push_back(idx);
    else
      s.test.push_back(idx);
  }
  return s;
}

/// Anisotropic total variation (mean |forward difference| in both axes).
inline double anisotropic_tv(const Image& img) {
  double acc = 0;
  for (int r = 0; r < img.side; ++r)
    for (int c = 0; c < img.side; ++c) {
      if (c + 1 < img.side) acc += std::abs(img.at(r, c + 1) - img.at(r, c));
      if (r + 1 < img.side) acc += std::abs(img.at(r + 1, c) - img.at(r, c));
    }
  return acc / (static_cast<double>(img.side) * img.side);
}

} // namespace spim

#endif // SPIM_DATAIO_HPP
