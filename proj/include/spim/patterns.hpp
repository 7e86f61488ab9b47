#ifndef SPIM_PATTERNS_HPP
#define SPIM_PATTERNS_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "spim/common.hpp"
#include "spim/rng.hpp"

namespace spim {

enum class PatternKind { continuous, binary_sh, binary_learned };

/// m x n measurement matrix. Binary kinds keep entries as 0/1 bytes; the
/// continuous kind (an encoder mid-training) keeps floats.
struct PatternMatrix {
  int m = 0;
  int n = 0;
  PatternKind kind = PatternKind::binary_sh;
  std::uint64_t seed = 0;
  std::vector<std::uint8_t> bits;  // binary kinds, row-major {0,1}
  std::vector<float> values;       // continuous kind, row-major

  bool is_binary() const { return kind != PatternKind::continuous; }

  double entry(int i, int j) const {
    const std::size_t idx = static_cast<std::size_t>(i) * n + j;
    return is_binary() ? static_cast<double>(bits[idx]) : static_cast<double>(values[idx]);
  }

  int side() const { return static_cast<int>(std::lround(std::sqrt(static_cast<double>(n)))); }
};

/// Sylvester-ordered Hadamard matrix, entries in {-1, +1}.
struct HadamardMatrix {
  int order_k = 0;
  int n = 1;
  std::vector<std::int8_t> entries;  // row-major

  std::int8_t at(int i, int j) const {
    return entries[static_cast<std::size_t>(i) * n + j];
  }
};

struct PatternDiagnostics {
  double fill_factor = 0.0;
  std::vector<double> singular_values;  // descending
};

/// H0 = [1]; H_{k+1} = [[H, H], [H, -H]].
inline HadamardMatrix sylvester_hadamard(int k) {
  if (k < 0) throw invalid_input("hadamard order must be >= 0");
  if (k > 14) throw invalid_input("hadamard order above 14 exceeds the size limit");
  HadamardMatrix h;
  h.order_k = k;
  h.n = 1 << k;
  h.entries.resize(static_cast<std::size_t>(h.n) * h.n);
  // the recursion H_{k+1} = [[H, H], [H, -H]] closes to sign (-1)^popcount(i AND j)
  for (int i = 0; i < h.n; ++i)
    for (int j = 0; j < h.n; ++j)
      h.entries[static_cast<std::size_t>(i) * h.n + j] =
          (std::popcount(static_cast<unsigned>(i & j)) & 1) ? -1 : 1;
  return h;
}

/// Row/column-permuted Hadamard with -1 mapped to 0. Seed 0 is reserved for
/// identity permutations (test hook).
inline PatternMatrix scrambled_hadamard(int n, std::uint64_t seed) {
  if (n < 1 || (n & (n - 1)) != 0)
    throw invalid_input("scrambled hadamard size must be a power of two");
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
  if (side * side != n)
    throw invalid_input("scrambled hadamard size must be a perfect square");
  int k = 0;
  while ((1 << k) < n) ++k;
  const HadamardMatrix h = sylvester_hadamard(k);

  std::vector<std::uint32_t> row_perm, col_perm;
  if (seed == 0) {
    row_perm.resize(n);
    col_perm.resize(n);
    std::iota(row_perm.begin(), row_perm.end(), 0u);
    std::iota(col_perm.begin(), col_perm.end(), 0u);
  } else {
    Rng row_rng(seed, 0);
    Rng col_rng(seed, 1);
    row_perm = row_rng.permutation(n);
    col_perm = col_rng.permutation(n);
  }

  PatternMatrix p;
  p.m = n;
  p.n = n;
  p.kind = PatternKind::binary_sh;
  p.seed = seed;
  p.bits.resize(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    const std::int8_t* src = &h.entries[static_cast<std::size_t>(row_perm[i]) * n];
    std::uint8_t* dst = &p.bits[static_cast<std::size_t>(i) * n];
    for (int j = 0; j < n; ++j) dst[j] = src[col_perm[j]] > 0 ? 1 : 0;
  }
  return p;
}

namespace detail {

inline int find_dc_row(const PatternMatrix& p) {
  if (!p.is_binary()) return -1;
  for (int i = 0; i < p.m; ++i) {
    const std::uint8_t* row = &p.bits[static_cast<std::size_t>(i) * p.n];
    if (std::all_of(row, row + p.n, [](std::uint8_t b) { return b == 1; })) return i;
  }
  return -1;
}

} // namespace detail

/// Seed-deterministic m-row subset. The all-ones (DC) row is always kept when
/// present; without it, standardised decoding loses the mean intensity.
inline PatternMatrix select_rows(const PatternMatrix& p, int m, std::uint64_t seed) {
  if (m < 1 || m > p.m) throw invalid_input("row selection count out of range");

  std::vector<std::uint32_t> chosen;
  if (m == p.m) {
    chosen.resize(p.m);
    std::iota(chosen.begin(), chosen.end(), 0u);
  } else {
    const int dc = detail::find_dc_row(p);
    std::vector<std::uint32_t> pool;
    pool.reserve(p.m);
    for (int i = 0; i < p.m; ++i)
      if (i != dc) pool.push_back(static_cast<std::uint32_t>(i));
    Rng rng(seed, 2);
    rng.shuffle(pool);
    const int want = dc >= 0 ? m - 1 : m;
    chosen.assign(pool.begin(), pool.begin() + want);
    if (dc >= 0) chosen.push_back(static_cast<std::uint32_t>(dc));
    std::sort(chosen.begin(), chosen.end());
  }

  PatternMatrix out;
  out.m = m;
  out.n = p.n;
  out.kind = p.kind;
  out.seed = p.seed;
  if (p.is_binary()) {
    out.bits.resize(static_cast<std::size_t>(m) * p.n);
    for (int i = 0; i < m; ++i)
      std::copy_n(&p.bits[static_cast<std::size_t>(chosen[i]) * p.n], p.n,
                  &out.bits[static_cast<std::size_t>(i) * p.n]);
  } else {
    out.values.resize(static_cast<std::size_t>(m) * p.n);
    for (int i = 0; i < m; ++i)
      std::copy_n(&p.values[static_cast<std::size_t>(chosen[i]) * p.n], p.n,
                  &out.values[static_cast<std::size_t>(i) * p.n]);
  }
  return out;
}

/// Fraction of ones, (1/mn) sum e_ij.
inline double fill_factor(const PatternMatrix& p) {
  if (!p.is_binary()) throw invalid_input("fill factor is defined for binary patterns only");
  std::uint64_t ones = 0;
  for (std::uint8_t b : p.bits) ones += b;
  return static_cast<double>(ones) / (static_cast<double>(p.m) * static_cast<double>(p.n));
}

namespace detail {

/// Cyclic Jacobi eigenvalue iteration on a symmetric matrix (row-major,
/// destroyed). Returns eigenvalues, unordered.
inline std::vector<double> jacobi_eigenvalues(std::vector<double>& a, int n) {
  auto at = [&](int i, int j) -> double& { return a[static_cast<std::size_t>(i) * n + j]; };
  double frob = 0.0;
  for (double v : a) frob += v * v;
  frob = std::sqrt(frob);
  const double tol = 1e-14 * (frob > 0 ? frob : 1.0);

  for (int sweep = 0; sweep < 50; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) off += 2.0 * at(i, j) * at(i, j);
    if (std::sqrt(off) < tol) break;

    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = at(p, q);
        if (std::abs(apq) < tol / n) continue;
        const double theta = (at(q, q) - at(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = at(k, p), akq = at(k, q);
          at(k, p) = c * akp - s * akq;
          at(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = at(p, k), aqk = at(q, k);
          at(p, k) = c * apk - s * aqk;
          at(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> eig(n);
  for (int i = 0; i < n; ++i) eig[i] = at(i, i);
  return eig;
}

} // namespace detail

/// Singular values of P, descending, via Jacobi eigendecomposition of P*P^T.
inline PatternDiagnostics singular_spectrum(const PatternMatrix& p) {
  if (p.m > p.n) throw invalid_input("singular spectrum expects m <= n");
  const int m = p.m, n = p.n;
  std::vector<double> gram(static_cast<std::size_t>(m) * m, 0.0);
  std::vector<double> row_i(n), row_j(n);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j <= i; ++j) {
      double dot = 0.0;
      if (p.is_binary()) {
        const std::uint8_t* ri = &p.bits[static_cast<std::size_t>(i) * n];
        const std::uint8_t* rj = &p.bits[static_cast<std::size_t>(j) * n];
        std::uint32_t acc = 0;
        for (int k = 0; k < n; ++k) acc += static_cast<std::uint32_t>(ri[k] & rj[k]);
        dot = acc;
      } else {
        const float* ri = &p.values[static_cast<std::size_t>(i) * n];
        const float* rj = &p.values[static_cast<std::size_t>(j) * n];
        for (int k = 0; k < n; ++k) dot += static_cast<double>(ri[k]) * rj[k];
      }
      gram[static_cast<std::size_t>(i) * m + j] = dot;
      gram[static_cast<std::size_t>(j) * m + i] = dot;
    }
  }
  std::vector<double> eig = detail::jacobi_eigenvalues(gram, m);
  PatternDiagnostics d;
  d.singular_values.resize(m);
  for (int i = 0; i < m; ++i) d.singular_values[i] = std::sqrt(std::max(eig[i], 0.0));
  std::sort(d.singular_values.begin(), d.singular_values.end(), std::greater<>());
  if (p.is_binary()) d.fill_factor = fill_factor(p);
  return d;
}

// ---------------------------------------------------------------------------
// SPIP pattern file format: ASCII header, blank line, bit-packed rows
// (MSB-first, each row padded to a whole byte).

namespace detail {

inline std::string read_header_line(std::istream& is, std::uint64_t& offset) {
  std::string line;
  if (!std::getline(is, line)) throw format_error("truncated header", offset);
  offset += line.size() + 1;
  return line;
}

inline std::string expect_key(const std::string& line, const std::string& key,
                              std::uint64_t line_start) {
  const std::string prefix = key + "=";
  if (line.rfind(prefix, 0) != 0)
    throw format_error("expected header line '" + key + "=...'", line_start);
  return line.substr(prefix.size());
}

inline long long parse_int(const std::string& text, std::uint64_t line_start) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(text, &pos);
    if (pos != text.size()) throw std::invalid_argument("trailing junk");
    return v;
  } catch (const std::exception&) {
    throw format_error("malformed integer '" + text + "'", line_start);
  }
}

inline unsigned long long parse_uint(const std::string& text, std::uint64_t line_start) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(text, &pos);
    if (pos != text.size()) throw std::invalid_argument("trailing junk");
    return v;
  } catch (const std::exception&) {
    throw format_error("malformed integer '" + text + "'", line_start);
  }
}

} // namespace detail

inline void save_patterns(std::ostream& os, const PatternMatrix& p) {
  if (!p.is_binary())
    throw invalid_input("SPIP stores binary patterns only");
  os << "SPIP1\n"
     << "m=" << p.m << "\n"
     << "n=" << p.n << "\n"
     << "side=" << p.side() << "\n"
     << "kind=" << (p.kind == PatternKind::binary_sh ? "sh" : "learned") << "\n"
     << "seed=" << p.seed << "\n\n";
  const int row_bytes = (p.n + 7) / 8;
  std::vector<unsigned char> packed(row_bytes);
  for (int i = 0; i < p.m; ++i) {
    std::fill(packed.begin(), packed.end(), 0);
    const std::uint8_t* row = &p.bits[static_cast<std::size_t>(i) * p.n];
    for (int j = 0; j < p.n; ++j)
      if (row[j]) packed[j >> 3] |= static_cast<unsigned char>(0x80u >> (j & 7));
    os.write(reinterpret_cast<const char*>(packed.data()), row_bytes);
  }
}

inline void save_patterns(const std::filesystem::path& path, const PatternMatrix& p) {
  atomic_write_file(path, [&](std::ostream& os) { save_patterns(os, p); });
}

inline PatternMatrix load_patterns(std::istream& is) {
  std::uint64_t offset = 0;
  std::uint64_t line_start = offset;
  std::string magic = detail::read_header_line(is, offset);
  if (magic != "SPIP1") throw format_error("bad magic, expected SPIP1", line_start);

  line_start = offset;
  const long long m = detail::parse_int(
      detail::expect_key(detail::read_header_line(is, offset), "m", line_start), line_start);
  line_start = offset;
  const long long n = detail::parse_int(
      detail::expect_key(detail::read_header_line(is, offset), "n", line_start), line_start);
  line_start = offset;
  const long long side = detail::parse_int(
      detail::expect_key(detail::read_header_line(is, offset), "side", line_start), line_start);
  line_start = offset;
  const std::string kind_text =
      detail::expect_key(detail::read_header_line(is, offset), "kind", line_start);
  line_start = offset;
  const std::uint64_t seed = detail::parse_uint(
      detail::expect_key(detail::read_header_line(is, offset), "seed", line_start), line_start);
  line_start = offset;
  if (!detail::read_header_line(is, offset).empty())
    throw format_error("expected blank line after header", line_start);

  if (m < 1 || n < 1 || m > n) throw format_error("inconsistent dimensions in header", 0);
  if (side * side != n) throw format_error("side^2 does not match n", 0);
  PatternMatrix p;
  p.m = static_cast<int>(m);
  p.n = static_cast<int>(n);
  p.seed = seed;
  if (kind_text == "sh")
    p.kind = PatternKind::binary_sh;
  else if (kind_text == "learned")
    p.kind = PatternKind::binary_learned;
  else
    throw format_error("unknown pattern kind '" + kind_text + "'", 0);

  const int row_bytes = (p.n + 7) / 8;
  p.bits.resize(static_cast<std::size_t>(p.m) * p.n);
  std::vector<unsigned char> packed(row_bytes);
  for (int i = 0; i < p.m; ++i) {
    if (!is.read(reinterpret_cast<char*>(packed.data()), row_bytes))
      throw format_error("truncated pattern body", offset);
    offset += row_bytes;
    std::uint8_t* row = &p.bits[static_cast<std::size_t>(i) * p.n];
    for (int j = 0; j < p.n; ++j)
      row[j] = (packed[j >> 3] >> (7 - (j & 7))) & 1u;
  }
  if (is.peek() != std::istream::traits_type::eof())
    throw format_error("trailing bytes after pattern body", offset);
  return p;
}

inline PatternMatrix load_patterns(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw invalid_input("cannot open pattern file: " + path.string());
  return load_patterns(is);
}

} // namespace spim

#endif // SPIM_PATTERNS_HPP
