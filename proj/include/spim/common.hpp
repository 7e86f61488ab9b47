#ifndef SPIM_COMMON_HPP
#define SPIM_COMMON_HPP

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace spim {

// Rejected input: bad dimensions, out-of-range arguments, unusable requests.
// CLI maps this to exit code 2.
class invalid_input : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or truncated file contents. CLI maps this to exit code 3.
class format_error : public std::runtime_error {
public:
  format_error(const std::string& what, std::uint64_t byte_offset)
      : std::runtime_error(what + " (byte offset " + std::to_string(byte_offset) + ")"),
        offset_(byte_offset) {}
  std::uint64_t byte_offset() const noexcept { return offset_; }

private:
  std::uint64_t offset_;
};

// Non-finite values or a singular system encountered mid-computation.
// CLI maps this to exit code 4.
class numerical_error : public std::runtime_error {
public:
  explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline void put_u32le(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64le(std::ostream& os, std::uint64_t v) {
  put_u32le(os, static_cast<std::uint32_t>(v));
  put_u32le(os, static_cast<std::uint32_t>(v >> 32));
}

inline void put_f32le(std::ostream& os, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32le(os, bits);
}

inline void put_f64le(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64le(os, bits);
}

inline std::uint32_t get_u32le(std::istream& is, std::uint64_t& offset) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw format_error("unexpected end of file", offset);
  offset += 4;
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::uint64_t get_u64le(std::istream& is, std::uint64_t& offset) {
  std::uint64_t lo = get_u32le(is, offset);
  std::uint64_t hi = get_u32le(is, offset);
  return lo | (hi << 32);
}

inline float get_f32le(std::istream& is, std::uint64_t& offset) {
  std::uint32_t bits = get_u32le(is, offset);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

inline double get_f64le(std::istream& is, std::uint64_t& offset) {
  std::uint64_t bits = get_u64le(is, offset);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

} // namespace detail

// Writes through a temp file and renames into place, so readers never see a
// partially written file.
template <typename WriteFn>
void atomic_write_file(const std::filesystem::path& path, WriteFn&& write_fn) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw invalid_input("cannot open for writing: " + tmp.string());
    write_fn(os);
    os.flush();
    if (!os) throw invalid_input("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

} // namespace spim

#endif // SPIM_COMMON_HPP
