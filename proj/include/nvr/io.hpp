#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nvr::io {

// All binary payloads are little-endian regardless of host order.

inline void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff),
               static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
  put_u32(os, static_cast<std::uint32_t>(v & 0xffffffffull));
  put_u32(os, static_cast<std::uint32_t>(v >> 32));
}

inline void put_i32(std::ostream& os, std::int32_t v) {
  put_u32(os, static_cast<std::uint32_t>(v));
}

inline void put_f32(std::ostream& os, float v) {
  put_u32(os, std::bit_cast<std::uint32_t>(v));
}

inline void put_u8(std::ostream& os, std::uint8_t v) {
  os.put(static_cast<char>(v));
}

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw std::runtime_error("unexpected end of binary stream");
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::uint64_t get_u64(std::istream& is) {
  const std::uint64_t lo = get_u32(is);
  const std::uint64_t hi = get_u32(is);
  return lo | (hi << 32);
}

inline std::int32_t get_i32(std::istream& is) {
  return static_cast<std::int32_t>(get_u32(is));
}

inline float get_f32(std::istream& is) {
  return std::bit_cast<float>(get_u32(is));
}

inline std::uint8_t get_u8(std::istream& is) {
  const int c = is.get();
  if (c == std::char_traits<char>::eof())
    throw std::runtime_error("unexpected end of binary stream");
  return static_cast<std::uint8_t>(c);
}

// Row blocks of float32, row-major. Values arrive as doubles and are
// narrowed once on write; file round trips are exact at float precision.
inline void append_f32_row(std::ostream& os, std::span<const double> row) {
  for (double v : row) put_f32(os, static_cast<float>(v));
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open for writing: " + p.string());
  return os;
}

inline std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open for reading: " + p.string());
  return is;
}

inline std::vector<std::vector<double>> read_f32_rows(
    const std::filesystem::path& p, std::size_t row_len) {
  std::ifstream is = open_in(p);
  is.seekg(0, std::ios::end);
  const std::uint64_t bytes = static_cast<std::uint64_t>(is.tellg());
  is.seekg(0, std::ios::beg);
  if (bytes % (4 * row_len) != 0)
    throw std::runtime_error("float32 block size is not a whole number of rows: " +
                             p.string());
  const std::size_t n_rows = bytes / (4 * row_len);
  std::vector<std::vector<double>> rows(n_rows);
  for (auto& row : rows) {
    row.resize(row_len);
    for (auto& v : row) v = static_cast<double>(get_f32(is));
  }
  return rows;
}

inline void write_f32_rows(const std::filesystem::path& p,
                           const std::vector<std::vector<double>>& rows) {
  std::ofstream os = open_out(p);
  for (const auto& row : rows) append_f32_row(os, row);
}

}  // namespace nvr::io
