#include "hsum/array_io.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "hsum/error.hpp"

namespace hsum {
namespace {

void put_u16(std::ostream& out, std::uint16_t v) {
  const std::array<char, 2> bytes = {static_cast<char>(v & 0xFF),
                                     static_cast<char>((v >> 8) & 0xFF)};
  out.write(bytes.data(), bytes.size());
}

std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_f32(std::ostream& out, float f) {
  const auto bits = std::bit_cast<std::uint32_t>(f);
  const std::array<char, 4> bytes = {
      static_cast<char>(bits & 0xFF), static_cast<char>((bits >> 8) & 0xFF),
      static_cast<char>((bits >> 16) & 0xFF), static_cast<char>((bits >> 24) & 0xFF)};
  out.write(bytes.data(), bytes.size());
}

float get_f32(const unsigned char* p) {
  const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                             (static_cast<std::uint32_t>(p[1]) << 8) |
                             (static_cast<std::uint32_t>(p[2]) << 16) |
                             (static_cast<std::uint32_t>(p[3]) << 24);
  return std::bit_cast<float>(bits);
}

}  // namespace

void write_array(std::ostream& out, const Matrix& m) {
  if (m.rows() > kMaxArrayExtent || m.cols() > kMaxArrayExtent) {
    throw DimensionError("array of shape " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()) + " exceeds the u16 header limit");
  }
  out.write(kArrayMagic, sizeof(kArrayMagic));
  put_u16(out, static_cast<std::uint16_t>(m.rows()));
  put_u16(out, static_cast<std::uint16_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      put_f32(out, static_cast<float>(m(r, c)));
    }
  }
}

Matrix read_array(std::istream& in, const std::string& what) {
  unsigned char header[kArrayHeaderBytes];
  if (!in.read(reinterpret_cast<char*>(header), sizeof(header))) {
    throw SchemaError(what + ": truncated array header");
  }
  if (std::memcmp(header, kArrayMagic, sizeof(kArrayMagic)) != 0) {
    throw SchemaError(what + ": bad magic, expected \"HSUM\"");
  }
  const std::uint16_t rows = get_u16(header + 4);
  const std::uint16_t cols = get_u16(header + 6);
  Matrix m(rows, cols);
  std::string payload(static_cast<std::size_t>(rows) * cols * 4, '\0');
  if (!payload.empty() && !in.read(payload.data(), static_cast<std::streamsize>(payload.size()))) {
    throw SchemaError(what + ": truncated array payload");
  }
  const auto* p = reinterpret_cast<const unsigned char*>(payload.data());
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c, p += 4) {
      m(r, c) = get_f32(p);
    }
  }
  return m;
}

void write_array(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw FileError("cannot open " + path.string() + " for writing");
  }
  write_array(out, m);
  if (!out) {
    throw FileError("failed writing " + path.string());
  }
}

Matrix read_array(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FileError("cannot open " + path.string());
  }
  Matrix m = read_array(in, path.string());
  if (in.peek() != std::char_traits<char>::eof()) {
    throw SchemaError(path.string() + ": trailing bytes after array payload");
  }
  return m;
}

}  // namespace hsum
