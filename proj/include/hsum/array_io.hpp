#pragma once

#include <filesystem>
#include <iosfwd>

#include "hsum/tensor_types.hpp"

namespace hsum {

// Binary array format shared by feature files and checkpoints:
//   bytes 0-3  magic "HSUM"
//   bytes 4-5  rows (u16, little-endian)
//   bytes 6-7  cols (u16, little-endian)
//   then rows*cols float32 values, little-endian, row-major.
inline constexpr char kArrayMagic[4] = {'H', 'S', 'U', 'M'};
inline constexpr std::size_t kArrayHeaderBytes = 8;
inline constexpr Eigen::Index kMaxArrayExtent = 65535;

// Values are rounded to float32 on write.
void write_array(std::ostream& out, const Matrix& m);
Matrix read_array(std::istream& in, const std::string& what = "array");

void write_array(const std::filesystem::path& path, const Matrix& m);
Matrix read_array(const std::filesystem::path& path);

}  // namespace hsum
