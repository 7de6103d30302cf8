#pragma once

// Little-endian scalar IO shared by the DPR1 and STVW readers/writers.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>

#include "stvo/error.hpp"

namespace stvo::detail {

template <typename U>
void write_le(std::ostream& os, U value) {
  unsigned char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    bytes[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xFF);
  }
  os.write(reinterpret_cast<const char*>(bytes), sizeof(U));
}

template <typename U>
U read_le(std::istream& is) {
  unsigned char bytes[sizeof(U)];
  if (!is.read(reinterpret_cast<char*>(bytes), sizeof(U))) {
    throw Error(ErrorCode::kMalformedFile, "unexpected end of file");
  }
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    value |= static_cast<U>(bytes[i]) << (8 * i);
  }
  return value;
}

inline void write_f32(std::ostream& os, float v) {
  write_le<std::uint32_t>(os, std::bit_cast<std::uint32_t>(v));
}
inline float read_f32(std::istream& is) {
  return std::bit_cast<float>(read_le<std::uint32_t>(is));
}
inline void write_f64(std::ostream& os, double v) {
  write_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(v));
}
inline double read_f64(std::istream& is) {
  return std::bit_cast<double>(read_le<std::uint64_t>(is));
}

inline void expect_magic(std::istream& is, const char (&magic)[5]) {
  char buf[4];
  if (!is.read(buf, 4) || std::memcmp(buf, magic, 4) != 0) {
    throw Error(ErrorCode::kMalformedFile, std::string("bad magic, expected ") + magic);
  }
}

}  // namespace stvo::detail
