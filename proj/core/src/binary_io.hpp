#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <type_traits>

#include "mgnn/common.hpp"

namespace mgnn::detail {

// Explicit little-endian encoding, independent of host byte order.
template <typename U>
void put_le(std::ostream& out, U value) {
  static_assert(std::is_unsigned_v<U>);
  char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((value >> (8 * i)) & 0xFFu);
  out.write(buf, sizeof(U));
}

template <typename U>
U get_le(std::istream& in, const std::string& what) {
  static_assert(std::is_unsigned_v<U>);
  unsigned char buf[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(U))) throw Error("truncated file while reading " + what);
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(buf[i]) << (8 * i);
  return value;
}

inline void put_f32(std::ostream& out, float v) { put_le(out, std::bit_cast<std::uint32_t>(v)); }
inline float get_f32(std::istream& in, const std::string& what) {
  return std::bit_cast<float>(get_le<std::uint32_t>(in, what));
}

inline void put_string(std::ostream& out, const std::string& s) {
  put_le(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& in, const std::string& what) {
  const auto n = get_le<std::uint32_t>(in, what + " length");
  std::string s(n, '\0');
  if (n > 0 && !in.read(s.data(), n)) throw Error("truncated file while reading " + what);
  return s;
}

}  // namespace mgnn::detail
