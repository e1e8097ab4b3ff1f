#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>

// Little-endian primitives shared by the checkpoint, scene, and view formats.

namespace vv::binio {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename UInt>
inline void put_le(std::ostream& out, UInt v) {
  char bytes[sizeof(UInt)];
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  }
  out.write(bytes, sizeof(UInt));
}

template <typename UInt>
inline UInt get_le(std::istream& in) {
  unsigned char bytes[sizeof(UInt)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(UInt))) {
    throw FormatError("unexpected end of file");
  }
  UInt v = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(bytes[i]) << (8 * i);
  return v;
}

inline void put_u64(std::ostream& out, std::uint64_t v) { put_le<std::uint64_t>(out, v); }
inline std::uint64_t get_u64(std::istream& in) { return get_le<std::uint64_t>(in); }
inline void put_i32(std::ostream& out, std::int32_t v) {
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(v));
}
inline std::int32_t get_i32(std::istream& in) {
  return static_cast<std::int32_t>(get_le<std::uint32_t>(in));
}
inline void put_f64(std::ostream& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }
inline double get_f64(std::istream& in) { return std::bit_cast<double>(get_le<std::uint64_t>(in)); }
inline void put_f32(std::ostream& out, float v) { put_le(out, std::bit_cast<std::uint32_t>(v)); }
inline float get_f32(std::istream& in) { return std::bit_cast<float>(get_le<std::uint32_t>(in)); }

inline void expect_magic(std::istream& in, std::string_view magic) {
  std::string got(magic.size(), '\0');
  if (!in.read(got.data(), static_cast<std::streamsize>(got.size())) || got != magic) {
    throw FormatError("bad magic: expected '" + std::string(magic.substr(0, magic.size() - 1)) +
                      "'");
  }
}

}  // namespace vv::binio
