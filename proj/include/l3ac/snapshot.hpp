#pragma once

// Parameter snapshot file ("L3AW"), little-endian:
//   magic "L3AW" | version u16 | count u32 |
//   count x { id_len u32 | id bytes (UTF-8) | rank u32 | dims u32[rank] |
//             float32[prod(dims)] in logical row-major order }
// Values are stored at 32-bit precision; write -> read -> write is byte-exact.

#include "l3ac/tensor.hpp"

#include <iosfwd>
#include <span>
#include <string>

namespace l3ac {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint16_t kParameterFileVersion = 1;

void write_parameters(std::ostream& out, const ParameterSet& params);
/// Reads a snapshot into an existing set: every id must exist with the same
/// shape and every parameter must be present.
void read_parameters(std::istream& in, ParameterSet& params);
/// Reads a snapshot into a new set, shapes taken from the file.
ParameterSet read_parameters(std::istream& in);

namespace le {

void put_u8(std::ostream& out, std::uint8_t v);
void put_u16(std::ostream& out, std::uint16_t v);
void put_u32(std::ostream& out, std::uint32_t v);
void put_u64(std::ostream& out, std::uint64_t v);
void put_f32(std::ostream& out, float v);
std::uint8_t get_u8(std::istream& in);
std::uint16_t get_u16(std::istream& in);
std::uint32_t get_u32(std::istream& in);
std::uint64_t get_u64(std::istream& in);
float get_f32(std::istream& in);
void put_bytes(std::ostream& out, std::string_view bytes);
std::string get_bytes(std::istream& in, std::size_t n);

}  // namespace le

}  // namespace l3ac
