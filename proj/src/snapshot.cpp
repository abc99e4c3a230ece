#include "l3ac/snapshot.hpp"

#include <bit>
#include <istream>
#include <ostream>

namespace l3ac {
namespace le {

namespace {
template <typename T>
void put(std::ostream& out, T v) {
  char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(bytes, sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw FormatError("unexpected end of data");
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(bytes[i]) << (8 * i);
  return v;
}
}  // namespace

void put_u8(std::ostream& out, std::uint8_t v) { put(out, v); }
void put_u16(std::ostream& out, std::uint16_t v) { put(out, v); }
void put_u32(std::ostream& out, std::uint32_t v) { put(out, v); }
void put_u64(std::ostream& out, std::uint64_t v) { put(out, v); }
void put_f32(std::ostream& out, float v) { put(out, std::bit_cast<std::uint32_t>(v)); }
std::uint8_t get_u8(std::istream& in) { return get<std::uint8_t>(in); }
std::uint16_t get_u16(std::istream& in) { return get<std::uint16_t>(in); }
std::uint32_t get_u32(std::istream& in) { return get<std::uint32_t>(in); }
std::uint64_t get_u64(std::istream& in) { return get<std::uint64_t>(in); }
float get_f32(std::istream& in) { return std::bit_cast<float>(get<std::uint32_t>(in)); }

void put_bytes(std::ostream& out, std::string_view bytes) {
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string get_bytes(std::istream& in, std::size_t n) {
  std::string s(n, '\0');
  if (n > 0 && !in.read(s.data(), static_cast<std::streamsize>(n))) throw FormatError("unexpected end of data");
  return s;
}

}  // namespace le

namespace {

// Logical row-major position -> storage coordinates. Rank-3 tensors keep
// (out, in, k) logically but store column tap*in + c.
std::pair<Index, Index> storage_index(const std::vector<Index>& shape, Index flat) {
  if (shape.size() == 3) {
    const Index in = shape[1];
    const Index k = shape[2];
    const Index o = flat / (in * k);
    const Index c = (flat / k) % in;
    const Index tap = flat % k;
    return {o, tap * in + c};
  }
  Index inner = 1;
  for (std::size_t i = 1; i < shape.size(); ++i) inner *= shape[i];
  return {flat / inner, flat % inner};
}

struct Record {
  std::string id;
  std::vector<Index> shape;
  std::vector<float> data;
};

Record read_record(std::istream& in) {
  Record r;
  const std::uint32_t id_len = le::get_u32(in);
  if (id_len > (1u << 16)) throw FormatError("parameter id too long");
  r.id = le::get_bytes(in, id_len);
  const std::uint32_t rank = le::get_u32(in);
  if (rank == 0 || rank > 8) throw FormatError("bad parameter rank in '" + r.id + "'");
  Index total = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    r.shape.push_back(static_cast<Index>(le::get_u32(in)));
    total *= r.shape.back();
    if (total > (Index{1} << 32)) throw FormatError("parameter too large");
  }
  r.data.resize(static_cast<std::size_t>(total));
  for (auto& v : r.data) v = le::get_f32(in);
  return r;
}

Mat to_storage(const Record& r) {
  Index cols = 1;
  for (std::size_t i = 1; i < r.shape.size(); ++i) cols *= r.shape[i];
  Mat m(r.shape.front(), cols);
  for (Index i = 0; i < static_cast<Index>(r.data.size()); ++i) {
    const auto [row, col] = storage_index(r.shape, i);
    m(row, col) = static_cast<double>(r.data[static_cast<std::size_t>(i)]);
  }
  return m;
}

void read_header(std::istream& in, std::uint32_t& count) {
  if (le::get_bytes(in, 4) != "L3AW") throw FormatError("not a parameter snapshot (bad magic)");
  const std::uint16_t version = le::get_u16(in);
  if (version != kParameterFileVersion) throw FormatError("unsupported parameter snapshot version");
  count = le::get_u32(in);
}

}  // namespace

void write_parameters(std::ostream& out, const ParameterSet& params) {
  le::put_bytes(out, "L3AW");
  le::put_u16(out, kParameterFileVersion);
  le::put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    le::put_u32(out, static_cast<std::uint32_t>(p->id().size()));
    le::put_bytes(out, p->id());
    le::put_u32(out, static_cast<std::uint32_t>(p->shape().size()));
    for (Index d : p->shape()) le::put_u32(out, static_cast<std::uint32_t>(d));
    for (Index i = 0; i < p->numel(); ++i) {
      const auto [row, col] = storage_index(p->shape(), i);
      le::put_f32(out, static_cast<float>(p->value(row, col)));
    }
  }
}

void read_parameters(std::istream& in, ParameterSet& params) {
  std::uint32_t count = 0;
  read_header(in, count);
  if (count != params.size()) throw FormatError("parameter count mismatch");
  for (std::uint32_t i = 0; i < count; ++i) {
    Record r = read_record(in);
    Parameter* p = params.find(r.id);
    if (p == nullptr) throw FormatError("unknown parameter '" + r.id + "'");
    if (p->shape() != r.shape) throw FormatError("shape mismatch for '" + r.id + "'");
    p->value = to_storage(r);
  }
}

ParameterSet read_parameters(std::istream& in) {
  std::uint32_t count = 0;
  read_header(in, count);
  ParameterSet set;
  for (std::uint32_t i = 0; i < count; ++i) {
    Record r = read_record(in);
    Mat m = to_storage(r);
    set.add(r.id, r.shape, std::move(m));
  }
  return set;
}

}  // namespace l3ac
