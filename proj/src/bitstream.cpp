#include "l3ac/bitstream.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <sstream>

namespace l3ac {

namespace mp = boost::multiprecision;

namespace {

constexpr char kMagic[4] = {'L', '3', 'A', 'C'};

mp::cpp_int power(std::uint64_t base, Index exp) {
  mp::cpp_int r = 1;
  for (Index i = 0; i < exp; ++i) r *= base;
  return r;
}

std::uint64_t bit_length(const mp::cpp_int& v) { return v == 0 ? 0 : mp::msb(v) + 1; }

void require_block_size(std::uint16_t block_size) {
  if (block_size == 0) throw std::invalid_argument("bitstream: block size must be >= 1");
}

class BitWriter {
 public:
  void put(const mp::cpp_int& v, std::uint64_t bits) {
    for (std::uint64_t i = 0; i < bits; ++i) {
      if (used_ % 8 == 0) bytes_.push_back(0);
      if (mp::bit_test(v, static_cast<unsigned>(i))) bytes_.back() |= static_cast<std::uint8_t>(1u << (used_ % 8));
      ++used_;
    }
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
  std::uint64_t used_ = 0;
};

class BitReader {
 public:
  explicit BitReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}
  mp::cpp_int get(std::uint64_t bits) {
    mp::cpp_int v = 0;
    for (std::uint64_t i = 0; i < bits; ++i, ++pos_) {
      if ((bytes_[pos_ / 8] >> (pos_ % 8)) & 1u) mp::bit_set(v, static_cast<unsigned>(i));
    }
    return v;
  }
  std::uint64_t position() const { return pos_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::uint64_t pos_ = 0;
};

}  // namespace

std::uint64_t block_bits(Index frames, const FsqLevels& levels, std::uint16_t block_size) {
  require_block_size(block_size);
  if (frames < 0 || frames > block_size) throw std::invalid_argument("block_bits: bad frame count");
  return bit_length(power(levels.codebook_size(), frames) - 1);
}

std::uint64_t payload_bits(std::uint64_t frames, const FsqLevels& levels, std::uint16_t block_size) {
  require_block_size(block_size);
  const std::uint64_t full = frames / block_size;
  const std::uint64_t rest = frames % block_size;
  return full * block_bits(block_size, levels, block_size) +
         block_bits(static_cast<Index>(rest), levels, block_size);
}

BitstreamContainer pack(const FrameTokens& tokens, ContainerHeader header) {
  tokens.validate();
  require_block_size(header.block_size);
  header.levels = tokens.levels;
  header.n_frames = static_cast<std::uint64_t>(tokens.n_frames());
  const std::uint64_t N = tokens.levels.codebook_size();
  BitWriter writer;
  for (Index start = 0; start < tokens.n_frames(); start += header.block_size) {
    const Index count = std::min<Index>(header.block_size, tokens.n_frames() - start);
    mp::cpp_int value = 0;
    for (Index f = count - 1; f >= 0; --f) {
      const auto row = tokens.codes.row(start + f);
      value = value * N + codes_to_index(std::span<const int>(row.data(), static_cast<std::size_t>(row.size())),
                                         tokens.levels);
    }
    writer.put(value, block_bits(count, tokens.levels, header.block_size));
  }
  return BitstreamContainer{std::move(header), writer.take()};
}

FrameTokens unpack(const BitstreamContainer& c) {
  const ContainerHeader& h = c.header;
  require_block_size(h.block_size);
  const std::uint64_t bits = payload_bits(h.n_frames, h.levels, h.block_size);
  if (c.payload.size() != (bits + 7) / 8) throw FormatError("container: payload length does not match frame count");

  FrameTokens tokens;
  tokens.levels = h.levels;
  tokens.codes.resize(static_cast<Index>(h.n_frames), h.levels.dims());
  const std::uint64_t N = h.levels.codebook_size();
  BitReader reader(c.payload);
  for (Index start = 0; start < tokens.n_frames(); start += h.block_size) {
    const Index count = std::min<Index>(h.block_size, tokens.n_frames() - start);
    mp::cpp_int value = reader.get(block_bits(count, h.levels, h.block_size));
    if (value >= power(N, count)) throw FormatError("container: block value overflows its frame count");
    for (Index f = 0; f < count; ++f) {
      const auto index = static_cast<std::uint64_t>(value % N);
      value /= N;
      const std::vector<int> codes = index_to_codes(index, h.levels);
      for (Index d = 0; d < h.levels.dims(); ++d) tokens.codes(start + f, d) = codes[static_cast<std::size_t>(d)];
    }
  }
  const std::uint64_t tail = c.payload.size() * 8 - reader.position();
  if (tail > 0 && (c.payload.back() >> (8 - tail)) != 0) throw FormatError("container: nonzero padding bits");
  return tokens;
}

std::vector<std::uint8_t> serialize(const BitstreamContainer& c) {
  const ContainerHeader& h = c.header;
  if (h.rates.size() > 255 || h.levels.values().size() > 255) throw std::invalid_argument("container: too many rates/levels");
  std::ostringstream out;
  le::put_bytes(out, std::string_view(kMagic, 4));
  le::put_u16(out, h.version);
  le::put_u32(out, h.sample_rate);
  le::put_u8(out, static_cast<std::uint8_t>(h.rates.size()));
  for (int r : h.rates) {
    if (r < 1 || r > 255) throw std::invalid_argument("container: rate out of u8 range");
    le::put_u8(out, static_cast<std::uint8_t>(r));
  }
  le::put_u8(out, static_cast<std::uint8_t>(h.levels.values().size()));
  for (int L : h.levels.values()) le::put_u8(out, static_cast<std::uint8_t>(L));
  le::put_u64(out, h.n_frames);
  le::put_u16(out, h.block_size);
  le::put_u64(out, h.n_samples);
  le::put_u32(out, static_cast<std::uint32_t>(h.config_json.size()));
  le::put_bytes(out, h.config_json);
  const std::string head = out.str();
  std::vector<std::uint8_t> bytes(head.begin(), head.end());
  bytes.insert(bytes.end(), c.payload.begin(), c.payload.end());
  return bytes;
}

BitstreamContainer parse(const std::vector<std::uint8_t>& bytes) {
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  BitstreamContainer c;
  ContainerHeader& h = c.header;
  try {
    if (le::get_bytes(in, 4) != std::string_view(kMagic, 4)) throw FormatError("container: bad magic");
    h.version = le::get_u16(in);
    if (h.version != kContainerVersion) throw FormatError("container: unsupported version");
    h.sample_rate = le::get_u32(in);
    const std::uint8_t n_rates = le::get_u8(in);
    for (int i = 0; i < n_rates; ++i) h.rates.push_back(le::get_u8(in));
    const std::uint8_t n_levels = le::get_u8(in);
    std::vector<int> levels;
    for (int i = 0; i < n_levels; ++i) levels.push_back(le::get_u8(in));
    try {
      h.levels = FsqLevels(std::move(levels));
    } catch (const std::invalid_argument& e) {
      throw FormatError(std::string("container: ") + e.what());
    }
    h.n_frames = le::get_u64(in);
    h.block_size = le::get_u16(in);
    if (h.block_size == 0) throw FormatError("container: zero block size");
    h.n_samples = le::get_u64(in);
    const std::uint32_t len = le::get_u32(in);
    if (len > bytes.size()) throw FormatError("container: truncated config record");
    h.config_json = le::get_bytes(in, len);
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw FormatError(std::string("container: truncated header (") + e.what() + ")");
  }
  const auto offset = static_cast<std::size_t>(in.tellg());
  c.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(offset), bytes.end());
  return c;
}

double bitrate(double sample_rate, const std::vector<int>& rates, const FsqLevels& levels) {
  double hop = 1;
  for (int r : rates) {
    if (r < 1) throw std::invalid_argument("bitrate: rates must be >= 1");
    hop *= r;
  }
  if (rates.empty()) throw std::invalid_argument("bitrate: no rates");
  return sample_rate / hop * levels.bits_per_frame();
}

}  // namespace l3ac
