#pragma once

// ".l3ac" token container, all integers little-endian:
//   magic "L3AC" | version u16 | sample_rate u32 |
//   n_rates u8 | rates u8[n] | n_levels u8 | levels u8[n] |
//   n_frames u64 | block_size u16 | n_samples u64 |
//   config_len u32 | config JSON bytes | payload
//
// Payload: frames are grouped into blocks of block_size (the last block may be
// shorter). A block of b frames is the integer sum_f index_f * N^f (N the
// codebook size, index_f the mixed-radix frame index) written in exactly
// bit_length(N^b - 1) = ceil(b * log2 N) bits, least significant bit first.
// Bits fill bytes from the LSB; blocks follow each other with no gap and the
// final byte is zero-padded.

#include "l3ac/fsq.hpp"
#include "l3ac/snapshot.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace l3ac {

inline constexpr std::uint16_t kContainerVersion = 1;
inline constexpr std::uint16_t kDefaultBlockSize = 8;

struct ContainerHeader {
  std::uint16_t version = kContainerVersion;
  std::uint32_t sample_rate = 16000;
  std::vector<int> rates;
  FsqLevels levels;
  std::uint64_t n_frames = 0;
  std::uint16_t block_size = kDefaultBlockSize;
  /// Original audio length; decoded audio is cut back to it.
  std::uint64_t n_samples = 0;
  /// Full codec configuration the tokens were produced with.
  std::string config_json;
};

struct BitstreamContainer {
  ContainerHeader header;
  std::vector<std::uint8_t> payload;
};

/// Bits used by a block of `frames` frames.
std::uint64_t block_bits(Index frames, const FsqLevels& levels, std::uint16_t block_size = kDefaultBlockSize);
/// Payload bits for `frames` frames split into blocks.
std::uint64_t payload_bits(std::uint64_t frames, const FsqLevels& levels,
                           std::uint16_t block_size = kDefaultBlockSize);

/// Packs tokens; n_frames and levels in the header are taken from `tokens`.
BitstreamContainer pack(const FrameTokens& tokens, ContainerHeader header);
/// Exact inverse of pack. Throws FormatError on a payload of the wrong length
/// or a block value beyond N^b - 1.
FrameTokens unpack(const BitstreamContainer& container);

std::vector<std::uint8_t> serialize(const BitstreamContainer& container);
/// Throws FormatError on bad magic, unknown version or truncated data.
BitstreamContainer parse(const std::vector<std::uint8_t>& bytes);

/// (sample_rate / prod(rates)) * sum log2(L_i), in bits per second.
double bitrate(double sample_rate, const std::vector<int>& rates, const FsqLevels& levels);

}  // namespace l3ac
