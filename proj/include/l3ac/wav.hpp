#pragma once

// Minimal RIFF/WAVE reader and writer. Reads PCM16 and IEEE float32 (plain or
// WAVE_FORMAT_EXTENSIBLE); writes PCM16 or float32.

#include "l3ac/tensor.hpp"

#include <string>

namespace l3ac {

/// The file is not a WAV file we can read (bad chunks, unsupported encoding).
class WavFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct WavData {
  int sample_rate = 0;
  int channels = 0;
  /// channels x frames, full scale at +-1.
  Mat samples;
};

/// Throws std::runtime_error if the file cannot be opened or is empty, and
/// WavFormatError if its contents are not a supported WAV stream.
WavData read_wav(const std::string& path);
WavData parse_wav(const std::string& bytes);

enum class WavEncoding { Pcm16, Float32 };
/// PCM16 output is clipped to [-1, 1] and rounded to the nearest step.
void write_wav(const std::string& path, const Mat& samples, int sample_rate, WavEncoding encoding = WavEncoding::Pcm16);
std::string encode_wav(const Mat& samples, int sample_rate, WavEncoding encoding = WavEncoding::Pcm16);

}  // namespace l3ac
