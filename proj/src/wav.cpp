#include "l3ac/wav.hpp"

#include "l3ac/snapshot.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace l3ac {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t u16_at(const std::string& b, std::size_t pos) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[pos]) | (static_cast<unsigned char>(b[pos + 1]) << 8));
}

std::uint32_t u32_at(const std::string& b, std::size_t pos) {
  return static_cast<std::uint32_t>(u16_at(b, pos)) | (static_cast<std::uint32_t>(u16_at(b, pos + 2)) << 16);
}

}  // namespace

WavData parse_wav(const std::string& b) {
  if (b.size() < 12 || b.compare(0, 4, "RIFF") != 0 || b.compare(8, 4, "WAVE") != 0) {
    throw WavFormatError("not a RIFF/WAVE file");
  }
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::size_t data_pos = 0, data_len = 0;
  bool have_data = false;
  std::size_t pos = 12;
  while (pos + 8 <= b.size()) {
    const std::string id = b.substr(pos, 4);
    const std::uint32_t len = u32_at(b, pos + 4);
    const std::size_t body = pos + 8;
    if (id == "fmt ") {
      if (len < 16 || body + len > b.size()) throw WavFormatError("truncated fmt chunk");
      format = u16_at(b, body);
      channels = u16_at(b, body + 2);
      rate = u32_at(b, body + 4);
      bits = u16_at(b, body + 14);
      if (format == kFormatExtensible) {
        if (len < 40) throw WavFormatError("truncated extensible fmt chunk");
        format = u16_at(b, body + 24);
      }
      have_fmt = true;
    } else if (id == "data") {
      data_pos = body;
      data_len = std::min<std::size_t>(len, b.size() - body);
      have_data = true;
      break;
    }
    pos = body + len + (len & 1u);
  }
  if (!have_fmt) throw WavFormatError("missing fmt chunk");
  if (!have_data) throw WavFormatError("missing data chunk");
  if (channels == 0) throw WavFormatError("zero channels");
  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool f32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !f32) throw WavFormatError("unsupported encoding (need PCM16 or float32)");

  const std::size_t width = bits / 8;
  const std::size_t frames = data_len / (width * channels);
  WavData w;
  w.sample_rate = static_cast<int>(rate);
  w.channels = channels;
  w.samples.resize(channels, static_cast<Index>(frames));
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t at = data_pos + (f * channels + c) * width;
      double v;
      if (pcm16) {
        v = static_cast<std::int16_t>(u16_at(b, at)) / 32768.0;
      } else {
        const std::uint32_t raw = u32_at(b, at);
        float fv;
        std::memcpy(&fv, &raw, sizeof fv);
        v = fv;
      }
      w.samples(static_cast<Index>(c), static_cast<Index>(f)) = v;
    }
  }
  return w;
}

WavData read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  if (bytes.empty()) throw std::runtime_error("'" + path + "' is empty");
  return parse_wav(bytes);
}

std::string encode_wav(const Mat& samples, int sample_rate, WavEncoding encoding) {
  const auto channels = static_cast<std::uint16_t>(samples.rows());
  const std::uint16_t bits = encoding == WavEncoding::Pcm16 ? 16 : 32;
  const std::uint32_t data_len = static_cast<std::uint32_t>(samples.size()) * (bits / 8);
  std::ostringstream out;
  le::put_bytes(out, "RIFF");
  le::put_u32(out, 36 + data_len);
  le::put_bytes(out, "WAVEfmt ");
  le::put_u32(out, 16);
  le::put_u16(out, encoding == WavEncoding::Pcm16 ? kFormatPcm : kFormatFloat);
  le::put_u16(out, channels);
  le::put_u32(out, static_cast<std::uint32_t>(sample_rate));
  le::put_u32(out, static_cast<std::uint32_t>(sample_rate) * channels * (bits / 8));
  le::put_u16(out, static_cast<std::uint16_t>(channels * (bits / 8)));
  le::put_u16(out, bits);
  le::put_bytes(out, "data");
  le::put_u32(out, data_len);
  for (Index f = 0; f < samples.cols(); ++f) {
    for (Index c = 0; c < samples.rows(); ++c) {
      const double v = samples(c, f);
      if (encoding == WavEncoding::Pcm16) {
        const double q = std::round(std::clamp(v, -1.0, 1.0) * 32767.0);
        le::put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
      } else {
        le::put_f32(out, static_cast<float>(v));
      }
    }
  }
  return out.str();
}

void write_wav(const std::string& path, const Mat& samples, int sample_rate, WavEncoding encoding) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  const std::string bytes = encode_wav(samples, sample_rate, encoding);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace l3ac
