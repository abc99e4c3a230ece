#include "test_helpers.hpp"

#include "l3ac/codec.hpp"
#include "l3ac/discriminator.hpp"
#include "l3ac/streaming.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace l3ac;
using testing::randn;

namespace {

std::string snapshot(const CodecModel& m) {
  std::ostringstream s;
  write_model(s, m);
  return s.str();
}

}  // namespace

TEST_CASE("config rules") {
  CodecConfig c = preset("0.75");
  CHECK(c.hop() == 360);
  CHECK(c.encoder_rates.size() == 4);
  CHECK(c.decoder_rates.size() == 5);
  c.decoder_rates = {5, 4, 3, 5};  // product 300
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  CodecConfig nc = preset("0.75", true);
  nc.causal = false;
  CHECK_THROWS_AS(nc.validate(), std::invalid_argument);
  CHECK_THROWS_AS(preset("2.0"), std::out_of_range);

  const CodecConfig m = preset("mini");
  CHECK(m.attention.window == 64);
  CHECK(m.attention.n_layers == 2);
  CHECK(m.encoder_channels.back() == 16);
}

TEST_CASE("frame rates and bitrates of the built-in configs") {
  const std::pair<const char*, int> fps[] = {{"0.75", 44}, {"1.0", 59}, {"1.5", 89}, {"3.0", 167}};
  for (const auto& [name, want] : fps) {
    CHECK(std::lround(preset(name).frame_rate()) == want);
  }
  CHECK(std::floor(preset("0.75").bitrate()) == 748);
  CHECK(std::abs(preset("3.0").bitrate() - 2990) < 0.01 * 2990);
}

TEST_CASE("config JSON round trip") {
  for (const auto& n : preset_names()) {
    const CodecConfig c = preset(n, true);
    CHECK(CodecConfig::from_json(c.to_json()) == c);
  }
  CHECK_THROWS_AS(CodecConfig::from_json("{\"name\": 1}"), std::invalid_argument);
}

TEST_CASE("model build is deterministic") {
  const CodecConfig c = preset("1.0", true);
  CodecModel a(c), b(c);
  CHECK(snapshot(a) == snapshot(b));
  CHECK(a.count_params() == b.count_params());
  CodecConfig other = c;
  other.seed = 1;
  CHECK(snapshot(CodecModel(other)) != snapshot(a));
}

TEST_CASE("encode and decode lengths, range and causality") {
  CodecModel m(preset("0.75", true));
  std::mt19937_64 rng(1);
  const Mat x = randn(rng, 1, 16000, 0.3);
  const FrameTokens t = m.encode(x);
  CHECK(t.n_frames() == 45);
  CHECK(m.encode(x) == t);
  CHECK(m.encode(Mat::Zero(1, 16000)) == m.encode(Mat::Zero(1, 16000)));
  const Mat full = m.decode(t);
  CHECK(full.cols() == 16200);
  CHECK((full.array().abs() < 1).all());
  CHECK(m.decode(t) == full);
  CHECK(m.decode(t, 16000).cols() == 16000);

  // perturb the last hop of a whole number of frames
  const Mat y = randn(rng, 1, 16200, 0.3);
  Mat z = y;
  z.rightCols(360) = randn(rng, 1, 360, 0.3);
  const FrameTokens ty = m.encode(y), tz = m.encode(z);
  CHECK(ty.codes.topRows(44) == tz.codes.topRows(44));
}

TEST_CASE("streaming encoder") {
  CodecModel m(preset("1.5", true));
  const Index hop = m.config().hop();
  std::mt19937_64 rng(2);
  const Index frames = 32000 / hop;
  const Mat x = randn(rng, 1, frames * hop, 0.3);
  const FrameTokens full = m.encode(x);

  StreamingEncoder enc(m);
  CHECK(enc.push(Mat(1, 0)).n_frames() == 0);
  CHECK(enc.frames_emitted() == 0);
  FrameTokens joined;
  joined.levels = m.config().levels;
  joined.codes.resize(0, 6);
  // ten uneven chunks
  Index at = 0;
  for (int i = 0; i < 10; ++i) {
    const Index k = i == 9 ? frames - at : std::min<Index>(frames - at, 1 + (i * 7) % 13);
    const FrameTokens part = enc.push(x.middleCols(at * hop, k * hop));
    CHECK(part.n_frames() == k);
    joined.codes.conservativeResize(joined.codes.rows() + k, 6);
    joined.codes.bottomRows(k) = part.codes;
    at += k;
  }
  CHECK(joined == full);
  CHECK_THROWS_AS(enc.push(Mat::Zero(1, hop + 1)), std::invalid_argument);
}

TEST_CASE("MAC counts scale with duration") {
  CodecModel m(preset("0.75", true));
  // per-second counts are rounded once per call
  const auto a = static_cast<double>(m.count_macs(20.0)), b = static_cast<double>(m.count_macs(10.0));
  CHECK(std::abs(a - 2 * b) <= 2);
  CHECK(m.count_macs(10.0) > 0);
}

TEST_CASE("model file round trip and corruption") {
  CodecModel m(preset("3.0", true));
  const std::string bytes = snapshot(m);
  std::istringstream in(bytes);
  auto back = read_model(in);
  CHECK(back->config() == m.config());
  CHECK(snapshot(*back) == bytes);

  std::istringstream cut(bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_AS(read_model(cut), FormatError);
  std::string bad = bytes;
  bad[1] = 'Z';
  std::istringstream badin(bad);
  CHECK_THROWS_AS(read_model(badin), FormatError);
}

TEST_CASE("discriminator structure") {
  Discriminator a, b;
  CHECK(a.scales() == 3);
  std::ostringstream sa, sb;
  write_parameters(sa, a.parameters());
  write_parameters(sb, b.parameters());
  CHECK(sa.str() == sb.str());
  std::mt19937_64 rng(3);
  Graph g(false);
  const DiscriminatorOutput out = a.forward(g, g.input(randn(rng, 1, 2048, 0.3)));
  REQUIRE(out.features.size() == 3);
  for (const auto& f : out.features) CHECK(f.size() == Discriminator::kLayers);
  CHECK_THROWS(a.forward(g, g.input(Mat::Zero(1, 1000))));
}
