#include "test_helpers.hpp"

#include "l3ac/cli.hpp"
#include "l3ac/config.hpp"
#include "l3ac/wav.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

using namespace l3ac;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

Mat tone(Index n, double amp = 0.4) {
  Mat x(1, n);
  for (Index t = 0; t < n; ++t) x(0, t) = amp * std::sin(2 * M_PI * 330 * double(t) / 16000);
  return x;
}

void write_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary);
  f << bytes;
}

std::string read_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

std::string line_with(const std::string& text, const std::string& prefix) {
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) {
    if (l.rfind(prefix, 0) == 0) return l;
  }
  return {};
}

}  // namespace

TEST_CASE("WAV reading and writing") {
  const Mat x = tone(1000);
  SUBCASE("PCM16") {
    const WavData w = parse_wav(encode_wav(x, 16000));
    CHECK(w.sample_rate == 16000);
    CHECK(w.channels == 1);
    CHECK(testing::max_abs_diff(w.samples, x) < 1.0 / 32767);
  }
  SUBCASE("float32") {
    const WavData w = parse_wav(encode_wav(x, 16000, WavEncoding::Float32));
    CHECK(testing::max_abs_diff(w.samples, x) < 1e-7);
  }
  SUBCASE("clipping") {
    const WavData w = parse_wav(encode_wav(Mat::Constant(1, 4, 3.0), 16000));
    CHECK(w.samples.maxCoeff() <= 1.0);
  }
  SUBCASE("bad input") {
    CHECK_THROWS_AS(parse_wav("RIFF"), WavFormatError);
    std::string b = encode_wav(x, 16000);
    b[34] = 24;  // bits per sample
    CHECK_THROWS_AS(parse_wav(b), WavFormatError);
    CHECK_THROWS_AS(read_wav("does-not-exist.wav"), std::runtime_error);
  }
}

TEST_CASE("encode / decode / info") {
  write_wav("silence.wav", Mat::Zero(1, 16000), 16000);
  const Result e = run({"encode", "--in", "silence.wav", "--config", "0.75", "--out", "silence.l3ac"});
  CHECK(e.code == 0);
  CHECK(e.out == "frames=45 bitrate=748.63\n");

  write_wav("odd.wav", tone(12345), 16000, WavEncoding::Float32);
  REQUIRE(run({"encode", "--in", "odd.wav", "--config", "1.0", "--toy", "--out", "odd.l3ac"}).code == 0);
  const Result d = run({"decode", "--in", "odd.l3ac", "--config", "1.0", "--toy", "--out", "odd_out.wav"});
  CHECK(d.code == 0);
  const WavData back = read_wav("odd_out.wav");
  CHECK(back.samples.cols() == 12345);
  CHECK(back.sample_rate == 16000);

  SUBCASE("info prints the full config") {
    const Result i = run({"info", "--in", "odd.l3ac"});
    CHECK(i.code == 0);
    const std::string cfg = line_with(i.out, "config=");
    REQUIRE(!cfg.empty());
    CHECK(CodecConfig::from_json(cfg.substr(7)) == preset("1.0", true));
    CHECK(line_with(i.out, "n_samples=") == "n_samples=12345");
  }
  SUBCASE("mismatched model") {
    CHECK(run({"decode", "--in", "odd.l3ac", "--config", "0.75", "--toy", "--out", "x.wav"}).code == 3);
  }
  SUBCASE("corrupt containers") {
    const std::string bytes = read_bytes("odd.l3ac");
    write_bytes("cut.l3ac", bytes.substr(0, bytes.size() - 5));
    CHECK(run({"decode", "--in", "cut.l3ac", "--config", "1.0", "--toy", "--out", "x.wav"}).code == 4);
    write_bytes("head.l3ac", bytes.substr(0, 20));
    CHECK(run({"decode", "--in", "head.l3ac", "--config", "1.0", "--toy", "--out", "x.wav"}).code == 4);
    write_bytes("junk.bin", "not a codec file");
    CHECK(run({"info", "--in", "junk.bin"}).code == 4);
  }
}

TEST_CASE("input errors") {
  write_wav("stereo.wav", Mat::Zero(2, 1600), 16000);
  write_wav("slow.wav", Mat::Zero(1, 800), 8000);
  write_bytes("empty.wav", "");
  const std::vector<std::string> base{"--config", "0.75", "--toy", "--out", "x.l3ac"};
  auto enc = [&](const std::string& in) {
    std::vector<std::string> a{"encode", "--in", in};
    a.insert(a.end(), base.begin(), base.end());
    return run(a);
  };
  const Result st = enc("stereo.wav");
  CHECK(st.code == 2);
  CHECK(st.err.find("mono") != std::string::npos);
  CHECK(enc("slow.wav").code == 2);
  CHECK(enc("empty.wav").code == 1);
  CHECK(enc("missing.wav").code == 1);
  CHECK(run({"encode", "--in", "slow.wav", "--config", "9.9", "--out", "x.l3ac"}).code == 1);
}

TEST_CASE("usage") {
  CHECK(run({}).code == 1);
  CHECK(run({"frobnicate"}).code == 1);
  CHECK(run({"info", "--in", "x", "--bogus"}).code == 1);
  CHECK(run({"encode", "--in", "x"}).code == 1);
  const Result h = run({"--help"});
  CHECK(h.code == 0);
  CHECK(h.out.find("Exit codes") != std::string::npos);
}

TEST_CASE("metrics") {
  const Mat x = tone(8000);
  write_wav("ref.wav", x, 16000, WavEncoding::Float32);
  write_wav("half.wav", Mat(x / 2), 16000, WavEncoding::Float32);
  const Result same = run({"metrics", "--ref", "ref.wav", "--deg", "ref.wav"});
  CHECK(same.code == 0);
  CHECK(same.out == "SDR=inf MEL=0.000000 L_SPEC=0.000000\n");
  const Result half = run({"metrics", "--ref", "ref.wav", "--deg", "half.wav"});
  CHECK(half.out.rfind("SDR=6.0206 ", 0) == 0);
}

TEST_CASE("grad-check") {
  const Result r = run({"grad-check"});
  CHECK(r.code == 0);
  CHECK(r.out.find("FAIL") == std::string::npos);
  CHECK(run({"grad-check", "--case", "nope"}).code == 1);
  CHECK(run({"grad-check", "--case", "gelu", "--tolerance", "1e-30"}).code == 5);
}

TEST_CASE("verify") {
  for (const char* name : {"0.75", "1.0", "1.5", "3.0"}) {
    const Result r = run({"verify", "--config", name});
    CHECK_MESSAGE(r.code == 0, name << ": " << r.out << r.err);
  }
  CHECK(run({"verify", "--config", "2.0"}).code == 1);

  REQUIRE(run({"train-toy", "--config", "0.75", "--toy", "--steps", "1", "--seconds", "0.2", "--checkpoint",
               "tiny.l3am", "--print-every", "100"})
              .code == 0);
  CHECK(run({"verify", "--model", "tiny.l3am"}).code == 0);
  const std::string bytes = read_bytes("tiny.l3am");
  write_bytes("short.l3am", bytes.substr(0, bytes.size() - 100));
  const Result bad = run({"verify", "--model", "short.l3am"});
  CHECK(bad.code != 0);
  CHECK(bad.out.find("FAIL snapshot-load") != std::string::npos);
  // a NaN weight loads but breaks an invariant
  std::string nan_bytes = bytes;
  const float nan = std::nanf("");
  std::memcpy(nan_bytes.data() + nan_bytes.size() - 4, &nan, 4);
  write_bytes("nan.l3am", nan_bytes);
  const Result nr = run({"verify", "--model", "nan.l3am"});
  CHECK(nr.code == 5);
  CHECK(nr.out.find("FAIL ") != std::string::npos);
}

TEST_CASE("ablation flags give distinct logged configurations") {
  const std::vector<std::string> base{"train-toy", "--config", "0.75", "--toy", "--steps", "1", "--seconds", "0.2"};
  std::set<std::string> headers;
  for (const auto& extra : std::vector<std::vector<std::string>>{{}, {"--window", "16"}, {"--plain-conv"}, {"--no-clamp"}}) {
    std::vector<std::string> a = base;
    a.insert(a.end(), extra.begin(), extra.end());
    const Result r = run(a);
    REQUIRE(r.code == 0);
    headers.insert(line_with(r.out, "# config") + "\n" + line_with(r.out, "# train"));
    CHECK(!line_with(r.out, "step=1 ").empty());
  }
  CHECK(headers.size() == 4);
  const Result v = run({"verify", "--config", "0.75", "--window", "16", "--plain-conv", "--no-clamp"});
  CHECK(v.code == 0);
  CHECK(line_with(v.out, "# config").find("\"window\":16") != std::string::npos);
  CHECK(line_with(v.out, "# config").find("\"plain_tconv\":true") != std::string::npos);
  CHECK(line_with(v.out, "# train").find("\"clamp\":false") != std::string::npos);
}
