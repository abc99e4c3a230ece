#include "l3ac/cli.hpp"

#include "l3ac/bitstream.hpp"
#include "l3ac/codec.hpp"
#include "l3ac/config.hpp"
#include "l3ac/discriminator.hpp"
#include "l3ac/gradient_suite.hpp"
#include "l3ac/losses.hpp"
#include "l3ac/streaming.hpp"
#include "l3ac/training.hpp"
#include "l3ac/wav.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

namespace l3ac::cli {

namespace {

// Thrown by subcommands to leave with a specific code and message.
struct Exit {
  int code;
  std::string message;
};

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Exit{kUsage, "cannot open '" + path + "'"};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Exit{kUsage, "cannot write '" + path + "'"};
}

// Model source shared by encode, decode and verify.
struct ModelOptions {
  std::string model_path;
  std::string config_name;
  bool toy = false;
  std::uint64_t seed = 0;

  void add_to(CLI::App* sub) {
    sub->add_option("--model", model_path, "Model snapshot (.l3am)");
    sub->add_option("--config", config_name, "Built-in config, used when no --model is given");
    sub->add_flag("--toy", toy, "Narrow channel widths for a built-in config");
    sub->add_option("--seed", seed, "Initialization seed for a built-in config");
  }
};

CodecConfig named_config(const std::string& name, bool toy) {
  try {
    return preset(name, toy);
  } catch (const std::out_of_range& e) {
    throw Exit{kUsage, e.what()};
  }
}

std::unique_ptr<CodecModel> load_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Exit{kUsage, "cannot open model '" + path + "'"};
  try {
    return read_model(in);
  } catch (const FormatError& e) {
    throw Exit{kCorrupt, "model '" + path + "': " + e.what()};
  }
}

std::unique_ptr<CodecModel> load_model(const ModelOptions& o) {
  if (!o.model_path.empty()) {
    if (!o.config_name.empty()) throw Exit{kUsage, "give either --model or --config, not both"};
    return load_model_file(o.model_path);
  }
  if (o.config_name.empty()) throw Exit{kUsage, "one of --model or --config is required"};
  CodecConfig c = named_config(o.config_name, o.toy);
  c.seed = o.seed;
  return std::make_unique<CodecModel>(c);
}

Mat read_mono(const std::string& path, int sample_rate) {
  WavData w;
  try {
    w = read_wav(path);
  } catch (const WavFormatError& e) {
    throw Exit{kAudioFormat, path + ": " + e.what()};
  } catch (const std::runtime_error& e) {
    throw Exit{kUsage, e.what()};
  }
  if (w.channels != 1) throw Exit{kAudioFormat, path + ": expected mono, got " + std::to_string(w.channels) + " channels"};
  if (w.sample_rate != sample_rate) {
    throw Exit{kAudioFormat, path + ": expected " + std::to_string(sample_rate) + " Hz, got " +
                                 std::to_string(w.sample_rate) + " Hz (resample first)"};
  }
  if (w.samples.cols() == 0) throw Exit{kAudioFormat, path + ": no samples"};
  return w.samples;
}

// Configs are compatible when they describe the same network; name and seed
// only label it.
bool compatible(CodecConfig a, CodecConfig b) {
  a.name = b.name = "";
  a.seed = b.seed = 0;
  return a == b;
}

std::string train_json(const TrainConfig& t, const std::string& data) {
  nlohmann::json j;
  j["steps"] = t.total_steps;
  j["clamp"] = t.clamp;
  j["clamp_switch_fraction"] = t.clamp_switch_fraction;
  auto caps = [](const std::array<double, 4>& c) {
    nlohmann::json a = nlohmann::json::array();
    for (double v : c) a.push_back(std::isfinite(v) ? nlohmann::json(v) : nlohmann::json("inf"));
    return a;
  };
  j["early_caps"] = caps(t.early_caps);
  j["late_caps"] = caps(t.late_caps);
  j["weights"] = t.weights;
  j["lr"] = {t.lr_warm, t.lr_peak, t.lr_final};
  j["disc_every"] = t.disc_every;
  j["batch_size"] = t.batch_size;
  j["seed"] = t.seed;
  j["data"] = data;
  return j.dump();
}

// ---------------------------------------------------------------- encode

int cmd_encode(const ModelOptions& mo, const std::string& in_path, const std::string& out_path, std::ostream& out) {
  auto model = load_model(mo);
  const CodecConfig& c = model->config();
  const Mat audio = read_mono(in_path, c.sample_rate);
  const FrameTokens tokens = model->encode(audio);
  ContainerHeader h;
  h.sample_rate = static_cast<std::uint32_t>(c.sample_rate);
  h.rates = c.token_rates();
  h.n_samples = static_cast<std::uint64_t>(audio.cols());
  h.config_json = c.to_json();
  const auto bytes = serialize(pack(tokens, h));
  write_file(out_path, std::string(bytes.begin(), bytes.end()));
  out << "frames=" << tokens.n_frames() << " bitrate=" << fmt("%.2f", c.bitrate()) << "\n";
  return kOk;
}

// ---------------------------------------------------------------- decode

int cmd_decode(const ModelOptions& mo, const std::string& in_path, const std::string& out_path, bool as_float,
               std::ostream& out) {
  const std::string raw = read_file(in_path);
  BitstreamContainer box;
  CodecConfig stored;
  try {
    box = parse(std::vector<std::uint8_t>(raw.begin(), raw.end()));
    stored = CodecConfig::from_json(box.header.config_json);
  } catch (const FormatError& e) {
    throw Exit{kCorrupt, in_path + ": " + e.what()};
  } catch (const std::invalid_argument& e) {
    throw Exit{kCorrupt, in_path + ": embedded config: " + e.what()};
  }
  if (!(stored.levels == box.header.levels) || stored.token_rates() != box.header.rates ||
      stored.sample_rate != static_cast<int>(box.header.sample_rate)) {
    throw Exit{kCorrupt, in_path + ": header disagrees with its embedded config"};
  }
  auto model = load_model(mo);
  if (!compatible(stored, model->config())) {
    throw Exit{kConfigMismatch, "container was written by config '" + stored.name + "', model is '" +
                                    model->config().name + "'"};
  }
  FrameTokens tokens;
  try {
    tokens = unpack(box);
  } catch (const FormatError& e) {
    throw Exit{kCorrupt, in_path + ": " + e.what()};
  }
  const std::uint64_t capacity = box.header.n_frames * static_cast<std::uint64_t>(stored.hop());
  if (box.header.n_samples > capacity) throw Exit{kCorrupt, in_path + ": sample count exceeds the frames"};
  const Mat y = model->decode(tokens, static_cast<Index>(box.header.n_samples));
  write_wav(out_path, y, stored.sample_rate, as_float ? WavEncoding::Float32 : WavEncoding::Pcm16);
  out << "samples=" << y.cols() << "\n";
  return kOk;
}

// ---------------------------------------------------------------- info

int cmd_info(const std::string& path, std::ostream& out) {
  const std::string raw = read_file(path);
  if (raw.empty()) throw Exit{kUsage, "'" + path + "' is empty"};
  const std::string magic = raw.substr(0, 4);
  if (magic == "L3AC") {
    BitstreamContainer box;
    try {
      box = parse(std::vector<std::uint8_t>(raw.begin(), raw.end()));
    } catch (const FormatError& e) {
      throw Exit{kCorrupt, path + ": " + e.what()};
    }
    const ContainerHeader& h = box.header;
    out << "kind=container\nversion=" << h.version << "\nsample_rate=" << h.sample_rate << "\nrates=";
    for (std::size_t i = 0; i < h.rates.size(); ++i) out << (i ? "," : "") << h.rates[i];
    out << "\nlevels=";
    for (Index i = 0; i < h.levels.dims(); ++i) out << (i ? "," : "") << h.levels[i];
    out << "\nn_frames=" << h.n_frames << "\nblock_size=" << h.block_size << "\nn_samples=" << h.n_samples
        << "\npayload_bytes=" << box.payload.size()
        << "\nbitrate=" << fmt("%.2f", bitrate(h.sample_rate, h.rates, h.levels)) << "\nconfig=" << h.config_json
        << "\n";
    return kOk;
  }
  if (magic == "L3AM") {
    std::istringstream in(raw);
    std::unique_ptr<CodecModel> m;
    try {
      m = read_model(in);
    } catch (const FormatError& e) {
      throw Exit{kCorrupt, path + ": " + e.what()};
    }
    out << "kind=model\nparams=" << m->count_params() << "\nmacs_per_second=" << m->count_macs(1.0)
        << "\nbitrate=" << fmt("%.2f", m->config().bitrate()) << "\nconfig=" << m->config().to_json() << "\n";
    return kOk;
  }
  if (magic == "RIFF") {
    WavData w;
    try {
      w = parse_wav(raw);
    } catch (const WavFormatError& e) {
      throw Exit{kAudioFormat, path + ": " + e.what()};
    }
    out << "kind=wav\nsample_rate=" << w.sample_rate << "\nchannels=" << w.channels << "\nsamples=" << w.samples.cols()
        << "\n";
    return kOk;
  }
  throw Exit{kCorrupt, path + ": unrecognized file (expected .l3ac, .l3am or WAV)"};
}

// ---------------------------------------------------------------- metrics

int cmd_metrics(const std::string& ref_path, const std::string& deg_path, std::ostream& out, std::ostream& err) {
  Mat ref = read_mono(ref_path, 16000);
  Mat deg = read_mono(deg_path, 16000);
  if (ref.cols() != deg.cols()) {
    const Index n = std::min(ref.cols(), deg.cols());
    err << "note: lengths differ (" << ref.cols() << " vs " << deg.cols() << "), comparing the first " << n
        << " samples\n";
    ref.conservativeResize(1, n);
    deg.conservativeResize(1, n);
  }
  double sdr;
  try {
    sdr = metric_sdr(ref, deg);
  } catch (const std::invalid_argument& e) {
    throw Exit{kAudioFormat, std::string("SDR: ") + e.what()};
  }
  out << "SDR=" << fmt("%.4f", sdr) << " MEL=" << fmt("%.6f", metric_mel(ref, deg))
      << " L_SPEC=" << fmt("%.6f", loss_spec(ref, deg)) << "\n";
  return kOk;
}

// ---------------------------------------------------------------- grad-check

int cmd_grad_check(const std::vector<std::string>& only, bool list, double tolerance, std::ostream& out) {
  if (list) {
    for (const auto& n : gradient_suite_names()) out << n << "\n";
    return kOk;
  }
  std::vector<GradSuiteEntry> results;
  try {
    results = run_gradient_suite(only);
  } catch (const std::out_of_range& e) {
    throw Exit{kUsage, e.what()};
  }
  bool ok = true;
  for (const auto& r : results) {
    const bool pass = r.result.max_rel_error < tolerance;
    ok = ok && pass;
    out << r.name << " max_rel_err=" << fmt("%.3e", r.result.max_rel_error) << " checked=" << r.result.checked
        << " worst=" << r.result.worst << (pass ? " PASS" : " FAIL") << "\n";
  }
  return ok ? kOk : kInvariant;
}

// ---------------------------------------------------------------- train-toy

struct TrainOptions {
  std::string config_name = "mini";
  bool toy = false;
  std::uint64_t steps = 2000;
  Index window = 0;
  bool plain_conv = false;
  bool no_clamp = false;
  std::uint64_t seed = 0;
  Index batch = 1;
  bool synthetic = false;
  double seconds = 1.0;
  Index disc_width = 8;
  std::uint64_t disc_every = 20;
  std::string log_path;
  std::uint64_t print_every = 1;
  std::string checkpoint;
  std::uint64_t checkpoint_every = 0;
};

void save_checkpoint(const std::string& path, const CodecModel& m) {
  std::ofstream f(path, std::ios::binary);
  write_model(f, m);
  if (!f) throw Exit{kUsage, "cannot write checkpoint '" + path + "'"};
}

int cmd_train(const TrainOptions& o, std::ostream& out, std::ostream& err) {
  if (o.steps < 1) throw Exit{kUsage, "--steps must be at least 1"};
  CodecConfig c = named_config(o.config_name, o.toy);
  if (o.window > 0) c.attention.window = o.window;
  c.plain_tconv = o.plain_conv;
  c.seed = o.seed;
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw Exit{kUsage, e.what()};
  }
  TrainConfig t;
  t.total_steps = o.steps;
  t.clamp = !o.no_clamp;
  t.seed = o.seed;
  t.batch_size = o.batch;
  t.disc_every = o.disc_every;
  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    throw Exit{kUsage, e.what()};
  }

  CodecModel model(c);
  Discriminator disc(DiscriminatorConfig{o.disc_width, o.seed + 1});
  SurrogateExtractor extractor;
  Trainer trainer(model, disc, extractor, t);

  const std::string data = o.synthetic ? "synthetic-alternating" : "fixed-sines";
  std::ofstream log;
  if (!o.log_path.empty()) {
    log.open(o.log_path, std::ios::app);
    if (!log) throw Exit{kUsage, "cannot open log '" + o.log_path + "'"};
  }
  const std::string header = "# config " + c.to_json() + "\n# train " + train_json(t, data) + "\n";
  out << header;
  if (log) log << header;

  const auto length = static_cast<Index>(std::llround(o.seconds * c.sample_rate));
  SyntheticDataset dataset(o.seed + 3, c.sample_rate, o.seconds, o.seconds);
  Batch<double> fixed;
  if (!o.synthetic) {
    for (Index i = 0; i < o.batch; ++i) fixed.items.push_back(dataset.make(SyntheticDataset::Family::Sines, length));
  }
  double ls_at_10 = 0, ls_last = 0;
  for (std::uint64_t s = 0; s <= o.steps; ++s) {
    const Batch<double> batch = o.synthetic ? dataset.next_batch(o.batch) : fixed;
    LossReport r;
    try {
      r = trainer.step(batch);
    } catch (const NumericalError& e) {
      throw Exit{kNumerical, "step " + std::to_string(s) + ": " + e.what()};
    }
    const std::string line = format_log_line(s, r);
    if (log) log << line << "\n" << std::flush;
    if (s % o.print_every == 0 || s == o.steps) out << line << "\n" << std::flush;
    if (s == std::min<std::uint64_t>(10, o.steps)) ls_at_10 = r.raw[1];
    ls_last = r.raw[1];
    if (!o.checkpoint.empty() && o.checkpoint_every > 0 && s > 0 && s % o.checkpoint_every == 0) {
      save_checkpoint(o.checkpoint, model);
    }
  }
  if (!o.checkpoint.empty()) save_checkpoint(o.checkpoint, model);
  const std::string summary = "# done ls_step10=" + fmt("%.6g", ls_at_10) + " ls_final=" + fmt("%.6g", ls_last) +
                              " ratio=" + fmt("%.4g", ls_last > 0 ? ls_at_10 / ls_last : 0.0) + "\n";
  out << summary;
  if (log) log << summary;
  (void)err;
  return kOk;
}

// ---------------------------------------------------------------- verify

struct VerifyOptions {
  ModelOptions model;
  bool full_width = false;
  Index window = 0;
  bool plain_conv = false;
  bool no_clamp = false;
};

// Nominal kbps labels of the built-in configs.
double nominal_bps(const std::string& name) {
  if (name == "0.75") return 750;
  if (name == "1.0") return 1000;
  if (name == "1.5") return 1500;
  if (name == "3.0") return 3000;
  return 0;
}

std::string model_bytes(const CodecModel& m) {
  std::ostringstream s;
  write_model(s, m);
  return s.str();
}

int cmd_verify(const VerifyOptions& o, std::ostream& out, std::ostream& err) {
  std::unique_ptr<CodecModel> model;
  bool from_config = o.model.model_path.empty();
  if (from_config) {
    if (o.model.config_name.empty()) throw Exit{kUsage, "one of --model or --config is required"};
    CodecConfig c = named_config(o.model.config_name, !o.full_width);
    if (o.window > 0) c.attention.window = o.window;
    c.plain_tconv = o.plain_conv;
    c.seed = o.model.seed;
    try {
      c.validate();
    } catch (const std::invalid_argument& e) {
      throw Exit{kUsage, e.what()};
    }
    model = std::make_unique<CodecModel>(c);
  } else {
    if (o.window > 0 || o.plain_conv) throw Exit{kUsage, "--window/--plain-conv cannot override a snapshot"};
    std::ifstream in(o.model.model_path, std::ios::binary);
    if (!in) throw Exit{kUsage, "cannot open model '" + o.model.model_path + "'"};
    try {
      model = read_model(in);
    } catch (const FormatError& e) {
      out << "FAIL snapshot-load: " << e.what() << "\n";
      throw Exit{kCorrupt, std::string("snapshot-load: ") + e.what()};
    }
  }
  const CodecConfig& c = model->config();
  TrainConfig t;
  t.clamp = !o.no_clamp;
  out << "# config " << c.to_json() << "\n# train " << train_json(t, "n/a") << "\n";

  const Index hop = c.hop();
  const Index n = c.sample_rate;  // one second
  SyntheticDataset data(17, c.sample_rate, 1, 1);
  const Mat x = data.make(SyntheticDataset::Family::Sines, n);

  std::string failed;
  auto check = [&](const std::string& name, const std::function<std::string()>& body) {
    if (!failed.empty()) return;
    std::string why;
    try {
      why = body();
    } catch (const std::exception& e) {
      why = std::string("exception: ") + e.what();
    }
    if (why.empty()) {
      out << "PASS " << name << "\n";
    } else {
      out << "FAIL " << name << ": " << why << "\n";
      failed = name + ": " + why;
    }
  };

  FrameTokens tokens;
  check("bitrate", [&]() -> std::string {
    const double b = c.bitrate();
    const double direct = bitrate(c.sample_rate, c.token_rates(), c.levels);
    if (std::abs(b - direct) > 1e-9 * b) return "config and container bitrates disagree";
    const double label = nominal_bps(c.name.substr(0, c.name.find("-toy")));
    if (label > 0 && std::abs(b - label) > 0.01 * label) return fmt("%.2f bps is not within 1% of the label", b);
    return {};
  });
  check("frame-count", [&]() -> std::string {
    tokens = model->encode(x);
    const Index want = (n + hop - 1) / hop;
    if (tokens.n_frames() != want) return std::to_string(tokens.n_frames()) + " frames, expected " + std::to_string(want);
    tokens.validate();
    return {};
  });
  check("determinism", [&]() -> std::string {
    if (!(model->encode(x) == tokens)) return "second encode differs";
    if (from_config) {
      CodecModel twin(c);
      if (model_bytes(twin) != model_bytes(*model)) return "same seed built different weights";
    }
    return {};
  });
  check("container-round-trip", [&]() -> std::string {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
      FrameTokens t = tokens;
      if (trial > 0) {
        for (Index f = 0; f < t.n_frames(); ++f) {
          for (Index d = 0; d < t.levels.dims(); ++d) {
            t.codes(f, d) = static_cast<int>(rng() % static_cast<std::uint64_t>(t.levels[d]));
          }
        }
      }
      ContainerHeader h;
      h.sample_rate = static_cast<std::uint32_t>(c.sample_rate);
      h.rates = c.token_rates();
      h.n_samples = static_cast<std::uint64_t>(n);
      h.config_json = c.to_json();
      const BitstreamContainer box = pack(t, h);
      if (box.payload.size() != (payload_bits(t.n_frames(), t.levels) + 7) / 8) return "payload size";
      const BitstreamContainer back = parse(serialize(box));
      if (!(unpack(back) == t)) return "tokens changed in trial " + std::to_string(trial);
      if (back.header.config_json != h.config_json || back.header.n_samples != h.n_samples) return "header changed";
    }
    return {};
  });
  check("decode-length", [&]() -> std::string {
    const Mat y = model->decode(tokens, n);
    if (y.cols() != n) return std::to_string(y.cols()) + " samples, expected " + std::to_string(n);
    if (!y.allFinite()) return "non-finite output";
    if (y.cwiseAbs().maxCoeff() > 1.0) return "output outside [-1, 1]";
    return {};
  });
  check("causality", [&]() -> std::string {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-0.9, 0.9);
    for (const Index p : {n / 3, n / 2, n - hop}) {
      Mat y = x;
      for (Index i = p; i < n; ++i) y(0, i) = u(rng);
      const FrameTokens t = model->encode(y);
      for (Index f = 0; (f + 1) * hop <= p; ++f) {
        if (t.codes.row(f) != tokens.codes.row(f)) {
          return "frame " + std::to_string(f) + " changed after perturbing sample " + std::to_string(p);
        }
      }
    }
    return {};
  });
  check("streaming", [&]() -> std::string {
    const Index frames = n / hop;
    const Mat xs = x.leftCols(frames * hop);
    const FrameTokens full = model->encode(xs);
    StreamingEncoder enc(*model);
    FrameTokens joined;
    joined.levels = c.levels;
    joined.codes.resize(0, c.levels.dims());
    const Index pattern[] = {1, 3, 2, 5};
    Index at = 0;
    for (int i = 0; at < frames; ++i) {
      const Index k = std::min(pattern[i % 4], frames - at);
      const FrameTokens part = enc.push(xs.middleCols(at * hop, k * hop));
      const Index old = joined.codes.rows();
      joined.codes.conservativeResize(old + part.n_frames(), c.levels.dims());
      joined.codes.bottomRows(part.n_frames()) = part.codes;
      at += k;
    }
    if (!(joined == full)) return "chunked tokens differ from the full-buffer encode";
    return {};
  });
  check("snapshot-round-trip", [&]() -> std::string {
    const std::string bytes = model_bytes(*model);
    std::istringstream in(bytes);
    auto again = read_model(in);
    if (model_bytes(*again) != bytes) return "rewritten snapshot differs";
    if (!(again->encode(x) == tokens)) return "reloaded model encodes differently";
    return {};
  });

  if (!failed.empty()) throw Exit{kInvariant, "invariant failed: " + failed};
  (void)err;
  out << "verify: all invariants hold\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Low-latency neural audio codec: encode, decode, inspect, train and verify."};
  app.name("l3ac");
  app.require_subcommand(1, 1);
  app.footer(
      "Exit codes: 0 ok, 1 usage/unreadable input/unknown config, 2 audio format, 3 config mismatch,\n"
      "4 corrupt container or snapshot, 5 invariant or gradient check failure, 6 numerical failure.");

  ModelOptions enc_model, dec_model;
  std::string enc_in, enc_out, dec_in, dec_out, info_in, ref_path, deg_path;
  bool dec_float = false;

  auto* encode = app.add_subcommand("encode", "WAV (16 kHz mono) -> .l3ac container");
  encode->add_option("--in", enc_in, "Input WAV")->required();
  encode->add_option("--out", enc_out, "Output container")->required();
  enc_model.add_to(encode);

  auto* decode = app.add_subcommand("decode", ".l3ac container -> WAV");
  decode->add_option("--in", dec_in, "Input container")->required();
  decode->add_option("--out", dec_out, "Output WAV")->required();
  decode->add_flag("--float", dec_float, "Write float32 instead of PCM16");
  dec_model.add_to(decode);

  auto* info = app.add_subcommand("info", "Describe a container, model snapshot or WAV file");
  info->add_option("--in", info_in, "File to describe")->required();

  auto* metrics = app.add_subcommand("metrics", "SDR, mel distance and spectral loss between two WAVs");
  metrics->add_option("--ref", ref_path, "Reference WAV")->required();
  metrics->add_option("--deg", deg_path, "Degraded WAV")->required();

  std::vector<std::string> gc_cases;
  bool gc_list = false;
  double gc_tol = 1e-4;
  auto* grad = app.add_subcommand("grad-check", "Finite-difference checks of the differentiable ops");
  grad->add_option("--case", gc_cases, "Run only these cases (repeatable)");
  grad->add_flag("--list", gc_list, "List case names");
  grad->add_option("--tolerance", gc_tol, "Maximum relative error");

  TrainOptions to;
  auto* train = app.add_subcommand("train-toy", "Train a small codec on synthetic audio");
  train->add_option("--config", to.config_name, "Built-in config (default: mini)");
  train->add_flag("--toy", to.toy, "Narrow widths for a full-size built-in config");
  train->add_option("--steps", to.steps, "Schedule length; steps 0..N are run");
  train->add_option("--window", to.window, "Override the attention window");
  train->add_flag("--plain-conv", to.plain_conv, "Replace TConv pooling with plain convolutions");
  train->add_flag("--no-clamp", to.no_clamp, "Disable loss clamping");
  train->add_option("--seed", to.seed, "Seed for weights, data and quantizer coin");
  train->add_option("--batch", to.batch, "Clips per step");
  train->add_flag("--synthetic", to.synthetic, "Alternate synthetic families instead of one fixed clip");
  train->add_option("--seconds", to.seconds, "Clip length");
  train->add_option("--disc-width", to.disc_width, "Discriminator base width");
  train->add_option("--disc-every", to.disc_every, "Discriminator update period");
  train->add_option("--log", to.log_path, "Append every step's log line to this file");
  train->add_option("--print-every", to.print_every, "Print every k-th log line")->check(CLI::PositiveNumber);
  train->add_option("--checkpoint", to.checkpoint, "Model snapshot written at the end (and periodically)");
  train->add_option("--checkpoint-every", to.checkpoint_every, "Snapshot period in steps (0: end only)");

  VerifyOptions vo;
  auto* verify = app.add_subcommand("verify", "Run the invariant suite on a config or snapshot");
  vo.model.add_to(verify);
  verify->remove_option(verify->get_option("--toy"));
  verify->add_flag("--full-width", vo.full_width, "Use full channel widths instead of toy widths");
  verify->add_option("--window", vo.window, "Override the attention window");
  verify->add_flag("--plain-conv", vo.plain_conv, "Replace TConv pooling with plain convolutions");
  verify->add_flag("--no-clamp", vo.no_clamp, "Log a clamp-off training configuration");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*encode) return cmd_encode(enc_model, enc_in, enc_out, out);
    if (*decode) return cmd_decode(dec_model, dec_in, dec_out, dec_float, out);
    if (*info) return cmd_info(info_in, out);
    if (*metrics) return cmd_metrics(ref_path, deg_path, out, err);
    if (*grad) return cmd_grad_check(gc_cases, gc_list, gc_tol, out);
    if (*train) return cmd_train(to, out, err);
    if (*verify) return cmd_verify(vo, out, err);
  } catch (const Exit& e) {
    err << "l3ac: " << e.message << "\n";
    return e.code;
  } catch (const NumericalError& e) {
    err << "l3ac: numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const FormatError& e) {
    err << "l3ac: " << e.what() << "\n";
    return kCorrupt;
  } catch (const std::exception& e) {
    err << "l3ac: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}

}  // namespace l3ac::cli
