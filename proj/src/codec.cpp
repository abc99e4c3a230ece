#include "l3ac/codec.hpp"

#include <cmath>
#include <istream>
#include <ostream>

namespace l3ac {

CodecModel::CodecModel(const CodecConfig& config) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(config_.seed);
  const CodecConfig& c = config_;
  const ConvOptions pw{1, 1, 1, Padding::None};
  const Index dims = c.levels.dims();

  ParamBuilder enc(params_, rng, "encoder");
  input_conv = Conv1d(enc, "input", 1, c.encoder_channels.front(), 7);
  enc_tconv = TConvUnit(enc, c.encoder_channels.front(), c.tconv, c.plain_tconv);
  for (std::size_t i = 0; i < c.encoder_rates.size(); ++i) {
    ParamBuilder stage = enc.scope("stage" + std::to_string(i));
    enc_units.emplace_back();
    for (Index u = 0; u < c.conv_units_per_stage; ++u) {
      ParamBuilder su = stage.scope("unit" + std::to_string(u));
      enc_units.back().emplace_back(su, c.encoder_channels[i]);
    }
    downs.emplace_back(stage, c.encoder_channels[i], c.encoder_channels[i + 1], c.encoder_rates[i]);
  }
  ParamBuilder et = enc.scope("transformer");
  const Index ew = c.encoder_channels.back();
  for (Index b = 0; b < c.attention.n_layers; ++b) {
    ParamBuilder sb = et.scope("block" + std::to_string(b));
    enc_blocks.emplace_back(sb, ew, c.attention);
  }
  if (c.transformer_downsample > 1) enc_transformer_down = DownLayer(et, ew, ew, c.transformer_downsample);
  enc_project = Conv1d(enc, "project", ew, dims, 1, pw);

  ParamBuilder dec(params_, rng, "decoder");
  const Index dw = c.decoder_channels.front();
  dec_project = Conv1d(dec, "project", dims, dw, 1, pw);
  ParamBuilder dt = dec.scope("transformer");
  for (Index b = 0; b < c.attention.n_layers; ++b) {
    ParamBuilder sb = dt.scope("block" + std::to_string(b));
    dec_blocks.emplace_back(sb, dw, c.attention);
  }
  if (c.transformer_downsample > 1) dec_transformer_up = UpLayer(dt, dw, dw, c.transformer_downsample);
  teconv = TEConvUnit(dec, dw, c.tconv, c.plain_tconv);
  for (std::size_t i = 0; i < c.decoder_rates.size(); ++i) {
    ParamBuilder stage = dec.scope("stage" + std::to_string(i));
    ups.emplace_back(stage, c.decoder_channels[i], c.decoder_channels[i + 1], c.decoder_rates[i]);
    dec_units.emplace_back();
    for (Index u = 0; u < c.conv_units_per_stage; ++u) {
      ParamBuilder su = stage.scope("unit" + std::to_string(u));
      dec_units.back().emplace_back(su, c.decoder_channels[i + 1]);
    }
  }
  last = LastUnit(dec, c.decoder_channels.back());
}

Var CodecModel::encode_latent(Graph& g, Var audio) const {
  if (audio.rows() != 1) throw ShapeError("encode: expected mono audio");
  if (audio.cols() == 0) throw std::invalid_argument("encode: empty audio");
  Var h = enc_tconv.forward(g, input_conv.forward(g, audio));
  for (std::size_t i = 0; i < downs.size(); ++i) {
    for (const auto& u : enc_units[i]) h = u.forward(g, h);
    h = downs[i].forward(g, h);
  }
  for (std::size_t b = 0; b < enc_blocks.size(); ++b) {
    if (b == blocks_before_resample() && config_.transformer_downsample > 1) h = enc_transformer_down.forward(g, h);
    h = enc_blocks[b].forward(g, h);
  }
  if (enc_blocks.empty() && config_.transformer_downsample > 1) h = enc_transformer_down.forward(g, h);
  return enc_project.forward(g, h);
}

Var CodecModel::decode_latent(Graph& g, Var centers) const {
  const FsqLevels& levels = config_.levels;
  if (centers.rows() != levels.dims()) throw ShapeError("decode: latent dims do not match levels");
  Vec inv(levels.dims());
  for (Index d = 0; d < levels.dims(); ++d) inv(d) = 1.0 / levels.half_width(d);
  Var h = dec_project.forward(g, scale_rows(centers, inv));
  for (std::size_t b = 0; b < dec_blocks.size(); ++b) {
    if (b == blocks_before_resample() && config_.transformer_downsample > 1) h = dec_transformer_up.forward(g, h);
    h = dec_blocks[b].forward(g, h);
  }
  if (dec_blocks.empty() && config_.transformer_downsample > 1) h = dec_transformer_up.forward(g, h);
  h = teconv.forward(g, h);
  for (std::size_t i = 0; i < ups.size(); ++i) {
    h = ups[i].forward(g, h);
    for (const auto& u : dec_units[i]) h = u.forward(g, h);
  }
  return last.forward(g, h);
}

Var CodecModel::reconstruct(Graph& g, Var audio, const QuantizerMode& mode) const {
  Var z = encode_latent(g, audio);
  Var q = mode.noise ? fsq_noise(z, config_.levels, mode.uniform) : fsq_quantize(z, config_.levels);
  return slice_time(decode_latent(g, q), 0, audio.cols());
}

FrameTokens CodecModel::encode(const Mat& audio) const {
  Graph g(false);
  return fsq_quantize(encode_latent(g, g.input(audio)).value(), config_.levels).tokens;
}

Mat CodecModel::decode(const FrameTokens& tokens, Index n_samples) const {
  if (!(tokens.levels == config_.levels)) throw std::invalid_argument("decode: token levels do not match the model");
  if (tokens.n_frames() == 0) return Mat(1, 0);
  Graph g(false);
  Mat y = decode_latent(g, g.input(fsq_centers(tokens))).value();
  if (n_samples >= 0) {
    if (n_samples > y.cols()) throw std::invalid_argument("decode: requested more samples than decoded");
    y.conservativeResize(1, n_samples);
  }
  return y;
}

std::uint64_t CodecModel::count_macs(double duration_s) const {
  // Sum of per-column costs times columns per second at each layer's rate.
  double per_second = 0;
  auto add = [&](std::uint64_t macs, Index samples_per_column) {
    per_second += static_cast<double>(macs) * config_.sample_rate / static_cast<double>(samples_per_column);
  };
  Index rate = 1;
  add(input_conv.macs_per_step(), rate);
  add(enc_tconv.macs_per_step(), rate);
  for (std::size_t i = 0; i < downs.size(); ++i) {
    for (const auto& u : enc_units[i]) add(u.macs_per_step(), rate);
    rate *= downs[i].rate();
    add(downs[i].macs_per_step(), rate);
  }
  for (std::size_t b = 0; b < enc_blocks.size(); ++b) {
    if (b == blocks_before_resample() && config_.transformer_downsample > 1) {
      rate *= config_.transformer_downsample;
      add(enc_transformer_down.macs_per_step(), rate);
    }
    add(enc_blocks[b].macs_per_step(), rate);
  }
  if (enc_blocks.empty() && config_.transformer_downsample > 1) {
    rate *= config_.transformer_downsample;
    add(enc_transformer_down.macs_per_step(), rate);
  }
  add(enc_project.macs_per_step(), rate);

  add(dec_project.macs_per_step(), rate);
  for (std::size_t b = 0; b < dec_blocks.size(); ++b) {
    if (b == blocks_before_resample() && config_.transformer_downsample > 1) {
      rate /= config_.transformer_downsample;
      add(dec_transformer_up.macs_per_step(), rate);
    }
    add(dec_blocks[b].macs_per_step(), rate);
  }
  if (dec_blocks.empty() && config_.transformer_downsample > 1) {
    rate /= config_.transformer_downsample;
    add(dec_transformer_up.macs_per_step(), rate);
  }
  add(teconv.macs_per_step(), rate);
  for (std::size_t i = 0; i < ups.size(); ++i) {
    rate /= ups[i].rate();
    add(ups[i].macs_per_step(), rate);
    for (const auto& u : dec_units[i]) add(u.macs_per_step(), rate);
  }
  add(last.macs_per_step(), rate);
  return static_cast<std::uint64_t>(std::llround(per_second * duration_s));
}

void write_model(std::ostream& out, const CodecModel& model) {
  const std::string json = model.config().to_json();
  le::put_bytes(out, "L3AM");
  le::put_u16(out, kModelFileVersion);
  le::put_u32(out, static_cast<std::uint32_t>(json.size()));
  le::put_bytes(out, json);
  write_parameters(out, model.parameters());
}

std::unique_ptr<CodecModel> read_model(std::istream& in) {
  if (le::get_bytes(in, 4) != "L3AM") throw FormatError("not a model snapshot (bad magic)");
  if (le::get_u16(in) != kModelFileVersion) throw FormatError("unsupported model snapshot version");
  const std::uint32_t len = le::get_u32(in);
  if (len > (1u << 20)) throw FormatError("model config record too long");
  CodecConfig config;
  try {
    config = CodecConfig::from_json(le::get_bytes(in, len));
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("model snapshot: ") + e.what());
  }
  auto model = std::make_unique<CodecModel>(config);
  read_parameters(in, model->parameters());
  return model;
}

}  // namespace l3ac
