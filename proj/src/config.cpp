#include "l3ac/config.hpp"

#include <json.hpp>

#include <numeric>

namespace l3ac {

using nlohmann::json;

namespace {

Index product(const std::vector<int>& v) {
  return std::accumulate(v.begin(), v.end(), Index{1}, [](Index a, int b) { return a * b; });
}

void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument("config: " + message);
}

}  // namespace

void CodecConfig::validate() const {
  require(sample_rate > 0, "sample_rate must be positive");
  require(!encoder_rates.empty() && !decoder_rates.empty(), "rates must not be empty");
  for (int r : encoder_rates) require(r >= 1 && r <= 255, "encoder rates must be in [1, 255]");
  for (int r : decoder_rates) require(r >= 1 && r <= 255, "decoder rates must be in [1, 255]");
  require(product(encoder_rates) == product(decoder_rates),
          "encoder rate product " + std::to_string(product(encoder_rates)) + " != decoder rate product " +
              std::to_string(product(decoder_rates)));
  require(transformer_downsample >= 1 && transformer_downsample <= 255, "transformer_downsample must be in [1, 255]");
  require(encoder_channels.size() == encoder_rates.size() + 1, "encoder_channels needs one entry per stage plus one");
  require(decoder_channels.size() == decoder_rates.size() + 1, "decoder_channels needs one entry per stage plus one");
  for (Index c : encoder_channels) require(c >= 1, "channels must be >= 1");
  for (Index c : decoder_channels) require(c >= 1, "channels must be >= 1");
  require(conv_units_per_stage >= 0, "conv_units_per_stage must be >= 0");
  require(levels.dims() >= 1, "levels must not be empty");
  require(causal, "only causal encoders are implemented");
  attention.validate(encoder_channels.back());
  attention.validate(decoder_channels.front());
  tconv.validate();
}

Index CodecConfig::hop() const { return product(encoder_rates) * transformer_downsample; }

double CodecConfig::bitrate() const { return l3ac::bitrate(sample_rate, token_rates(), levels); }

std::vector<int> CodecConfig::token_rates() const {
  std::vector<int> r = encoder_rates;
  if (transformer_downsample > 1) r.push_back(transformer_downsample);
  return r;
}

std::string CodecConfig::to_json() const {
  json j;
  j["name"] = name;
  j["sample_rate"] = sample_rate;
  j["encoder_rates"] = encoder_rates;
  j["decoder_rates"] = decoder_rates;
  j["encoder_channels"] = encoder_channels;
  j["decoder_channels"] = decoder_channels;
  j["conv_units_per_stage"] = conv_units_per_stage;
  j["attention"] = {{"window", attention.window}, {"n_heads", attention.n_heads}, {"n_layers", attention.n_layers}};
  j["transformer_downsample"] = transformer_downsample;
  j["levels"] = levels.values();
  j["tconv"] = {{"kernel_sizes", tconv.kernel_sizes},
                {"branch_conv_k", tconv.branch_conv_k},
                {"expansion", tconv.expansion}};
  j["plain_tconv"] = plain_tconv;
  j["causal"] = causal;
  j["seed"] = seed;
  return j.dump();
}

CodecConfig CodecConfig::from_json(const std::string& text) {
  CodecConfig c;
  try {
    const json j = json::parse(text);
    c.name = j.at("name").get<std::string>();
    c.sample_rate = j.at("sample_rate").get<int>();
    c.encoder_rates = j.at("encoder_rates").get<std::vector<int>>();
    c.decoder_rates = j.at("decoder_rates").get<std::vector<int>>();
    c.encoder_channels = j.at("encoder_channels").get<std::vector<Index>>();
    c.decoder_channels = j.at("decoder_channels").get<std::vector<Index>>();
    c.conv_units_per_stage = j.at("conv_units_per_stage").get<Index>();
    const json& a = j.at("attention");
    c.attention.window = a.at("window").get<Index>();
    c.attention.n_heads = a.at("n_heads").get<Index>();
    c.attention.n_layers = a.at("n_layers").get<Index>();
    c.transformer_downsample = j.at("transformer_downsample").get<int>();
    c.levels = FsqLevels(j.at("levels").get<std::vector<int>>());
    const json& t = j.at("tconv");
    c.tconv.kernel_sizes = t.at("kernel_sizes").get<std::vector<Index>>();
    c.tconv.branch_conv_k = t.at("branch_conv_k").get<Index>();
    c.tconv.expansion = t.at("expansion").get<Index>();
    c.plain_tconv = j.at("plain_tconv").get<bool>();
    c.causal = j.at("causal").get<bool>();
    c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: malformed JSON: ") + e.what());
  }
  c.validate();
  return c;
}

bool CodecConfig::operator==(const CodecConfig& o) const { return to_json() == o.to_json(); }

std::vector<std::string> preset_names() { return {"0.75", "1.0", "1.5", "3.0", "ablation", "mini"}; }

CodecConfig miniature_config() {
  CodecConfig c = preset("0.75", true);
  c.name = "mini";
  // 16 wide except the two audio-rate ends, which dominate the step cost.
  c.encoder_channels.assign(c.encoder_rates.size() + 1, 16);
  c.decoder_channels.assign(c.decoder_rates.size() + 1, 16);
  c.encoder_channels.front() = 8;
  c.decoder_channels.back() = 8;
  c.attention.window = 64;
  c.attention.n_heads = 4;
  c.attention.n_layers = 2;
  c.validate();
  return c;
}

CodecConfig preset(const std::string& name, bool toy) {
  if (name == "mini") return miniature_config();
  CodecConfig c;
  c.name = name;
  c.levels = FsqLevels({7, 7, 7, 7, 7, 7});
  if (name == "0.75") {
    c.encoder_rates = {6, 5, 4, 3};
    c.decoder_rates = {5, 4, 3, 2, 3};
    c.attention.window = 600;
  } else if (name == "1.0") {
    c.encoder_rates = {6, 5, 3, 3};
    c.decoder_rates = {5, 3, 3, 2, 3};
    c.attention.window = 750;
  } else if (name == "1.5") {
    c.encoder_rates = {6, 5, 3, 2};
    c.decoder_rates = {5, 3, 3, 2, 2};
    c.attention.window = 600;
  } else if (name == "3.0") {
    c.encoder_rates = {6, 4, 4};
    c.decoder_rates = {4, 4, 3, 2};
    c.attention.window = 400;
    c.levels = FsqLevels({9, 9, 9, 7, 7, 7});
  } else if (name == "ablation") {
    c.encoder_rates = {6, 5, 4};
    c.decoder_rates = {5, 4, 3, 2};
    c.attention.window = 300;
    c.transformer_downsample = 3;
  } else {
    throw std::out_of_range("unknown config '" + name + "'");
  }
  const std::size_t n_enc = c.encoder_rates.size();
  const std::size_t n_dec = c.decoder_rates.size();
  if (toy) {
    c.name += "-toy";
    c.encoder_channels.assign(n_enc + 1, 8);
    c.encoder_channels.front() = 4;
    c.decoder_channels.assign(n_dec + 1, 8);
    c.decoder_channels.back() = 4;
    c.attention.n_heads = 2;
  } else {
    // Width doubles per stage from 32 up to 512 at the transformer.
    for (std::size_t i = 0; i <= n_enc; ++i) c.encoder_channels.push_back(std::min<Index>(Index{32} << i, 512));
    c.encoder_channels.back() = 512;
    for (std::size_t i = 0; i <= n_dec; ++i) c.decoder_channels.push_back(std::max<Index>(Index{512} >> i, 32));
  }
  c.validate();
  return c;
}

}  // namespace l3ac
