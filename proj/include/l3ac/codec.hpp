#pragma once

// Encoder -> FSQ -> decoder assembled from a CodecConfig.
//
// Encoder: input conv (1 -> C0) -> TConv unit -> per stage [conv units ->
// down layer] -> transformer blocks (optionally with a strided layer between
// them) -> pointwise projection to the FSQ dims.
// Decoder: centers scaled by 1/floor(L/2) -> pointwise to D0 -> transformer
// blocks (optionally with an up layer between them) -> TEConv unit -> per
// stage [up layer -> conv units] -> last unit.
//
// Token frame t covers samples [t*hop, (t+1)*hop) and depends on samples up to
// (t+1)*hop - 1 only. The decoder's linear interpolation looks one frame
// ahead at every up layer, so the decoder is not sample-causal.

#include "l3ac/bitstream.hpp"
#include "l3ac/config.hpp"

#include <functional>
#include <iosfwd>
#include <memory>

namespace l3ac {

/// How the bottleneck is treated on a training forward pass.
struct QuantizerMode {
  /// false: round with straight-through gradient; true: bounded value plus
  /// uniform noise.
  bool noise = false;
  /// Uniform [0, 1) source for the noise branch.
  std::function<double()> uniform;
};

/// Anything train_step can optimize: maps audio to a reconstruction of the
/// same length.
class Generator {
 public:
  virtual ~Generator() = default;
  virtual ParameterSet& parameters() = 0;
  virtual Var reconstruct(Graph& g, Var audio, const QuantizerMode& mode) const = 0;
};

class CodecModel : public Generator {
 public:
  /// Builds and initializes from config.seed. Validates the config.
  explicit CodecModel(const CodecConfig& config);
  CodecModel(const CodecModel&) = delete;
  CodecModel& operator=(const CodecModel&) = delete;

  const CodecConfig& config() const { return config_; }
  ParameterSet& parameters() override { return params_; }
  const ParameterSet& parameters() const { return params_; }

  /// Pre-quantization latent, dims x ceil(T / hop), for a 1 x T signal.
  Var encode_latent(Graph& g, Var audio) const;
  /// Audio (1 x frames*hop) from centered FSQ values (dims x frames).
  Var decode_latent(Graph& g, Var centers) const;
  /// encode -> quantize (or perturb) -> decode, cut to the input length.
  Var reconstruct(Graph& g, Var audio, const QuantizerMode& mode) const override;

  FrameTokens encode(const Mat& audio) const;
  /// Decodes and cuts to n_samples (n_samples < 0 keeps frames * hop).
  Mat decode(const FrameTokens& tokens, Index n_samples = -1) const;

  Index count_params() const { return params_.count(); }
  /// Multiply-accumulates for `duration_s` seconds of audio through encoder
  /// and decoder, attention counted at its full window.
  std::uint64_t count_macs(double duration_s) const;

  // Layers, public for the streaming encoder and tests.
  Conv1d input_conv;
  TConvUnit enc_tconv;
  std::vector<std::vector<ConvUnit>> enc_units;
  std::vector<DownLayer> downs;
  std::vector<TransformerBlock> enc_blocks;
  DownLayer enc_transformer_down;
  Conv1d enc_project;

  Conv1d dec_project;
  std::vector<TransformerBlock> dec_blocks;
  UpLayer dec_transformer_up;
  TEConvUnit teconv;
  std::vector<UpLayer> ups;
  std::vector<std::vector<ConvUnit>> dec_units;
  LastUnit last;

  /// Transformer blocks before the optional strided layer.
  std::size_t blocks_before_resample() const { return enc_blocks.size() / 2; }

 private:
  CodecConfig config_;
  ParameterSet params_;
};

inline constexpr std::uint16_t kModelFileVersion = 1;

/// "L3AM" | version u16 | config_len u32 | config JSON | parameter snapshot.
void write_model(std::ostream& out, const CodecModel& model);
/// Throws FormatError on a malformed file.
std::unique_ptr<CodecModel> read_model(std::istream& in);

}  // namespace l3ac
