#pragma once

// Codec configuration and the built-in presets.
//
// Channel lists: encoder_channels has one entry per encoder stage plus one
// (entry i is the width entering stage i, the last is the transformer width);
// decoder_channels likewise, with entry 0 the transformer width and the last
// the width at the audio rate.

#include "l3ac/bitstream.hpp"
#include "l3ac/fsq.hpp"
#include "l3ac/local_transformer.hpp"

#include <string>

namespace l3ac {

struct CodecConfig {
  std::string name = "custom";
  int sample_rate = 16000;
  std::vector<int> encoder_rates;
  std::vector<int> decoder_rates;
  std::vector<Index> encoder_channels;
  std::vector<Index> decoder_channels;
  Index conv_units_per_stage = 1;
  AttentionSpec attention;
  /// Extra strided layer between the transformer blocks (1 = none); the
  /// decoder mirrors it with an up layer.
  int transformer_downsample = 1;
  FsqLevels levels;
  TConvSpec tconv;
  /// Replace TPooling in the TConv/TEConv units with plain convolutions.
  bool plain_tconv = false;
  bool causal = true;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument with a message naming the violated rule.
  void validate() const;

  /// Samples per token frame: prod(encoder_rates) * transformer_downsample.
  Index hop() const;
  double frame_rate() const { return static_cast<double>(sample_rate) / static_cast<double>(hop()); }
  double bitrate() const;
  /// Encoder rates including the transformer downsample, as stored in containers.
  std::vector<int> token_rates() const;

  std::string to_json() const;
  static CodecConfig from_json(const std::string& text);
  bool operator==(const CodecConfig&) const;
};

/// Names accepted by preset().
std::vector<std::string> preset_names();
/// Small trainable config: 0.75 rates, 16 channels (8 at the audio-rate ends),
/// window 64, 4 heads, 2 layers. Also available as preset("mini").
CodecConfig miniature_config();
/// Built-in configurations "0.75", "1.0", "1.5", "3.0", "ablation" and "mini". With
/// toy=true (ignored for "mini") the channel widths shrink to a few channels per layer while rates,
/// windows and levels stay the same. Throws std::out_of_range on unknown names.
CodecConfig preset(const std::string& name, bool toy = false);

}  // namespace l3ac
