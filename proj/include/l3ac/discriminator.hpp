#pragma once

// Small multi-scale discriminator: one conv stack on the waveform and two on
// log STFT magnitudes (windows 512 and 1024, frequency bins as channels). Each
// stack has four leaky-ReLU conv layers whose outputs are the feature maps,
// followed by a one-channel output conv.

#include "l3ac/losses.hpp"

namespace l3ac {

struct DiscriminatorConfig {
  Index width = 16;
  std::uint64_t seed = 1;
};

class Discriminator {
 public:
  static constexpr Index kLayers = 4;

  explicit Discriminator(const DiscriminatorConfig& config = {});
  Discriminator(const Discriminator&) = delete;
  Discriminator& operator=(const Discriminator&) = delete;

  /// Needs at least 1024 samples.
  DiscriminatorOutput forward(Graph& g, Var audio) const;
  Index scales() const { return static_cast<Index>(stacks_.size()); }

  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }

 private:
  struct Stack {
    std::optional<StftSpec> stft;
    std::vector<Conv1d> layers;
    Conv1d output;
  };

  ParameterSet params_;
  std::vector<Stack> stacks_;
};

}  // namespace l3ac
