#pragma once

// Causal sliding-window transformer over frame sequences.
//
// Positions are encoded by a learned per-head bias indexed by the distance
// between query and key (0 .. window-1), so nothing depends on absolute frame
// index and streaming needs only the last window-1 keys and values.

#include "l3ac/signal_ops.hpp"

namespace l3ac {

struct AttentionSpec {
  Index window = 64;
  Index n_heads = 4;
  Index n_layers = 2;

  /// Throws unless window >= 1, n_layers >= 0 and heads divide `channels`.
  void validate(Index channels) const;
};

/// Pre-norm block: x + O(attn(norm(x))), then x + mlp(norm(x)) with a 4x GELU
/// MLP.
class TransformerBlock {
 public:
  /// Rolling key/value cache: at most window-1 most recent columns.
  struct Stream {
    Mat keys;
    Mat values;
  };

  TransformerBlock() = default;
  TransformerBlock(ParamBuilder& pb, Index channels, const AttentionSpec& spec);

  Var forward(Graph& g, Var x) const;
  Mat stream(Stream& state, const Mat& x) const;
  /// Counted at the full window (steady state).
  std::uint64_t macs_per_step() const;

  Parameter* norm1_gamma = nullptr;
  Parameter* norm1_beta = nullptr;
  Conv1d query, key, value, out;
  Parameter* position_bias = nullptr;
  Parameter* norm2_gamma = nullptr;
  Parameter* norm2_beta = nullptr;
  Conv1d mlp_in, mlp_out;

  static constexpr double kNormEps = 1e-6;

 private:
  Index channels_ = 0;
  AttentionSpec spec_;
};

class LocalTransformer {
 public:
  using Stream = std::vector<TransformerBlock::Stream>;

  LocalTransformer() = default;
  LocalTransformer(ParamBuilder& pb, Index channels, const AttentionSpec& spec);

  Var forward(Graph& g, Var x) const;
  Mat stream(Stream& state, const Mat& x) const;
  std::uint64_t macs_per_step() const;

  std::vector<TransformerBlock> blocks;
};

}  // namespace l3ac
