#pragma once

// Building blocks of the encoder and decoder.
//
// Every module has a differentiable `forward(Graph&, Var)` and, where the
// encoder needs it, a `stream(State&, const Mat&)` that consumes new columns
// and returns exactly the new output columns. Streaming uses the same kernels
// as the graph path and replays the left replicate padding on the first chunk,
// so its outputs match a full-buffer pass.

#include "l3ac/autodiff.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace l3ac {

/// Creates parameters under a dotted name prefix with seeded uniform
/// fan-in initialization, a = 1/sqrt(fan_in).
class ParamBuilder {
 public:
  ParamBuilder(ParameterSet& set, std::mt19937_64& rng, std::string prefix = {})
      : set_(&set), rng_(&rng), prefix_(std::move(prefix)) {}

  ParamBuilder scope(const std::string& name) const;
  Parameter& uniform(const std::string& name, std::vector<Index> shape, Index fan_in);
  Parameter& constant(const std::string& name, std::vector<Index> shape, double value);

 private:
  std::string full(const std::string& name) const;

  ParameterSet* set_;
  std::mt19937_64* rng_;
  std::string prefix_;
};

/// TPooling: mean-pool(max-pool(|x|, K), K), both causal with stride 1 and
/// left replicate padding, so the output has the input's length.
Var tpooling(Var x, Index window);

template <typename Scalar>
Signal<Scalar> tpooling(const Signal<Scalar>& x, Index window) {
  if (window < 1) throw std::invalid_argument("tpooling: window must be >= 1");
  const Signal<Scalar> a = x.cwiseAbs();
  const Signal<Scalar> m = kernels::sliding_max_valid<Scalar>(kernels::pad_replicate_left(a, window - 1), window, nullptr);
  return kernels::sliding_mean_valid<Scalar>(kernels::pad_replicate_left(m, window - 1), window);
}

struct TConvSpec {
  std::vector<Index> kernel_sizes{4, 16, 64};
  Index branch_conv_k = 7;
  Index expansion = 4;

  void validate() const;
};

struct StageSpec {
  Index n_conv_units = 1;
  Index channels = 16;
  Index rate = 1;

  void validate() const;
};

/// Left context kept between chunks by a causal sliding operator.
struct StreamHistory {
  Mat columns;
  bool started = false;

  /// Prepends the stored context (or replicate padding on the first call) to
  /// `x` and keeps the last `keep` columns of the result for next time.
  Mat extend(const Mat& x, Index keep);
};

class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(ParamBuilder& pb, const std::string& name, Index in_ch, Index out_ch, Index kernel,
         ConvOptions opt = {}, bool with_bias = true);

  Var forward(Graph& g, Var x) const;
  Mat stream(StreamHistory& state, const Mat& x) const;

  Index in_channels() const { return in_ch_; }
  Index out_channels() const { return out_ch_; }
  Index kernel() const { return kernel_; }
  const ConvOptions& options() const { return opt_; }
  /// Multiply-accumulates per output column.
  std::uint64_t macs_per_step() const;

  Parameter* weight = nullptr;
  Parameter* bias = nullptr;

 private:
  Index in_ch_ = 0;
  Index out_ch_ = 0;
  Index kernel_ = 1;
  ConvOptions opt_{};
};

/// Causal stream state for one TPooling branch.
struct TPoolStream {
  StreamHistory abs_history;
  StreamHistory max_history;
};

/// Multi-scale TConv unit. In `plain` mode the pooling stage is dropped and
/// the branch convolutions see x directly (the ablation baseline).
class TConvUnit {
 public:
  struct Stream {
    std::vector<TPoolStream> pools;
    std::vector<StreamHistory> branches;
  };

  TConvUnit() = default;
  TConvUnit(ParamBuilder& pb, Index channels, const TConvSpec& spec, bool plain = false);

  /// Concatenated branch features, expanded and passed through GELU
  /// (expansion * channels rows).
  Var latent(Graph& g, Var x) const;
  Var forward(Graph& g, Var x) const;
  Mat stream(Stream& state, const Mat& x) const;

  Index channels() const { return channels_; }
  bool plain() const { return plain_; }
  std::uint64_t macs_per_step() const;

 private:
  Index channels_ = 0;
  TConvSpec spec_;
  bool plain_ = false;
  std::vector<Conv1d> branches_;
  Conv1d expand_;
  Conv1d compress_;
};

/// Depthwise causal conv (k=7) -> channel norm -> pointwise 4x -> Snake ->
/// pointwise back -> residual add.
class ConvUnit {
 public:
  struct Stream {
    StreamHistory depthwise;
  };

  ConvUnit() = default;
  ConvUnit(ParamBuilder& pb, Index channels);

  Var forward(Graph& g, Var x) const;
  Mat stream(Stream& state, const Mat& x) const;
  std::uint64_t macs_per_step() const;

  Conv1d depthwise;
  Parameter* norm_gamma = nullptr;
  Parameter* norm_beta = nullptr;
  Conv1d expand;
  Parameter* alpha = nullptr;
  Conv1d compress;

  static constexpr double kNormEps = 1e-6;
};

/// Strided causal conv, kernel 2r: output length ceil(len / r).
class DownLayer {
 public:
  DownLayer() = default;
  DownLayer(ParamBuilder& pb, Index in_ch, Index out_ch, Index rate);

  Var forward(Graph& g, Var x) const { return conv.forward(g, x); }
  Mat stream(StreamHistory& state, const Mat& x) const { return conv.stream(state, x); }
  Index rate() const { return rate_; }
  std::uint64_t macs_per_step() const { return conv.macs_per_step(); }

  Conv1d conv;

 private:
  Index rate_ = 1;
};

/// Linear interpolation to rate x length, then a causal conv (k=7).
class UpLayer {
 public:
  UpLayer() = default;
  UpLayer(ParamBuilder& pb, Index in_ch, Index out_ch, Index rate);

  Var forward(Graph& g, Var x) const;
  Index rate() const { return rate_; }
  std::uint64_t macs_per_step() const { return conv.macs_per_step(); }

  Conv1d conv;

 private:
  Index rate_ = 1;
};

/// ConvUnit output gated by sigmoid(pointwise(instance_norm(TConv latent))).
class TEConvUnit {
 public:
  TEConvUnit() = default;
  TEConvUnit(ParamBuilder& pb, Index channels, const TConvSpec& spec, bool plain = false);

  Var forward(Graph& g, Var x) const;
  std::uint64_t macs_per_step() const;

  ConvUnit unit;
  TConvUnit tconv;
  Conv1d gate;

  static constexpr double kNormEps = 1e-5;
};

/// Pointwise widen to 2C, three ConvUnits, pointwise to one channel, tanh.
class LastUnit {
 public:
  LastUnit() = default;
  LastUnit(ParamBuilder& pb, Index channels);

  Var forward(Graph& g, Var x) const;
  std::uint64_t macs_per_step() const;

  Conv1d widen;
  std::vector<ConvUnit> units;
  Conv1d project;
};

}  // namespace l3ac
