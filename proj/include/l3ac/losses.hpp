#pragma once

// Training losses and evaluation metrics on single-channel 1 x T signals.
//
// Norm conventions: the "L1" terms are means of absolute differences; the
// adversarial "L2" term is a plain Euclidean norm; the perceptual loss is the
// Euclidean distance between feature maps.

#include "l3ac/signal_ops.hpp"
#include "l3ac/spectral.hpp"

#include <array>
#include <memory>

namespace l3ac {

/// Windows 2^i, hops 2^i / 4 for the listed exponents.
struct SpectralScaleSet {
  std::vector<int> exponents{5, 6, 7, 8, 9, 10, 11};

  std::vector<StftSpec> scales() const;
  /// Scales whose window fits in `length` samples; throws if none does.
  std::vector<StftSpec> fitting(Index length) const;
};

inline constexpr double kLogPowerFloor = 1e-10;

Var loss_elem(Var x_hat, const Mat& x);
/// Mean over fitting scales of mean|S - S^| + mean|log10 S^2 - log10 S^^2|.
Var loss_spec(Var x_hat, const Mat& x, const SpectralScaleSet& scales = {});
double loss_spec(const Mat& x, const Mat& x_hat, const SpectralScaleSet& scales = {});

/// Deterministic feature map used by the perceptual loss.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual Var features(Graph& g, Var x) const = 0;
};

/// Fixed, seeded stack of four strided convs with leaky ReLU in between. Its
/// parameters are not trainable.
class SurrogateExtractor : public FeatureExtractor {
 public:
  explicit SurrogateExtractor(std::uint64_t seed = 0x5eed);
  Var features(Graph& g, Var x) const override;

 private:
  ParameterSet params_;
  std::vector<Conv1d> layers_;
};

Var loss_perceptual(Var x_hat, const Mat& x, const FeatureExtractor& extractor);

/// Discriminator outputs for one input: per scale, the final map and the
/// feature maps of its layers.
struct DiscriminatorOutput {
  std::vector<Var> logits;
  std::vector<std::vector<Var>> features;
};

/// sum_k ||1 - D_k(x^)||_2 + 2 sum_k sum_l mean|D_k^l(x) - D_k^l(x^)|.
Var loss_adv(const std::vector<Var>& fake_logits, const std::vector<std::vector<Mat>>& real_features,
             const std::vector<std::vector<Var>>& fake_features);
/// Least-squares discriminator objective: sum_k mean((D_k(x) - 1)^2) + mean(D_k(x^)^2).
Var loss_discriminator(const std::vector<Var>& real_logits, const std::vector<Var>& fake_logits);

enum LossTerm { kElem = 0, kSpec = 1, kPerceptual = 2, kAdversarial = 3 };

struct LossReport {
  /// Raw values of l_e, l_s, l_p, l_adv.
  std::array<double, 4> raw{};
  /// Caps in force (infinity when a term is not capped).
  std::array<double, 4> caps{};
  /// Clamp-adjusted contributions, weight included.
  std::array<double, 4> effective{};
  double total = 0;
  double disc_loss = 0;
  bool disc_updated = false;
  bool quantized = true;
  double lr = 0;
  double grad_norm = 0;
};

/// 10 log10(|x|^2 / |x - x^|^2); +infinity on an exact match. Throws on a
/// zero reference.
double metric_sdr(const Mat& x, const Mat& x_hat);

struct MelSpec {
  Index n_mels = 80;
  Index window = 1024;
  Index hop = 256;
  double sample_rate = 16000;
  double fmin = 0;
  double fmax = 8000;
  double floor = 1e-5;
};

/// Mean |log10(max(mel(x), floor)) - log10(max(mel(x^), floor))| where mel is
/// the filterbank applied to STFT magnitudes.
double metric_mel(const Mat& x, const Mat& x_hat, const MelSpec& spec = {});

}  // namespace l3ac
