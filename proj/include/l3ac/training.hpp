#pragma once

// Desk-scale training: one-cycle LR, AdamW, global-norm clipping, hybrid
// quantization, clamped loss mixing and a discriminator updated every
// disc_every steps.
//
// A run of N steps executes steps 0..N inclusive so that the schedule's start
// (step 0), peak (step 0.3 N) and end (step N) all appear in the trace.

#include "l3ac/codec.hpp"
#include "l3ac/discriminator.hpp"

#include <array>
#include <iosfwd>
#include <limits>

namespace l3ac {

inline constexpr double kNoCap = std::numeric_limits<double>::infinity();

struct TrainConfig {
  std::uint64_t total_steps = 2000;
  double lr_warm = 5e-5;
  double lr_peak = 5e-4;
  double lr_final = 5e-6;
  double warmup_fraction = 0.3;
  double clip_codec = 10000;
  double clip_disc = 10;
  double wd_codec = 0;
  double wd_disc = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t disc_every = 20;
  Index batch_size = 1;
  std::uint64_t seed = 0;
  /// Loss weights for l_e, l_s, l_p, l_adv.
  std::array<double, 4> weights{1, 1, 1, 1};
  bool clamp = true;
  /// Steps below clamp_switch_fraction * total_steps use early_caps.
  double clamp_switch_fraction = 0.2;
  std::array<double, 4> early_caps{kNoCap, kNoCap, 10, 10};
  std::array<double, 4> late_caps{5, 5, 100, 100};

  void validate() const;
  /// Caps in force at `step` (all kNoCap when clamping is off).
  std::array<double, 4> caps_at(std::uint64_t step) const;
};

/// Cosine ramp lr_warm -> lr_peak over the first warmup_fraction of steps,
/// cosine decay lr_peak -> lr_final after. Throws if step > total.
double one_cycle_lr(std::uint64_t step, std::uint64_t total, const TrainConfig& cfg);

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0;
};

/// Decoupled weight decay Adam over the trainable parameters of a set.
/// Parameters without a gradient buffer are treated as having zero gradient.
class AdamW {
 public:
  AdamW(ParameterSet& params, const AdamWConfig& config);
  /// Throws NumericalError on a non-finite gradient.
  void step(double lr);
  std::uint64_t steps() const { return t_; }

 private:
  struct Slot {
    Parameter* param;
    Mat m;
    Mat v;
  };
  std::vector<Slot> slots_;
  AdamWConfig config_;
  std::uint64_t t_ = 0;
};

/// Scales all trainable gradients by max_norm / norm when the global L2 norm
/// exceeds max_norm. Returns the norm before scaling; throws NumericalError if
/// it is not finite.
double clip_grad_norm(ParameterSet& params, double max_norm);

/// Perfect-reconstruction stand-in: x^ = x + w * x with a single weight w
/// initialized to 0.
class PassThroughGenerator : public Generator {
 public:
  PassThroughGenerator();
  ParameterSet& parameters() override { return params_; }
  Var reconstruct(Graph& g, Var audio, const QuantizerMode& mode) const override;
  Parameter& weight() { return *weight_; }

 private:
  ParameterSet params_;
  Parameter* weight_;
};

/// Seeded clip source. Batches cycle through sine mixtures (fundamental,
/// overtones, decay), chirps and amplitude-modulated noise; every batch has
/// one random length in [min_seconds, max_seconds]. Samples lie in [-1, 1].
class SyntheticDataset {
 public:
  enum class Family { Sines, Chirp, ModulatedNoise };

  explicit SyntheticDataset(std::uint64_t seed, double sample_rate = 16000, double min_seconds = 1,
                            double max_seconds = 2);
  Batch<double> next_batch(Index batch_size);
  Mat make(Family family, Index length);
  std::uint64_t batches() const { return batches_; }

 private:
  std::mt19937_64 rng_;
  double sample_rate_;
  double min_seconds_;
  double max_seconds_;
  std::uint64_t batches_ = 0;
};

/// Owns optimizers and the step counter for a generator/discriminator pair.
class Trainer {
 public:
  Trainer(Generator& generator, Discriminator& discriminator, const FeatureExtractor& extractor,
          const TrainConfig& config);

  /// Runs the next step on `batch` and returns its report. Throws
  /// NumericalError naming the first non-finite node if a loss is not finite.
  LossReport step(const Batch<double>& batch);
  std::uint64_t next_step() const { return step_; }
  const TrainConfig& config() const { return config_; }

 private:
  Generator* generator_;
  Discriminator* discriminator_;
  const FeatureExtractor* extractor_;
  TrainConfig config_;
  AdamW gen_opt_;
  AdamW disc_opt_;
  std::mt19937_64 rng_;
  std::uint64_t step_ = 0;
};

/// `step=<n> lr=<v> le=<v> ls=<v> lp=<v> ladv=<v> coin=<q|n>`
std::string format_log_line(std::uint64_t step, const LossReport& report);

}  // namespace l3ac
