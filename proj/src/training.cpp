#include "l3ac/training.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

namespace l3ac {

void TrainConfig::validate() const {
  if (total_steps < 1) throw std::invalid_argument("train: total_steps must be >= 1");
  if (!(lr_warm < lr_peak)) throw std::invalid_argument("train: lr_warm must be below lr_peak");
  if (!(lr_final < lr_warm)) throw std::invalid_argument("train: lr_final must be below lr_warm");
  if (!(warmup_fraction > 0 && warmup_fraction < 1)) throw std::invalid_argument("train: warmup_fraction in (0, 1)");
  if (disc_every < 1) throw std::invalid_argument("train: disc_every must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (!(clip_codec > 0 && clip_disc > 0)) throw std::invalid_argument("train: clip norms must be > 0");
  for (double c : early_caps) {
    if (!(c > 0)) throw std::invalid_argument("train: caps must be > 0");
  }
  for (double c : late_caps) {
    if (!(c > 0)) throw std::invalid_argument("train: caps must be > 0");
  }
}

std::array<double, 4> TrainConfig::caps_at(std::uint64_t step) const {
  if (!clamp) return {kNoCap, kNoCap, kNoCap, kNoCap};
  return static_cast<double>(step) < clamp_switch_fraction * static_cast<double>(total_steps) ? early_caps
                                                                                              : late_caps;
}

double one_cycle_lr(std::uint64_t step, std::uint64_t total, const TrainConfig& cfg) {
  if (step > total) throw std::out_of_range("one_cycle_lr: step beyond total");
  if (step == 0) return cfg.lr_warm;
  if (step == total) return cfg.lr_final;
  const double warm = cfg.warmup_fraction * static_cast<double>(total);
  const double s = static_cast<double>(step);
  if (s == warm) return cfg.lr_peak;
  if (s < warm) {
    const double p = s / warm;
    return cfg.lr_warm + (cfg.lr_peak - cfg.lr_warm) * 0.5 * (1 - std::cos(std::numbers::pi * p));
  }
  const double p = (s - warm) / (static_cast<double>(total) - warm);
  return cfg.lr_final + (cfg.lr_peak - cfg.lr_final) * 0.5 * (1 + std::cos(std::numbers::pi * p));
}

AdamW::AdamW(ParameterSet& params, const AdamWConfig& config) : config_(config) {
  for (auto& p : params) {
    if (!p->trainable) continue;
    slots_.push_back(Slot{p.get(), Mat::Zero(p->value.rows(), p->value.cols()),
                          Mat::Zero(p->value.rows(), p->value.cols())});
  }
}

void AdamW::step(double lr) {
  for (const Slot& s : slots_) {
    if (s.param->has_grad() && !s.param->grad.allFinite()) {
      throw NumericalError("adamw: non-finite gradient in '" + s.param->id() + "'");
    }
  }
  ++t_;
  const double bc1 = 1 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1 - std::pow(config_.beta2, static_cast<double>(t_));
  for (Slot& s : slots_) {
    Parameter& p = *s.param;
    if (config_.weight_decay != 0) p.value *= 1 - lr * config_.weight_decay;
    if (p.has_grad()) {
      s.m = config_.beta1 * s.m + (1 - config_.beta1) * p.grad;
      s.v = config_.beta2 * s.v + (1 - config_.beta2) * p.grad.cwiseAbs2();
    } else {
      s.m *= config_.beta1;
      s.v *= config_.beta2;
    }
    p.value.array() -= lr * (s.m.array() / bc1) / ((s.v.array() / bc2).sqrt() + config_.eps);
  }
}

double clip_grad_norm(ParameterSet& params, double max_norm) {
  if (!(max_norm > 0)) throw std::invalid_argument("clip_grad_norm: max_norm must be > 0");
  double sq = 0;
  for (const auto& p : params) {
    if (p->trainable && p->has_grad()) sq += p->grad.squaredNorm();
  }
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw NumericalError("clip_grad_norm: gradient norm is not finite");
  if (norm > max_norm) {
    const double factor = max_norm / norm;
    for (auto& p : params) {
      if (p->trainable && p->has_grad()) p->grad *= factor;
    }
  }
  return norm;
}

PassThroughGenerator::PassThroughGenerator() {
  weight_ = &params_.add("passthrough.weight", {1, 1, 1}, Mat::Zero(1, 1));
}

Var PassThroughGenerator::reconstruct(Graph& g, Var audio, const QuantizerMode&) const {
  return add(audio, pointwise_conv(audio, g.param(*weight_), Var{}));
}

SyntheticDataset::SyntheticDataset(std::uint64_t seed, double sample_rate, double min_seconds, double max_seconds)
    : rng_(seed), sample_rate_(sample_rate), min_seconds_(min_seconds), max_seconds_(max_seconds) {
  if (!(sample_rate > 0 && min_seconds > 0 && max_seconds >= min_seconds)) {
    throw std::invalid_argument("synthetic: bad rate or durations");
  }
}

Mat SyntheticDataset::make(Family family, Index length) {
  std::uniform_real_distribution<double> u(0, 1);
  std::normal_distribution<double> normal(0, 1);
  const double two_pi = 2 * std::numbers::pi;
  Mat x = Mat::Zero(1, length);
  switch (family) {
    case Family::Sines: {
      const double f0 = 80 + 400 * u(rng_);
      const double decay = 0.5 + 3 * u(rng_);
      const int overtones = 2 + static_cast<int>(4 * u(rng_));
      for (int k = 1; k <= overtones; ++k) {
        const double amp = 1.0 / k * (0.5 + 0.5 * u(rng_));
        const double phase = two_pi * u(rng_);
        if (f0 * k >= sample_rate_ / 2) break;
        for (Index t = 0; t < length; ++t) {
          const double time = static_cast<double>(t) / sample_rate_;
          x(0, t) += amp * std::exp(-decay * time) * std::sin(two_pi * f0 * k * time + phase);
        }
      }
      break;
    }
    case Family::Chirp: {
      const double f_start = 100 + 900 * u(rng_);
      const double f_end = 200 + 3000 * u(rng_);
      const double duration = static_cast<double>(length) / sample_rate_;
      const double slope = (f_end - f_start) / duration;
      for (Index t = 0; t < length; ++t) {
        const double time = static_cast<double>(t) / sample_rate_;
        x(0, t) = std::sin(two_pi * (f_start * time + 0.5 * slope * time * time));
      }
      break;
    }
    case Family::ModulatedNoise: {
      const double rate = 1 + 9 * u(rng_);
      for (Index t = 0; t < length; ++t) {
        const double time = static_cast<double>(t) / sample_rate_;
        x(0, t) = (0.55 + 0.45 * std::sin(two_pi * rate * time)) * normal(rng_);
      }
      break;
    }
  }
  const double peak = x.cwiseAbs().maxCoeff();
  if (peak > 0) x *= (0.3 + 0.6 * u(rng_)) / peak;
  return x;
}

Batch<double> SyntheticDataset::next_batch(Index batch_size) {
  std::uniform_real_distribution<double> u(min_seconds_, max_seconds_);
  const auto length = static_cast<Index>(std::llround(u(rng_) * sample_rate_));
  const auto family = static_cast<Family>(batches_ % 3);
  ++batches_;
  Batch<double> batch;
  for (Index i = 0; i < batch_size; ++i) batch.items.push_back(make(family, length));
  return batch;
}

Trainer::Trainer(Generator& generator, Discriminator& discriminator, const FeatureExtractor& extractor,
                 const TrainConfig& config)
    : generator_(&generator),
      discriminator_(&discriminator),
      extractor_(&extractor),
      config_(config),
      gen_opt_(generator.parameters(), AdamWConfig{config.beta1, config.beta2, config.eps, config.wd_codec}),
      disc_opt_(discriminator.parameters(), AdamWConfig{config.beta1, config.beta2, config.eps, config.wd_disc}),
      rng_(config.seed) {
  config_.validate();
}

namespace {

[[noreturn]] void report_non_finite(Graph& g, const char* what) {
  std::string where = "unknown node";
  if (auto v = g.first_non_finite()) where = std::string("node #") + std::to_string(v->id) + " (" + g.op_name(*v) + ")";
  throw NumericalError(std::string(what) + " is not finite; first non-finite value at " + where);
}

}  // namespace

LossReport Trainer::step(const Batch<double>& batch) {
  if (batch.size() < 1) throw std::invalid_argument("train: empty batch");
  const std::uint64_t step = step_;
  if (step > config_.total_steps) throw std::out_of_range("train: schedule already finished");

  LossReport report;
  report.lr = one_cycle_lr(step, config_.total_steps, config_);
  report.caps = config_.caps_at(step);
  std::bernoulli_distribution coin(0.5);
  report.quantized = !coin(rng_);
  std::uniform_real_distribution<double> unit(0, 1);
  QuantizerMode mode{!report.quantized, [this, unit]() mutable { return unit(rng_); }};

  ParameterSet& gen_params = generator_->parameters();
  ParameterSet& disc_params = discriminator_->parameters();
  gen_params.zero_grad();
  disc_params.zero_grad();

  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  std::vector<Mat> fakes;
  for (const Mat& x : batch.items) {
    Graph g;
    g.freeze(disc_params);
    Var x_hat = generator_->reconstruct(g, g.input(x), mode);
    fakes.push_back(x_hat.value());

    Graph ref(false);
    const DiscriminatorOutput real = discriminator_->forward(ref, ref.input(x));
    std::vector<std::vector<Mat>> real_features;
    for (const auto& layer_set : real.features) {
      real_features.emplace_back();
      for (const Var& f : layer_set) real_features.back().push_back(f.value());
    }
    const DiscriminatorOutput fake = discriminator_->forward(g, x_hat);

    const std::array<Var, 4> terms{loss_elem(x_hat, x), loss_spec(x_hat, x), loss_perceptual(x_hat, x, *extractor_),
                                   loss_adv(fake.logits, real_features, fake.features)};
    std::vector<Var> parts;
    for (std::size_t i = 0; i < terms.size(); ++i) {
      const double raw = terms[i].scalar();
      if (!std::isfinite(raw)) report_non_finite(g, "training loss");
      Var t = std::isfinite(report.caps[i]) ? clamp_loss(terms[i], report.caps[i]) : terms[i];
      t = scale(t, config_.weights[i]);
      report.raw[i] += raw * inv_batch;
      report.effective[i] += t.scalar() * inv_batch;
      parts.push_back(t);
    }
    Var total = add_scalars(parts);
    report.total += total.scalar() * inv_batch;
    g.backward(total, inv_batch);
  }
  report.grad_norm = clip_grad_norm(gen_params, config_.clip_codec);
  gen_opt_.step(report.lr);

  if (step % config_.disc_every == 0) {
    for (std::size_t i = 0; i < batch.items.size(); ++i) {
      Graph g;
      const DiscriminatorOutput real = discriminator_->forward(g, g.input(batch.items[i]));
      const DiscriminatorOutput fake = discriminator_->forward(g, g.input(fakes[i]));
      Var loss = loss_discriminator(real.logits, fake.logits);
      if (!std::isfinite(loss.scalar())) report_non_finite(g, "discriminator loss");
      report.disc_loss += loss.scalar() * inv_batch;
      g.backward(loss, inv_batch);
    }
    clip_grad_norm(disc_params, config_.clip_disc);
    disc_opt_.step(report.lr);
    report.disc_updated = true;
  }
  ++step_;
  return report;
}

std::string format_log_line(std::uint64_t step, const LossReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "step=%llu lr=%.9g le=%.9g ls=%.9g lp=%.9g ladv=%.9g coin=%c",
                static_cast<unsigned long long>(step), r.lr, r.raw[kElem], r.raw[kSpec], r.raw[kPerceptual],
                r.raw[kAdversarial], r.quantized ? 'q' : 'n');
  return buf;
}

}  // namespace l3ac
