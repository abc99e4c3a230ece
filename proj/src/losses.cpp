#include "l3ac/losses.hpp"

#include <cmath>
#include <limits>

namespace l3ac {

namespace {

void require_pair(const Mat& a, const Mat& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError(std::string(what) + ": shape mismatch");
}

/// mean((a - target)^2)
Var mean_square_diff(Var a, const Mat& target) {
  require_pair(a.value(), target, "mean_square_diff");
  const Mat d = a.value() - target;
  const double n = static_cast<double>(d.size());
  Mat y(1, 1);
  y(0, 0) = d.squaredNorm() / n;
  return a.graph->make("mean_square_diff", std::move(y), {a}, [a, d, n](Graph& g, const Mat& gy) {
    g.accumulate(a, d * (2.0 * gy(0, 0) / n));
  });
}

}  // namespace

std::vector<StftSpec> SpectralScaleSet::scales() const {
  std::vector<StftSpec> out;
  for (int e : exponents) {
    if (e < 2 || e > 20) throw std::invalid_argument("spectral scale exponent out of range");
    const Index window = Index{1} << e;
    out.push_back(StftSpec{window, window / 4});
  }
  return out;
}

std::vector<StftSpec> SpectralScaleSet::fitting(Index length) const {
  std::vector<StftSpec> out;
  for (const StftSpec& s : scales()) {
    if (s.window <= length) out.push_back(s);
  }
  if (out.empty()) throw std::invalid_argument("loss_spec: signal shorter than the smallest window");
  return out;
}

Var loss_elem(Var x_hat, const Mat& x) {
  require_pair(x_hat.value(), x, "loss_elem");
  return mean_abs_diff(x_hat, x);
}

Var loss_spec(Var x_hat, const Mat& x, const SpectralScaleSet& scales) {
  require_pair(x_hat.value(), x, "loss_spec");
  const std::vector<StftSpec> specs = scales.fitting(x.cols());
  std::vector<Var> terms;
  for (const StftSpec& s : specs) {
    const Mat S = stft_magnitude(x, s);
    const Mat logS = S.unaryExpr([](double v) { return std::log10(std::max(v * v, kLogPowerFloor)); });
    Var S_hat = stft_magnitude(x_hat, s);
    terms.push_back(mean_abs_diff(S_hat, S));
    terms.push_back(mean_abs_diff(log_power(S_hat, kLogPowerFloor), logS));
  }
  return scale(add_scalars(terms), 1.0 / static_cast<double>(specs.size()));
}

double loss_spec(const Mat& x, const Mat& x_hat, const SpectralScaleSet& scales) {
  Graph g(false);
  return loss_spec(g.input(x_hat), x, scales).scalar();
}

SurrogateExtractor::SurrogateExtractor(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ParamBuilder pb(params_, rng, "perceptual");
  const Index widths[] = {1, 16, 32, 32, 32};
  const Index kernels[] = {8, 8, 4, 4};
  const Index strides[] = {4, 4, 2, 2};
  for (int i = 0; i < 4; ++i) {
    layers_.emplace_back(pb, "conv" + std::to_string(i), widths[i], widths[i + 1], kernels[i],
                         ConvOptions{strides[i], 1, 1, Padding::CausalReplicate});
  }
  for (auto& p : params_) p->trainable = false;
}

Var SurrogateExtractor::features(Graph& g, Var x) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    x = layers_[i].forward(g, x);
    if (i + 1 < layers_.size()) x = leaky_relu(x, 0.2);
  }
  return x;
}

Var loss_perceptual(Var x_hat, const Mat& x, const FeatureExtractor& extractor) {
  require_pair(x_hat.value(), x, "loss_perceptual");
  Graph& g = *x_hat.graph;
  Graph ref(false);
  const Mat target = extractor.features(ref, ref.input(x)).value();
  Var f = extractor.features(g, x_hat);
  if (f.rows() != target.rows() || f.cols() != target.cols()) throw ShapeError("loss_perceptual: feature shape mismatch");
  return l2_distance(f, target);
}

Var loss_adv(const std::vector<Var>& fake_logits, const std::vector<std::vector<Mat>>& real_features,
             const std::vector<std::vector<Var>>& fake_features) {
  if (fake_logits.empty()) throw std::invalid_argument("loss_adv: no discriminator scales");
  if (real_features.size() != fake_logits.size() || fake_features.size() != fake_logits.size()) {
    throw ShapeError("loss_adv: scale count mismatch");
  }
  std::vector<Var> terms;
  for (std::size_t k = 0; k < fake_logits.size(); ++k) {
    const Var& d = fake_logits[k];
    terms.push_back(l2_distance(d, Mat::Ones(d.rows(), d.cols())));
  }
  std::vector<Var> matching;
  for (std::size_t k = 0; k < fake_logits.size(); ++k) {
    if (real_features[k].size() != fake_features[k].size()) throw ShapeError("loss_adv: layer count mismatch");
    for (std::size_t l = 0; l < real_features[k].size(); ++l) {
      matching.push_back(mean_abs_diff(fake_features[k][l], real_features[k][l]));
    }
  }
  if (!matching.empty()) terms.push_back(scale(add_scalars(matching), 2.0));
  return add_scalars(terms);
}

Var loss_discriminator(const std::vector<Var>& real_logits, const std::vector<Var>& fake_logits) {
  if (real_logits.size() != fake_logits.size() || real_logits.empty()) throw ShapeError("loss_discriminator: scale count");
  std::vector<Var> terms;
  for (std::size_t k = 0; k < real_logits.size(); ++k) {
    const Var& r = real_logits[k];
    const Var& f = fake_logits[k];
    terms.push_back(mean_square_diff(r, Mat::Ones(r.rows(), r.cols())));
    terms.push_back(mean_square_diff(f, Mat::Zero(f.rows(), f.cols())));
  }
  return add_scalars(terms);
}

double metric_sdr(const Mat& x, const Mat& x_hat) {
  require_pair(x, x_hat, "metric_sdr");
  const double ref = x.squaredNorm();
  if (ref == 0) throw std::invalid_argument("metric_sdr: zero reference signal");
  const double err = (x - x_hat).squaredNorm();
  if (err == 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(ref / err);
}

double metric_mel(const Mat& x, const Mat& x_hat, const MelSpec& spec) {
  require_pair(x, x_hat, "metric_mel");
  const StftSpec stft{spec.window, spec.hop};
  if (stft.frames(x.cols()) == 0) throw std::invalid_argument("metric_mel: signal shorter than the mel window");
  const Mat fb = mel_filterbank(spec.n_mels, spec.window, spec.sample_rate, spec.fmin, spec.fmax);
  auto log_mel = [&](const Mat& s) {
    return (fb * stft_magnitude(s, stft)).unaryExpr([&](double v) { return std::log10(std::max(v, spec.floor)); }).eval();
  };
  return (log_mel(x) - log_mel(x_hat)).cwiseAbs().mean();
}

}  // namespace l3ac
