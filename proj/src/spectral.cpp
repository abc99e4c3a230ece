#include "l3ac/spectral.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <numbers>

namespace l3ac {

namespace {

using Complex = std::complex<double>;

void require_mono(const Mat& x) {
  if (x.rows() != 1) throw ShapeError("stft: expected a single-channel signal");
}

void require_spec(const StftSpec& spec) {
  if (spec.window < 2 || spec.hop < 1) throw std::invalid_argument("stft: bad window or hop");
}

/// One-sided spectra of all frames, bins x frames.
Eigen::MatrixXcd stft_complex(const Mat& x, const StftSpec& spec) {
  const Vec w = hann_window(spec.window);
  const Index n_frames = spec.frames(x.cols());
  Eigen::MatrixXcd out(spec.bins(), n_frames);
  Eigen::FFT<double> fft;
  std::vector<double> frame(static_cast<std::size_t>(spec.window));
  std::vector<Complex> spectrum;
  for (Index j = 0; j < n_frames; ++j) {
    for (Index n = 0; n < spec.window; ++n) frame[static_cast<std::size_t>(n)] = x(0, j * spec.hop + n) * w(n);
    fft.fwd(spectrum, frame);
    for (Index f = 0; f < spec.bins(); ++f) out(f, j) = spectrum[static_cast<std::size_t>(f)];
  }
  return out;
}

}  // namespace

Vec hann_window(Index n) {
  Vec w(n);
  for (Index i = 0; i < n; ++i) w(i) = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  return w;
}

Mat stft_magnitude(const Mat& x, const StftSpec& spec) {
  require_mono(x);
  require_spec(spec);
  return stft_complex(x, spec).cwiseAbs();
}

Var stft_magnitude(Var x, const StftSpec& spec) {
  require_mono(x.value());
  require_spec(spec);
  Eigen::MatrixXcd X = stft_complex(x.value(), spec);
  Mat S = X.cwiseAbs();
  return x.graph->make("stft_magnitude", S, {x}, [x, spec, X = std::move(X), S](Graph& g, const Mat& gs) {
    // dL/dx[n] = w[n] * Re(sum_f (g_f / S_f) X_f e^{+2 pi i f n / N}) over the one-sided bins.
    const Vec w = hann_window(spec.window);
    Mat dx = Mat::Zero(1, x.cols());
    Eigen::FFT<double> fft;
    fft.SetFlag(Eigen::FFT<double>::Unscaled);
    std::vector<Complex> Z(static_cast<std::size_t>(spec.window));
    std::vector<Complex> time;
    for (Index j = 0; j < S.cols(); ++j) {
      std::fill(Z.begin(), Z.end(), Complex(0, 0));
      for (Index f = 0; f < spec.bins(); ++f) {
        if (S(f, j) > 0) Z[static_cast<std::size_t>(f)] = X(f, j) * (gs(f, j) / S(f, j));
      }
      fft.inv(time, Z);
      for (Index n = 0; n < spec.window; ++n) dx(0, j * spec.hop + n) += w(n) * time[static_cast<std::size_t>(n)].real();
    }
    g.accumulate(x, dx);
  });
}

Var log_power(Var s, double floor) {
  if (!(floor > 0)) throw std::invalid_argument("log_power: floor must be > 0");
  Mat y = s.value().unaryExpr([floor](double v) { return std::log10(std::max(v * v, floor)); });
  return s.graph->make("log_power", std::move(y), {s}, [s, floor](Graph& g, const Mat& gy) {
    const Mat& sv = s.value();
    Mat ds(sv.rows(), sv.cols());
    for (Index i = 0; i < sv.size(); ++i) {
      const double v = sv(i);
      ds(i) = v * v > floor ? gy(i) * 2.0 / (v * std::numbers::ln10) : 0.0;
    }
    g.accumulate(s, ds);
  });
}

Mat mel_filterbank(Index n_mels, Index n_fft, double sample_rate, double fmin, double fmax) {
  if (n_mels < 1 || n_fft < 2 || !(fmax > fmin) || fmin < 0 || fmax > sample_rate / 2) {
    throw std::invalid_argument("mel_filterbank: bad parameters");
  }
  auto to_mel = [](double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); };
  auto to_hz = [](double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); };
  const Index bins = n_fft / 2 + 1;
  Vec edges(n_mels + 2);
  const double m0 = to_mel(fmin);
  const double m1 = to_mel(fmax);
  for (Index i = 0; i < edges.size(); ++i) edges(i) = to_hz(m0 + (m1 - m0) * static_cast<double>(i) / static_cast<double>(n_mels + 1));
  Mat fb = Mat::Zero(n_mels, bins);
  for (Index m = 0; m < n_mels; ++m) {
    const double lo = edges(m), mid = edges(m + 1), hi = edges(m + 2);
    for (Index f = 0; f < bins; ++f) {
      const double hz = static_cast<double>(f) * sample_rate / static_cast<double>(n_fft);
      const double up = (hz - lo) / (mid - lo);
      const double down = (hi - hz) / (hi - mid);
      fb(m, f) = std::max(0.0, std::min(up, down));
    }
  }
  return fb;
}

}  // namespace l3ac
