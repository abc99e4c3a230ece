#pragma once

// Short-time Fourier magnitudes of single-channel signals.
//
// Frames are not centered: frame j covers samples [j*hop, j*hop + window) and
// only frames that fit entirely are taken. The periodic Hann window is used.
// Output is bins x frames with bins = window/2 + 1.

#include "l3ac/autodiff.hpp"

namespace l3ac {

struct StftSpec {
  Index window = 1024;
  Index hop = 256;

  Index bins() const { return window / 2 + 1; }
  Index frames(Index length) const { return length < window ? 0 : (length - window) / hop + 1; }
};

/// Periodic Hann window: 0.5 - 0.5 cos(2 pi n / N).
Vec hann_window(Index n);

/// Magnitudes of a 1 x T signal.
Mat stft_magnitude(const Mat& x, const StftSpec& spec);
/// Differentiable magnitudes; the gradient at a zero-magnitude bin is 0.
Var stft_magnitude(Var x, const StftSpec& spec);

/// log10(max(s^2, floor)) elementwise; zero gradient where the floor is active.
Var log_power(Var s, double floor);

/// HTK-scale triangular filterbank, n_mels x (n_fft/2 + 1), unnormalized.
Mat mel_filterbank(Index n_mels, Index n_fft, double sample_rate, double fmin, double fmax);

}  // namespace l3ac
