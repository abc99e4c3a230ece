#include "test_helpers.hpp"

#include "l3ac/grad_check.hpp"
#include "l3ac/losses.hpp"

#include <doctest.h>

#include <cmath>
#include <complex>

using namespace l3ac;
using testing::randn;

namespace {

// |DFT| of each Hann-windowed frame, summed directly.
Mat dft_magnitude(const Mat& x, Index window, Index hop) {
  const Index frames = x.cols() < window ? 0 : (x.cols() - window) / hop + 1;
  Mat s(window / 2 + 1, frames);
  for (Index f = 0; f < frames; ++f) {
    for (Index k = 0; k <= window / 2; ++k) {
      std::complex<double> acc = 0;
      for (Index n = 0; n < window; ++n) {
        const double w = 0.5 - 0.5 * std::cos(2 * M_PI * double(n) / double(window));
        acc += w * x(0, f * hop + n) * std::polar(1.0, -2 * M_PI * double(k * n) / double(window));
      }
      s(k, f) = std::abs(acc);
    }
  }
  return s;
}

double spec_oracle(const Mat& x, const Mat& y, const std::vector<int>& exps) {
  double total = 0;
  int used = 0;
  for (int e : exps) {
    const Index w = Index{1} << e;
    if (w > x.cols()) continue;
    const Mat a = dft_magnitude(x, w, w / 4), b = dft_magnitude(y, w, w / 4);
    auto lp = [](double v) { return std::log10(std::max(v * v, 1e-10)); };
    total += (a - b).cwiseAbs().mean() + (a.unaryExpr(lp) - b.unaryExpr(lp)).cwiseAbs().mean();
    ++used;
  }
  return total / used;
}

double htk(double hz) { return 2595 * std::log10(1 + hz / 700); }

Mat log_mel_oracle(const Mat& x) {
  const Mat s = dft_magnitude(x, 1024, 256);
  Mat out(80, s.cols());
  const double top = htk(8000);
  for (Index m = 0; m < 80; ++m) {
    auto edge = [&](Index i) { return 700 * (std::pow(10, top * double(i) / 81 / 2595) - 1); };
    const double lo = edge(m), mid = edge(m + 1), hi = edge(m + 2);
    for (Index f = 0; f < s.cols(); ++f) {
      double e = 0;
      for (Index k = 0; k <= 512; ++k) {
        const double hz = double(k) * 16000 / 1024;
        double w = 0;
        if (hz > lo && hz <= mid) w = (hz - lo) / (mid - lo);
        if (hz > mid && hz < hi) w = (hi - hz) / (hi - mid);
        e += w * s(k, f);
      }
      out(m, f) = std::log10(std::max(e, 1e-5));
    }
  }
  return out;
}

Mat sine(Index n, double freq, double amp = 0.5) {
  Mat x(1, n);
  for (Index t = 0; t < n; ++t) x(0, t) = amp * std::sin(2 * M_PI * freq * double(t) / 16000);
  return x;
}

}  // namespace

TEST_CASE("STFT magnitudes match the direct DFT") {
  std::mt19937_64 rng(1);
  const Mat x = randn(rng, 1, 700);
  const StftSpec s{128, 32};
  CHECK(testing::max_abs_diff(stft_magnitude(x, s), dft_magnitude(x, 128, 32)) < 1e-10);
  CHECK(stft_magnitude(x, s).cols() == (700 - 128) / 32 + 1);
  const Vec w = hann_window(8);
  CHECK(w(0) == 0);
  CHECK(w(4) == doctest::Approx(1.0));
}

TEST_CASE("loss_elem") {
  std::mt19937_64 rng(2);
  Graph g(false);
  const Mat x = randn(rng, 1, 300), y = randn(rng, 1, 300);
  CHECK(loss_elem(g.input(x), x).scalar() == 0);
  CHECK(loss_elem(g.input(Mat::Constant(1, 50, 0.5)), Mat::Zero(1, 50)).scalar() == doctest::Approx(0.5));
  double direct = 0;
  for (Index i = 0; i < 300; ++i) direct += std::abs(x(0, i) - y(0, i));
  CHECK(std::abs(loss_elem(g.input(y), x).scalar() - direct / 300) < 1e-12);
  CHECK_THROWS(loss_elem(g.input(y), Mat::Zero(1, 10)));
}

TEST_CASE("loss_spec") {
  std::mt19937_64 rng(3);
  const Mat x = randn(rng, 1, 2500, 0.3), y = randn(rng, 1, 2500, 0.3);
  CHECK(loss_spec(x, x) == 0);
  CHECK(loss_spec(x, y) == loss_spec(y, x));
  SUBCASE("single scale, sine against zeros") {
    const Mat s = sine(64, 1000);
    CHECK(std::abs(loss_spec(s, Mat::Zero(1, 64), SpectralScaleSet{{5}}) - spec_oracle(s, Mat::Zero(1, 64), {5})) < 1e-8);
  }
  SUBCASE("all scales against the oracle") {
    CHECK(std::abs(loss_spec(x, y) - spec_oracle(x, y, {5, 6, 7, 8, 9, 10, 11})) < 1e-8);
  }
  SUBCASE("scales longer than the signal are dropped") {
    const Mat a = x.leftCols(600), b = y.leftCols(600);
    CHECK(std::abs(loss_spec(a, b) - spec_oracle(a, b, {5, 6, 7, 8, 9})) < 1e-8);
    CHECK_THROWS(loss_spec(Mat(x.leftCols(20)), Mat(y.leftCols(20))));
  }
  SUBCASE("decreases along the path from noise to the target") {
    const Mat target = sine(4096, 440) + sine(4096, 1250, 0.2);
    const Mat noise = randn(rng, 1, 4096, 0.3);
    double prev = INFINITY;
    for (int i = 0; i <= 10; ++i) {
      const double a = i / 10.0;
      const double l = loss_spec(target, Mat((1 - a) * noise + a * target));
      CHECK(l < prev);
      prev = l;
    }
    CHECK(prev == 0);
  }
  SUBCASE("gradient") {
    const Mat t = randn(rng, 1, 96, 0.5);
    GradCheckOptions opt;
    opt.floor = 1e-3;
    const auto r =
        grad_check([&](Graph&, Var v) { return loss_spec(v, t, SpectralScaleSet{{5, 6}}); }, randn(rng, 1, 96, 0.5), opt);
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("log_power floor blocks the gradient") {
  Graph g;
  Mat s(1, 2);
  s << 1e-6, 2.0;
  Var v = g.input(s, true);
  Var y = log_power(v, 1e-10);
  CHECK(y.value()(0, 0) == doctest::Approx(-10));
  CHECK(y.value()(0, 1) == doctest::Approx(std::log10(4.0)));
  g.backward(sum_all(y));
  CHECK(g.grad(v)(0, 0) == 0);
  CHECK(g.grad(v)(0, 1) == doctest::Approx(2 / (2.0 * std::log(10.0))));
}

TEST_CASE("perceptual loss") {
  std::mt19937_64 rng(4);
  SurrogateExtractor ex;
  const Mat a = randn(rng, 1, 2048, 0.3), b = randn(rng, 1, 2048, 0.3), c = randn(rng, 1, 2048, 0.3);
  auto lp = [&](const Mat& x, const Mat& y) {
    Graph g(false);
    return loss_perceptual(g.input(y), x, ex).scalar();
  };
  CHECK(lp(a, a) == 0);
  CHECK(lp(a, b) > 0);
  CHECK(lp(a, c) <= lp(a, b) + lp(b, c) + 1e-12);
  Graph g(false);
  const Mat fa = ex.features(g, g.input(a)).value(), fb = ex.features(g, g.input(b)).value();
  CHECK(std::abs(lp(a, b) - (fa - fb).norm()) < 1e-10);
}

TEST_CASE("adversarial and discriminator losses") {
  std::mt19937_64 rng(5);
  Graph g(false);
  SUBCASE("perfect fool") {
    const Var ones = g.input(Mat::Ones(1, 10));
    const Mat feat = randn(rng, 3, 10);
    CHECK(loss_adv({ones}, {{feat}}, {{g.input(feat)}}).scalar() == 0);
  }
  SUBCASE("zero output") {
    const Mat feat = randn(rng, 3, 10);
    CHECK(loss_adv({g.input(Mat::Zero(1, 16))}, {{feat}}, {{g.input(feat)}}).scalar() == doctest::Approx(4.0));
  }
  SUBCASE("random case against direct summation") {
    std::vector<Var> logits;
    std::vector<std::vector<Mat>> real;
    std::vector<std::vector<Var>> fake;
    double want = 0;
    for (int k = 0; k < 3; ++k) {
      const Mat d = randn(rng, 1, 12 + k);
      logits.push_back(g.input(d));
      want += (Mat::Ones(1, d.cols()) - d).norm();
      real.emplace_back();
      fake.emplace_back();
      for (int l = 0; l < 4; ++l) {
        const Mat r = randn(rng, 2, 9), f = randn(rng, 2, 9);
        real.back().push_back(r);
        fake.back().push_back(g.input(f));
        want += 2 * (r - f).cwiseAbs().mean();
      }
    }
    CHECK(std::abs(loss_adv(logits, real, fake).scalar() - want) < 1e-10);
    CHECK_THROWS(loss_adv(logits, real, {fake[0]}));
  }
  SUBCASE("least-squares discriminator objective") {
    const Mat r = randn(rng, 1, 7), f = randn(rng, 1, 7);
    const double want = (r.array() - 1).square().mean() + f.array().square().mean();
    CHECK(std::abs(loss_discriminator({g.input(r)}, {g.input(f)}).scalar() - want) < 1e-12);
  }
}

TEST_CASE("SDR") {
  std::mt19937_64 rng(6);
  const Mat x = randn(rng, 1, 1000), y = randn(rng, 1, 1000);
  CHECK(std::abs(metric_sdr(x, Mat(x / 2)) - 10 * std::log10(4.0)) < 1e-12);
  CHECK(std::abs(metric_sdr(x, Mat(x / 2)) - 6.02) < 0.01);
  CHECK(std::abs(metric_sdr(x, Mat::Zero(1, 1000))) < 1e-12);
  CHECK(std::isinf(metric_sdr(x, x)));
  CHECK(std::abs(metric_sdr(x, y) - 10 * std::log10(x.squaredNorm() / (x - y).squaredNorm())) < 1e-10);
  CHECK_THROWS(metric_sdr(Mat::Zero(1, 10), y.leftCols(10)));
}

TEST_CASE("mel distance") {
  std::mt19937_64 rng(7);
  const Mat x = sine(4000, 300) + randn(rng, 1, 4000, 0.05);
  const Mat y = sine(4000, 310) + randn(rng, 1, 4000, 0.05);
  CHECK(metric_mel(x, x) == 0);
  CHECK(metric_mel(x, y) == metric_mel(y, x));
  CHECK(std::abs(metric_mel(x, y) - (log_mel_oracle(x) - log_mel_oracle(y)).cwiseAbs().mean()) < 1e-8);
  CHECK_THROWS(metric_mel(Mat(x.leftCols(500)), Mat(y.leftCols(500))));
  const Mat fb = mel_filterbank(80, 1024, 16000, 0, 8000);
  CHECK(fb.rows() == 80);
  CHECK(fb.cols() == 513);
  CHECK(fb.maxCoeff() <= 1.0);
  CHECK((fb.array() >= 0).all());
}
