#include "test_helpers.hpp"

#include "l3ac/fsq.hpp"
#include "l3ac/grad_check.hpp"

#include <doctest.h>

#include <cmath>

using namespace l3ac;
using testing::randn;

TEST_CASE("codebook size and bits per frame") {
  const FsqLevels l({7, 7, 7, 7, 7, 7});
  CHECK(l.codebook_size() == 117649);
  CHECK(l.bits_per_frame() == doctest::Approx(6 * std::log2(7.0)).epsilon(1e-15));
  CHECK(std::abs(l.bits_per_frame() - 16.84) < 0.01);
  CHECK_THROWS(FsqLevels({1, 7}));
  CHECK_THROWS(FsqLevels(std::vector<int>(9, 255)));  // 72 bits
}

TEST_CASE("quantize: center and saturation") {
  const FsqLevels l({7, 7, 7, 7, 7, 7});
  const FsqResult zero = fsq_quantize(Mat::Zero(6, 3), l);
  CHECK((zero.tokens.codes.array() == 3).all());
  CHECK(zero.z_hat.isZero(0));
  const FsqResult big = fsq_quantize(Mat::Constant(6, 2, 100.0), l);
  CHECK((big.tokens.codes.array() == 6).all());
  CHECK(big.z_hat.isConstant(3.0, 0));
  const FsqResult low = fsq_quantize(Mat::Constant(6, 2, -100.0), l);
  CHECK((low.tokens.codes.array() == 0).all());
  Mat bad = Mat::Zero(6, 1);
  bad(2, 0) = std::nan("");
  CHECK_THROWS_AS(fsq_quantize(bad, l), NumericalError);
}

TEST_CASE("even levels use all codes") {
  const FsqLevels l({8, 4});
  std::mt19937_64 rng(1);
  const FsqResult r = fsq_quantize(randn(rng, 2, 4000, 3.0), l);
  for (int c = 0; c < 8; ++c) CHECK((r.tokens.codes.col(0).array() == c).any());
  for (int c = 0; c < 4; ++c) CHECK((r.tokens.codes.col(1).array() == c).any());
  CHECK(r.tokens.codes.col(0).maxCoeff() == 7);
}

TEST_CASE("quantization is idempotent through the centers' preimage") {
  const FsqLevels l({7, 5, 8, 9, 2, 3});
  std::mt19937_64 rng(2);
  const FsqResult r = fsq_quantize(randn(rng, 6, 1000, 2.0), l);
  CHECK(fsq_quantize(fsq_preimage(r.tokens), l).tokens == r.tokens);
  // The preimage bounds back onto the same integer grid as z_hat.
  const Mat rounded = fsq_bound(fsq_preimage(r.tokens), l).unaryExpr([](double v) { return std::floor(v + 0.5); });
  CHECK(rounded == r.z_hat);
}

TEST_CASE("cell constancy") {
  const FsqLevels l({7, 7, 7});
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e-7, 1e-7);
  const Mat z = randn(rng, 3, 500, 1.5);
  Mat z2 = z;
  for (Index i = 0; i < z2.size(); ++i) z2.data()[i] += u(rng);
  const FsqResult a = fsq_quantize(z, l), b = fsq_quantize(z2, l);
  const Mat bound = fsq_bound(z, l);
  for (Index t = 0; t < z.cols(); ++t) {
    for (Index d = 0; d < 3; ++d) {
      const double frac = bound(d, t) + 0.5 - std::floor(bound(d, t) + 0.5);
      if (frac < 1e-5 || frac > 1 - 1e-5) continue;  // next to a cell edge
      CHECK(a.tokens.codes(t, d) == b.tokens.codes(t, d));
    }
  }
}

TEST_CASE("mixed-radix index") {
  const FsqLevels l({7, 7, 7, 7, 7, 7});
  const std::vector<int> zeros(6, 0), sixes(6, 6);
  CHECK(codes_to_index(zeros, l) == 0);
  CHECK(codes_to_index(sixes, l) == 117648);
  const FsqLevels mixed({9, 9, 9, 7, 7, 7});
  std::mt19937_64 rng(4);
  for (int i = 0; i < 10000; ++i) {
    std::vector<int> c(6);
    for (Index d = 0; d < 6; ++d) c[d] = static_cast<int>(rng() % mixed[d]);
    CHECK(index_to_codes(codes_to_index(c, mixed), mixed) == c);
  }
  CHECK_THROWS(index_to_codes(mixed.codebook_size(), mixed));
}

TEST_CASE("noise perturbation") {
  const FsqLevels l({7, 8});
  std::mt19937_64 rng(5);
  const Mat z = randn(rng, 2, 50000, 1.5);
  const Mat b = fsq_bound(z, l);
  SUBCASE("zero amplitude gives the bound") {
    Graph g;
    CHECK(fsq_noise(g.input(z), l, [] { return 0.5; }).value() == b);
  }
  SUBCASE("range and mean") {
    Graph g;
    std::uniform_real_distribution<double> u(0, 1);
    const Mat y = fsq_noise(g.input(z), l, [&] { return u(rng); }).value();
    const Mat d = y - b;
    CHECK(d.minCoeff() >= -0.5);
    CHECK(d.maxCoeff() < 0.5);
    const double sigma = std::sqrt(1.0 / 12.0 / static_cast<double>(d.size()));
    CHECK(std::abs(d.mean()) < 3 * sigma);
  }
  SUBCASE("not allowed at inference") {
    Graph g(false);
    CHECK_THROWS_AS(fsq_noise(g.input(z), l, [] { return 0.5; }), std::logic_error);
  }
}

TEST_CASE("straight-through gradient equals the bound's gradient") {
  const FsqLevels l({7, 5, 8});
  std::mt19937_64 rng(6);
  const auto r = grad_check([&](Graph&, Var v) { return fsq_quantize(v, l); },
                            [&](Graph&, Var v) { return fsq_bound(v, l); }, randn(rng, 3, 20));
  CHECK(r.max_rel_error < 1e-6);
}

TEST_CASE("token validation") {
  FrameTokens t;
  t.levels = FsqLevels({3, 3});
  t.codes.resize(1, 2);
  t.codes << 1, 3;
  CHECK_THROWS_AS(t.validate(), std::out_of_range);
}
