#include "test_helpers.hpp"

#include "l3ac/autodiff.hpp"
#include "l3ac/grad_check.hpp"
#include "l3ac/snapshot.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace l3ac;
using testing::randn;

namespace {

// Direct quadruple loop over the padded input.
Mat conv_oracle(const Mat& x, const Mat& w, const Mat& b, Index k, const ConvOptions& o) {
  const Index span = o.dilation * (k - 1) + 1;
  Mat xp;
  if (o.padding == Padding::CausalReplicate) {
    xp.resize(x.rows(), x.cols() + span - 1);
    for (Index t = 0; t < xp.cols(); ++t) xp.col(t) = x.col(std::max<Index>(0, t - (span - 1)));
  } else if (o.padding == Padding::SameZero) {
    xp = Mat::Zero(x.rows(), x.cols() + span - 1);
    xp.middleCols((span - 1) / 2, x.cols()) = x;
  } else {
    xp = x;
  }
  const Index out_len = (xp.cols() - span) / o.stride + 1;
  const Index in_g = x.rows() / o.groups, out_g = w.rows() / o.groups;
  Mat y(w.rows(), out_len);
  for (Index oc = 0; oc < w.rows(); ++oc) {
    const Index grp = oc / out_g;
    for (Index t = 0; t < out_len; ++t) {
      double acc = b.size() ? b(oc, 0) : 0.0;
      for (Index tap = 0; tap < k; ++tap) {
        for (Index c = 0; c < in_g; ++c) {
          acc += w(oc, tap * in_g + c) * xp(grp * in_g + c, t * o.stride + tap * o.dilation);
        }
      }
      y(oc, t) = acc;
    }
  }
  return y;
}

}  // namespace

TEST_CASE("conv1d matches the brute-force oracle across geometries") {
  std::mt19937_64 rng(1);
  struct Geo {
    Index in, out, k, stride, dilation, groups;
    Padding pad;
  };
  const Geo geos[] = {{3, 4, 3, 1, 1, 1, Padding::CausalReplicate}, {4, 6, 5, 2, 1, 2, Padding::CausalReplicate},
                      {4, 4, 7, 1, 1, 4, Padding::CausalReplicate}, {2, 3, 3, 3, 2, 1, Padding::SameZero},
                      {3, 2, 4, 2, 1, 1, Padding::None},           {2, 2, 1, 1, 1, 1, Padding::None}};
  for (const Geo& g : geos) {
    const Mat x = randn(rng, g.in, 29);
    const Mat w = randn(rng, g.out, g.k * g.in / g.groups);
    const Mat b = randn(rng, g.out, 1);
    const ConvOptions o{g.stride, g.dilation, g.groups, g.pad};
    Graph gr(false);
    const Mat y = conv1d(gr.input(x), gr.input(w), gr.input(b), g.k, o).value();
    const Mat want = conv_oracle(x, w, b, g.k, o);
    REQUIRE(y.rows() == want.rows());
    REQUIRE(y.cols() == want.cols());
    CHECK(testing::max_abs_diff(y, want) < 1e-12);
  }
}

TEST_CASE("conv1d output length formula") {
  Graph g(false);
  const Mat x = Mat::Ones(1, 100);
  const Mat w = Mat::Ones(1, 4);
  // padded_len 100, dilation 2, k 4: floor((100 - 6 - 1) / 3) + 1 = 32
  const ConvOptions o{3, 2, 1, Padding::None};
  CHECK(conv1d(g.input(x), g.input(w), Var{}, 4, o).cols() == 32);
}

TEST_CASE("conv1d trivial cases") {
  Graph g(false);
  std::mt19937_64 rng(2);
  const Mat w = randn(rng, 5, 9);
  const Mat zero = Mat::Zero(3, 12);
  CHECK(conv1d(g.input(zero), g.input(w), g.input(Mat::Zero(5, 1)), 3, {}).value().isZero(0));
  const Mat x = randn(rng, 3, 12);
  const Mat eye = Mat::Identity(3, 3);
  CHECK(testing::max_abs_diff(pointwise_conv(g.input(x), g.input(eye), g.input(Mat::Zero(3, 1))).value(), x) == 0);

  Mat c(2, 4);
  c.row(0).setConstant(1);
  c.row(1).setConstant(2);
  Mat pw(2, 2);
  pw << 1, 1, 1, -1;
  const Mat y = pointwise_conv(g.input(c), g.input(pw), g.input(Mat::Zero(2, 1))).value();
  CHECK(y.row(0).isConstant(3));
  CHECK(y.row(1).isConstant(-1));
}

TEST_CASE("conv1d gradients against finite differences") {
  std::mt19937_64 rng(3);
  ParameterSet set;
  Parameter& w = set.add("w", {4, 2, 3}, randn(rng, 4, 6));
  Parameter& b = set.add("b", {4}, randn(rng, 4, 1));
  GradCheckOptions opt;
  opt.params = {&w, &b};
  const auto r = grad_check(
      [&](Graph& g, Var x) {
        return conv1d(x, g.param(w), g.param(b), 3, ConvOptions{2, 1, 1, Padding::CausalReplicate});
      },
      randn(rng, 2, 17), opt);
  CHECK(r.max_rel_error < 1e-6);
}

TEST_CASE("elementwise ops: values") {
  Graph g(false);
  Mat x(1, 4);
  x << -2.0, -0.5, 0.0, 1.5;
  const Mat ge = gelu(g.input(x)).value();
  for (Index i = 0; i < 4; ++i) {
    const double v = x(0, i);
    const double want = 0.5 * v * (1 + std::tanh(std::sqrt(2 / M_PI) * (v + 0.044715 * v * v * v)));
    CHECK(ge(0, i) == doctest::Approx(want).epsilon(1e-14));
  }
  Mat alpha(1, 1);
  alpha << 1.5;
  const Mat sn = snake(g.input(x), g.input(alpha)).value();
  for (Index i = 0; i < 4; ++i) {
    const double v = x(0, i);
    CHECK(sn(0, i) == doctest::Approx(v + std::pow(std::sin(1.5 * v), 2) / 1.5).epsilon(1e-14));
  }
  CHECK_THROWS_AS(snake(g.input(x), g.input(Mat::Zero(1, 1))), std::domain_error);
}

TEST_CASE("non-smooth conventions") {
  SUBCASE("abs has zero derivative at zero") {
    Graph g;
    Mat x(1, 3);
    x << -1, 0, 2;
    Var v = g.input(x, true);
    g.backward(sum_all(abs(v)));
    const Mat& d = g.grad(v);
    CHECK(d(0, 0) == -1);
    CHECK(d(0, 1) == 0);
    CHECK(d(0, 2) == 1);
  }
  SUBCASE("max-pool ties route to the earliest column") {
    Graph g;
    Mat x(1, 4);
    x << 1, 3, 3, 0;
    Var v = g.input(x, true);
    Var y = max_pool_causal(v, 2);
    CHECK(y.value()(0, 2) == 3);
    Mat sel = Mat::Zero(1, 4);
    sel(0, 2) = 1;  // only output column 2, whose window holds the tie
    g.backward(sum_all(mul(y, g.input(sel))));
    CHECK(g.grad(v)(0, 1) == 1);
    CHECK(g.grad(v)(0, 2) == 0);
  }
  SUBCASE("rounding is straight-through") {
    Graph g;
    Mat x(1, 4);
    x << -1.5, -0.4, 0.5, 2.49;
    Var v = g.input(x, true);
    Var r = round_straight_through(v);
    CHECK(r.value()(0, 0) == -1);  // floor(x + 1/2)
    CHECK(r.value()(0, 1) == 0);
    CHECK(r.value()(0, 2) == 1);
    CHECK(r.value()(0, 3) == 2);
    g.backward(sum_all(r));
    CHECK(g.grad(v).isOnes(0));
  }
}

TEST_CASE("normalizations have the expected statistics") {
  std::mt19937_64 rng(4);
  Graph g(false);
  const Mat x = randn(rng, 3, 200, 4.0).array() + 2.0;
  const Mat y = instance_norm(g.input(x), 1e-12).value();
  for (Index c = 0; c < 3; ++c) {
    CHECK(std::abs(y.row(c).mean()) < 1e-12);
    CHECK(y.row(c).squaredNorm() / 200.0 == doctest::Approx(1.0).epsilon(1e-9));
  }
  const Mat cn = channel_norm(g.input(x), g.input(Mat::Ones(3, 1)), g.input(Mat::Zero(3, 1)), 1e-12).value();
  for (Index t = 0; t < 200; t += 37) {
    CHECK(std::abs(cn.col(t).mean()) < 1e-12);
    CHECK(cn.col(t).squaredNorm() / 3.0 == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("pooling and upsampling match direct definitions") {
  std::mt19937_64 rng(5);
  Graph g(false);
  const Mat x = randn(rng, 2, 15);
  const Index w = 4;
  const Mat mx = max_pool_causal(g.input(x), w).value();
  const Mat av = avg_pool_causal(g.input(x), w).value();
  for (Index c = 0; c < 2; ++c) {
    for (Index t = 0; t < 15; ++t) {
      double m = -1e300, s = 0;
      for (Index j = t - w + 1; j <= t; ++j) {
        const double v = x(c, std::max<Index>(j, 0));
        m = std::max(m, v);
        s += v;
      }
      CHECK(mx(c, t) == m);
      CHECK(av(c, t) == doctest::Approx(s / w).epsilon(1e-14));
    }
  }
  const Mat up = linear_upsample(g.input(x), 3).value();
  REQUIRE(up.cols() == 45);
  CHECK(up(1, 3 * 4) == x(1, 4));
  CHECK(up(1, 3 * 4 + 1) == doctest::Approx(x(1, 4) + (x(1, 5) - x(1, 4)) / 3.0));
  CHECK(up(0, 44) == x(0, 14));  // last column held
}

TEST_CASE("clamp_loss branches") {
  Graph g;
  Mat l(1, 1);
  l << 0.5;
  Var a = g.input(l, true);
  Var c = clamp_loss(a, 1.0);
  CHECK(c.scalar() == 0.5);
  g.backward(c);
  CHECK(g.grad(a)(0, 0) == 1.0);

  Graph h;
  l << 4.0;
  Var b = h.input(l, true);
  Var d = clamp_loss(b, 1.0);
  CHECK(d.scalar() == 1.0);
  h.backward(d);
  CHECK(h.grad(b)(0, 0) == 0.25);

  Graph k;
  l << 2.0;
  CHECK(clamp_loss(k.input(l), 2.0).scalar() == 2.0);  // continuous at the boundary
  CHECK_THROWS_AS(clamp_loss(k.input(l), 0.0), std::invalid_argument);
}

TEST_CASE("frozen parameters and inference graphs") {
  ParameterSet set;
  Parameter& p = set.add("p", {1, 1}, Mat::Constant(1, 1, 2.0));
  Graph g;
  g.freeze(set);
  Var x = g.input(Mat::Constant(1, 1, 3.0), true);
  g.backward(mul(x, g.param(p)));
  CHECK_FALSE(p.has_grad());
  CHECK(g.grad(x)(0, 0) == 2.0);

  Graph inf(false);
  Var y = inf.input(Mat::Ones(1, 1), true);
  CHECK_THROWS(inf.backward(sum_all(y)));
}

TEST_CASE("first_non_finite names the offending node") {
  Graph g;
  Mat x(1, 2);
  x << 1.0, std::nan("");
  Var a = g.input(Mat::Ones(1, 2));
  Var b = add(a, g.input(x));
  auto bad = g.first_non_finite();
  REQUIRE(bad.has_value());
  CHECK(bad->id == 1);
  (void)b;
}

TEST_CASE("parameter snapshot round-trips byte-exactly") {
  std::mt19937_64 rng(6);
  ParameterSet set;
  set.add("a.weight", {2, 3, 4}, randn(rng, 2, 12));
  set.add("a.bias", {2}, randn(rng, 2, 1));
  std::ostringstream first;
  write_parameters(first, set);
  std::istringstream in(first.str());
  ParameterSet back = read_parameters(in);
  std::ostringstream second;
  write_parameters(second, back);
  CHECK(first.str() == second.str());
  CHECK(back.find("a.weight")->shape() == std::vector<Index>{2, 3, 4});

  std::string bad = first.str();
  bad[0] = 'X';
  std::istringstream bin(bad);
  CHECK_THROWS_AS(read_parameters(bin), FormatError);
  std::istringstream cut(first.str().substr(0, 30));
  CHECK_THROWS_AS(read_parameters(cut), FormatError);
}
