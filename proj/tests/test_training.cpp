#include "test_helpers.hpp"

#include "l3ac/training.hpp"

#include <doctest.h>

#include <cmath>
#include <regex>
#include <sstream>

using namespace l3ac;
using testing::randn;

namespace {

std::string bytes_of(const ParameterSet& p) {
  std::ostringstream s;
  write_parameters(s, p);
  return s.str();
}

Batch<double> one_clip(std::uint64_t seed, Index n = 2048) {
  SyntheticDataset d(seed, 16000, 1, 1);
  Batch<double> b;
  b.items.push_back(d.make(SyntheticDataset::Family::Sines, n));
  return b;
}

}  // namespace

TEST_CASE("one-cycle learning rate") {
  TrainConfig c;
  CHECK(one_cycle_lr(0, 2000, c) == 5e-5);
  CHECK(one_cycle_lr(600, 2000, c) == 5e-4);
  CHECK(one_cycle_lr(2000, 2000, c) == 5e-6);
  CHECK(one_cycle_lr(0, 7, c) == 5e-5);
  CHECK(one_cycle_lr(7, 7, c) == 5e-6);
  double prev = 0;
  for (std::uint64_t s = 0; s <= 600; ++s) {
    const double lr = one_cycle_lr(s, 2000, c);
    CHECK(lr >= prev);
    prev = lr;
  }
  for (std::uint64_t s = 601; s <= 2000; ++s) {
    const double lr = one_cycle_lr(s, 2000, c);
    CHECK(lr <= prev);
    prev = lr;
  }
  CHECK_THROWS(one_cycle_lr(2001, 2000, c));
}

TEST_CASE("AdamW") {
  SUBCASE("zero gradient, no decay") {
    ParameterSet p;
    Parameter& w = p.add("w", {3}, Mat::Constant(3, 1, 0.7));
    w.ensure_grad().setZero();
    AdamW opt(p, AdamWConfig{});
    opt.step(1e-3);
    CHECK(w.value.isConstant(0.7, 0));
  }
  SUBCASE("single step closed form") {
    ParameterSet p;
    Parameter& w = p.add("w", {1}, Mat::Constant(1, 1, 2.0));
    w.ensure_grad().setConstant(1.0);
    AdamW opt(p, AdamWConfig{});
    opt.step(0.01);
    // m^ = 1, v^ = 1 after bias correction
    CHECK(std::abs(w.value(0, 0) - (2.0 - 0.01 / (1.0 + 1e-8))) < 1e-12);
  }
  SUBCASE("decoupled decay alone") {
    ParameterSet p;
    Parameter& w = p.add("w", {2}, Mat::Constant(2, 1, 3.0));
    w.ensure_grad().setZero();
    AdamW opt(p, AdamWConfig{0.9, 0.999, 1e-8, 0.1});
    opt.step(0.01);
    CHECK(std::abs(w.value(0, 0) - 3.0 * (1 - 0.01 * 0.1)) < 1e-15);
  }
  SUBCASE("non-finite gradient") {
    ParameterSet p;
    Parameter& w = p.add("w", {1}, Mat::Zero(1, 1));
    w.ensure_grad().setConstant(std::nan(""));
    AdamW opt(p, AdamWConfig{});
    CHECK_THROWS_AS(opt.step(0.1), NumericalError);
  }
}

TEST_CASE("gradient clipping") {
  ParameterSet p;
  Parameter& a = p.add("a", {2}, Mat::Zero(2, 1));
  auto set_grad = [&](double x, double y) {
    a.ensure_grad();
    a.grad << x, y;
  };
  set_grad(3, 4);
  CHECK(clip_grad_norm(p, 10) == 5);
  CHECK(a.grad(0, 0) == 3);
  set_grad(12, 16);
  CHECK(clip_grad_norm(p, 10) == 20);
  CHECK(std::abs(a.grad.norm() - 10) < 1e-9);
  CHECK(a.grad(0, 0) == doctest::Approx(6));

  std::mt19937_64 rng(1);
  ParameterSet q;
  Parameter& b = q.add("b", {5, 3}, Mat::Zero(5, 3));
  Parameter& c = q.add("c", {4}, Mat::Zero(4, 1));
  for (int i = 0; i < 1000; ++i) {
    b.grad = randn(rng, 5, 3, 10);
    c.grad = randn(rng, 4, 1, 10);
    clip_grad_norm(q, 7.5);
    CHECK(std::sqrt(b.grad.squaredNorm() + c.grad.squaredNorm()) <= 7.5 * (1 + 1e-12));
  }
  set_grad(std::nan(""), 1);
  CHECK_THROWS_AS(clip_grad_norm(p, 1), NumericalError);
}

TEST_CASE("perfect reconstruction stub") {
  PassThroughGenerator gen;
  Discriminator disc(DiscriminatorConfig{4, 1});
  SurrogateExtractor ex;
  TrainConfig cfg;
  cfg.total_steps = 4;
  cfg.weights = {1, 1, 1, 0};
  Trainer t(gen, disc, ex, cfg);
  const Batch<double> b = one_clip(1);
  for (int s = 0; s <= 4; ++s) {
    const LossReport r = t.step(b);
    CHECK(r.raw[kElem] == 0);
    CHECK(r.raw[kSpec] == 0);
    CHECK(r.raw[kPerceptual] == 0);
    CHECK(gen.weight().value(0, 0) == 0);
  }

  PassThroughGenerator moved;
  Discriminator d2(DiscriminatorConfig{4, 1});
  TrainConfig with_adv;
  with_adv.total_steps = 4;
  Trainer t2(moved, d2, ex, with_adv);
  t2.step(b);
  CHECK(moved.weight().value(0, 0) != 0);
}

TEST_CASE("discriminator schedule, clamp caps and LR trace") {
  PassThroughGenerator gen;
  gen.weight().value(0, 0) = -0.5;  // lossy, so every term is active
  Discriminator disc(DiscriminatorConfig{4, 2});
  SurrogateExtractor ex;
  TrainConfig cfg;
  cfg.total_steps = 12;
  cfg.disc_every = 3;
  cfg.early_caps = {kNoCap, kNoCap, 1e-3, 1e-3};
  cfg.late_caps = {1e-3, 1e-3, 100, 100};
  Trainer t(gen, disc, ex, cfg);
  const Batch<double> b = one_clip(2);
  std::string before = bytes_of(disc.parameters());
  for (std::uint64_t s = 0; s <= 12; ++s) {
    const LossReport r = t.step(b);
    const std::string after = bytes_of(disc.parameters());
    CHECK(r.disc_updated == (s % 3 == 0));
    CHECK((after != before) == (s % 3 == 0));
    before = after;
    CHECK(r.lr == one_cycle_lr(s, 12, cfg));
    for (int i = 0; i < 4; ++i) CHECK(r.effective[i] <= r.caps[i] * (1 + 1e-12));
    const bool early = static_cast<double>(s) < 0.2 * 12;
    CHECK(r.caps[kPerceptual] == (early ? 1e-3 : 100));
  }
  CHECK_THROWS(t.step(b));
}

TEST_CASE("clamp off gives no caps") {
  TrainConfig cfg;
  cfg.clamp = false;
  for (double c : cfg.caps_at(0)) CHECK(std::isinf(c));
  for (double c : cfg.caps_at(1999)) CHECK(std::isinf(c));
  cfg.clamp = true;
  CHECK(cfg.caps_at(0)[kPerceptual] == 10);
  CHECK(cfg.caps_at(400)[kElem] == 5);
}

TEST_CASE("training is reproducible and logs the expected format") {
  auto run = [] {
    CodecModel m(preset("0.75", true));
    Discriminator d(DiscriminatorConfig{4, 1});
    SurrogateExtractor ex;
    TrainConfig cfg;
    cfg.total_steps = 2;
    Trainer t(m, d, ex, cfg);
    const Batch<double> b = one_clip(3, 2160);
    std::string log;
    for (int s = 0; s <= 2; ++s) log += format_log_line(s, t.step(b)) + "\n";
    return log;
  };
  const std::string a = run();
  CHECK(a == run());
  const std::regex line(R"(step=\d+ lr=\S+ le=\S+ ls=\S+ lp=\S+ ladv=\S+ coin=[qn])");
  std::istringstream in(a);
  for (std::string l; std::getline(in, l);) CHECK(std::regex_match(l, line));
}

TEST_CASE("non-finite loss names a node") {
  PassThroughGenerator gen;
  gen.weight().value(0, 0) = std::nan("");
  Discriminator disc(DiscriminatorConfig{4, 1});
  SurrogateExtractor ex;
  Trainer t(gen, disc, ex, TrainConfig{});
  try {
    t.step(one_clip(4));
    FAIL("expected a numerical error");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("node #") != std::string::npos);
  }
}

TEST_CASE("synthetic dataset") {
  SyntheticDataset a(5), b(5);
  for (int i = 0; i < 6; ++i) {
    const Batch<double> x = a.next_batch(2), y = b.next_batch(2);
    CHECK(x.items[0] == y.items[0]);
    CHECK(x.length() >= 16000);
    CHECK(x.length() <= 32000);
    for (const Mat& m : x.items) {
      const double peak = m.cwiseAbs().maxCoeff();
      CHECK(peak >= 0.3 - 1e-12);
      CHECK(peak <= 0.9 + 1e-12);
    }
  }
  CHECK(a.batches() == 6);
}
