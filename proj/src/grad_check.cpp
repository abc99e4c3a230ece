#include "l3ac/grad_check.hpp"

#include <random>

namespace l3ac {
namespace {

Mat projection_for(Index rows, Index cols, std::uint64_t seed) {
  if (rows * cols == 1) return Mat::Ones(1, 1);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Mat w(rows, cols);
  for (Index i = 0; i < w.size(); ++i) w(i) = u(rng);
  return w;
}

double evaluate(const GraphFn& f, const Mat& input, const Mat& projection) {
  Graph g(false);
  Var out = f(g, g.input(input));
  if (auto bad = g.first_non_finite()) {
    throw NumericalError(std::string("grad_check: non-finite value at op '") + g.op_name(*bad) + "'");
  }
  return (out.value().array() * projection.array()).sum();
}

}  // namespace

GradCheckResult grad_check(const GraphFn& f, const Mat& input, const GradCheckOptions& opt) {
  return grad_check(f, f, input, opt);
}

GradCheckResult grad_check(const GraphFn& analytic, const GraphFn& reference, const Mat& input,
                           const GradCheckOptions& opt) {
  for (Parameter* p : opt.params) p->zero_grad();
  Graph g(true);
  Var x = g.input(input, true);
  Var out = analytic(g, x);
  if (auto bad = g.first_non_finite()) {
    throw NumericalError(std::string("grad_check: non-finite value at op '") + g.op_name(*bad) + "'");
  }
  const Mat projection = projection_for(out.rows(), out.cols(), opt.seed);
  Var loss = sum_all(mul(out, g.input(projection)));
  g.backward(loss);
  Mat dx = g.grad(x);
  if (dx.size() == 0) dx = Mat::Zero(input.rows(), input.cols());

  GradCheckResult result;
  auto consider = [&](double a, double n, const std::string& where) {
    const double err = std::abs(a - n) / std::max({std::abs(a), std::abs(n), opt.floor});
    ++result.checked;
    if (result.worst.empty() || err > result.max_rel_error) {
      result.max_rel_error = err;
      result.worst = where;
    }
  };

  const double h = opt.step;
  Mat probe = input;
  for (Index i = 0; i < input.size(); ++i) {
    if (opt.skip_input && opt.skip_input(i)) continue;
    probe(i) = input(i) + h;
    const double up = evaluate(reference, probe, projection);
    probe(i) = input(i) - h;
    const double down = evaluate(reference, probe, projection);
    probe(i) = input(i);
    consider(dx(i), (up - down) / (2 * h), "input[" + std::to_string(i) + "]");
  }
  for (Parameter* p : opt.params) {
    const Mat analytic_grad = p->has_grad() ? p->grad : Mat::Zero(p->value.rows(), p->value.cols());
    for (Index i = 0; i < p->value.size(); ++i) {
      const double keep = p->value(i);
      p->value(i) = keep + h;
      const double up = evaluate(reference, input, projection);
      p->value(i) = keep - h;
      const double down = evaluate(reference, input, projection);
      p->value(i) = keep;
      consider(analytic_grad(i), (up - down) / (2 * h), p->id() + "[" + std::to_string(i) + "]");
    }
  }
  return result;
}

}  // namespace l3ac
