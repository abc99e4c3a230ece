#include "l3ac/gradient_suite.hpp"

#include "l3ac/fsq.hpp"
#include "l3ac/local_transformer.hpp"
#include "l3ac/signal_ops.hpp"

#include <cmath>
#include <map>
#include <random>

namespace l3ac {

namespace {

Mat random_mat(std::mt19937_64& rng, Index rows, Index cols, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Mat m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

std::vector<Parameter*> all_params(ParameterSet& set) {
  std::vector<Parameter*> out;
  for (auto& p : set) out.push_back(p.get());
  return out;
}

// Zero-initialized parameters (biases, position tables) get small random
// values so their gradient paths are exercised.
void jitter(ParameterSet& set, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 0.1);
  for (auto& p : set) {
    for (Index i = 0; i < p->value.size(); ++i) p->value.data()[i] += n(rng);
  }
}

using Case = std::function<GradCheckResult(std::mt19937_64&)>;

const std::vector<std::pair<std::string, Case>>& cases() {
  static const std::vector<std::pair<std::string, Case>> list = {
      {"snake",
       [](std::mt19937_64& rng) {
         ParameterSet set;
         Mat a(3, 1);
         a << 0.5, 1.0, 2.5;
         Parameter& alpha = set.add("alpha", {3, 1}, a);
         GradCheckOptions opt;
         opt.params = {&alpha};
         return grad_check([&](Graph& g, Var x) { return snake(x, g.param(alpha)); }, random_mat(rng, 3, 24), opt);
       }},
      {"gelu",
       [](std::mt19937_64& rng) {
         return grad_check([](Graph&, Var x) { return gelu(x); }, random_mat(rng, 3, 24, 2.0));
       }},
      {"instance_norm",
       [](std::mt19937_64& rng) {
         return grad_check([](Graph&, Var x) { return instance_norm(x, 1e-5); }, random_mat(rng, 3, 24));
       }},
      {"conv1d",
       [](std::mt19937_64& rng) {
         ParameterSet set;
         std::mt19937_64 init(3);
         ParamBuilder pb(set, init);
         ConvOptions co;
         co.stride = 2;
         co.dilation = 2;
         Conv1d conv(pb, "conv", 3, 4, 3, co);
         jitter(set, rng);
         GradCheckOptions opt;
         opt.params = all_params(set);
         return grad_check([&](Graph& g, Var x) { return conv.forward(g, x); }, random_mat(rng, 3, 21), opt);
       }},
      {"tpooling",
       [](std::mt19937_64& rng) {
         const Mat x = random_mat(rng, 2, 40);
         GradCheckOptions opt;
         // |x| has a kink at 0; keep the probes away from it.
         opt.skip_input = [x](Index i) { return std::abs(x.data()[i]) < 1e-3; };
         return grad_check([](Graph&, Var v) { return tpooling(v, 5); }, x, opt);
       }},
      {"tconv_unit",
       [](std::mt19937_64& rng) {
         ParameterSet set;
         std::mt19937_64 init(4);
         ParamBuilder pb(set, init);
         TConvSpec spec;
         spec.kernel_sizes = {2, 4, 8};
         TConvUnit unit(pb, 2, spec);
         jitter(set, rng);
         const Mat x = random_mat(rng, 2, 24);
         GradCheckOptions opt;
         opt.params = all_params(set);
         opt.skip_input = [x](Index i) { return std::abs(x.data()[i]) < 1e-3; };
         return grad_check([&](Graph& g, Var v) { return unit.forward(g, v); }, x, opt);
       }},
      {"teconv_unit",
       [](std::mt19937_64& rng) {
         ParameterSet set;
         std::mt19937_64 init(5);
         ParamBuilder pb(set, init);
         TConvSpec spec;
         spec.kernel_sizes = {2, 4, 8};
         TEConvUnit unit(pb, 2, spec);
         jitter(set, rng);
         const Mat x = random_mat(rng, 2, 24);
         GradCheckOptions opt;
         opt.params = all_params(set);
         opt.skip_input = [x](Index i) { return std::abs(x.data()[i]) < 1e-3; };
         return grad_check([&](Graph& g, Var v) { return unit.forward(g, v); }, x, opt);
       }},
      {"attention_block",
       [](std::mt19937_64& rng) {
         ParameterSet set;
         std::mt19937_64 init(6);
         ParamBuilder pb(set, init);
         AttentionSpec spec;
         spec.window = 5;
         spec.n_heads = 2;
         spec.n_layers = 1;
         TransformerBlock block(pb, 4, spec);
         jitter(set, rng);
         GradCheckOptions opt;
         opt.params = all_params(set);
         return grad_check([&](Graph& g, Var v) { return block.forward(g, v); }, random_mat(rng, 4, 12), opt);
       }},
      {"clamp_loss_below",
       [](std::mt19937_64& rng) {
         // sum of squares of a small input stays under the cap
         return grad_check([](Graph&, Var x) { return clamp_loss(sum_all(mul(x, x)), 1e3); },
                           random_mat(rng, 2, 8, 0.5));
       }},
      {"clamp_loss_above",
       [](std::mt19937_64& rng) {
         // The forward value is the constant cap; the backward pass is that of
         // l scaled by cap / l frozen at the base point.
         const Mat x0 = random_mat(rng, 2, 8, 2.0);
         const double cap = 0.5;
         const double factor = cap / x0.squaredNorm();
         return grad_check([cap](Graph&, Var x) { return clamp_loss(sum_all(mul(x, x)), cap); },
                           [factor](Graph&, Var x) { return scale(sum_all(mul(x, x)), factor); }, x0);
       }},
      {"fsq_straight_through",
       [](std::mt19937_64& rng) {
         const FsqLevels levels({7, 5, 8});
         const Mat z = random_mat(rng, 3, 10);
         // The straight-through gradient is that of the bound itself.
         return grad_check([&](Graph&, Var v) { return fsq_quantize(v, levels); },
                           [&](Graph&, Var v) { return fsq_bound(v, levels); }, z);
       }},
  };
  return list;
}

}  // namespace

std::vector<std::string> gradient_suite_names() {
  std::vector<std::string> out;
  for (const auto& [name, fn] : cases()) out.push_back(name);
  return out;
}

std::vector<GradSuiteEntry> run_gradient_suite(const std::vector<std::string>& only, std::uint64_t seed) {
  for (const auto& want : only) {
    bool known = false;
    for (const auto& [name, fn] : cases()) known = known || name == want;
    if (!known) throw std::out_of_range("unknown gradient check '" + want + "'");
  }
  std::vector<GradSuiteEntry> out;
  std::mt19937_64 rng(seed);
  for (const auto& [name, fn] : cases()) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    out.push_back({name, fn(rng)});
  }
  return out;
}

}  // namespace l3ac
