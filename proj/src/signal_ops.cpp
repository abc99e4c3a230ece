#include "l3ac/signal_ops.hpp"

#include <cmath>

namespace l3ac {

std::string ParamBuilder::full(const std::string& name) const {
  return prefix_.empty() ? name : prefix_ + "." + name;
}

ParamBuilder ParamBuilder::scope(const std::string& name) const {
  return ParamBuilder(*set_, *rng_, full(name));
}

Parameter& ParamBuilder::uniform(const std::string& name, std::vector<Index> shape, Index fan_in) {
  const double a = 1.0 / std::sqrt(static_cast<double>(std::max<Index>(fan_in, 1)));
  std::uniform_real_distribution<double> dist(-a, a);
  Index cols = 1;
  for (std::size_t i = 1; i < shape.size(); ++i) cols *= shape[i];
  Mat m(shape.front(), cols);
  for (Index i = 0; i < m.size(); ++i) m(i) = dist(*rng_);
  return set_->add(full(name), std::move(shape), std::move(m));
}

Parameter& ParamBuilder::constant(const std::string& name, std::vector<Index> shape, double value) {
  Index cols = 1;
  for (std::size_t i = 1; i < shape.size(); ++i) cols *= shape[i];
  return set_->add(full(name), shape, Mat::Constant(shape.front(), cols, value));
}

Var tpooling(Var x, Index window) {
  if (window < 1) throw std::invalid_argument("tpooling: window must be >= 1");
  return avg_pool_causal(max_pool_causal(abs(x), window), window);
}

void TConvSpec::validate() const {
  if (kernel_sizes.empty()) throw std::invalid_argument("TConvSpec: kernel_sizes is empty");
  for (std::size_t i = 0; i < kernel_sizes.size(); ++i) {
    if (kernel_sizes[i] < 2) throw std::invalid_argument("TConvSpec: kernel sizes must be >= 2");
    if (i > 0 && kernel_sizes[i] <= kernel_sizes[i - 1]) {
      throw std::invalid_argument("TConvSpec: kernel sizes must be strictly increasing");
    }
  }
  if (branch_conv_k < 1) throw std::invalid_argument("TConvSpec: branch_conv_k must be >= 1");
  if (expansion < 1) throw std::invalid_argument("TConvSpec: expansion must be >= 1");
}

void StageSpec::validate() const {
  if (rate < 1) throw std::invalid_argument("StageSpec: rate must be >= 1");
  if (channels < 1) throw std::invalid_argument("StageSpec: channels must be >= 1");
  if (n_conv_units < 0) throw std::invalid_argument("StageSpec: negative conv unit count");
}

Mat StreamHistory::extend(const Mat& x, Index keep) {
  if (keep == 0) return x;
  if (!started) {
    columns = x.col(0).replicate(1, keep);
    started = true;
  }
  Mat xp(x.rows(), keep + x.cols());
  xp.leftCols(keep) = columns;
  xp.rightCols(x.cols()) = x;
  columns = xp.rightCols(keep);
  return xp;
}

// --- Conv1d ----------------------------------------------------------------

Conv1d::Conv1d(ParamBuilder& pb, const std::string& name, Index in_ch, Index out_ch, Index kernel,
               ConvOptions opt, bool with_bias)
    : in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel), opt_(opt) {
  if (in_ch % opt.groups != 0 || out_ch % opt.groups != 0) throw ShapeError("Conv1d: channels vs groups");
  const Index in_g = in_ch / opt.groups;
  ParamBuilder s = pb.scope(name);
  weight = &s.uniform("weight", {out_ch, in_g, kernel}, in_g * kernel);
  if (with_bias) bias = &s.uniform("bias", {out_ch, 1}, in_g * kernel);
}

Var Conv1d::forward(Graph& g, Var x) const {
  Var b = bias != nullptr ? g.param(*bias) : Var{};
  return conv1d(x, g.param(*weight), b, kernel_, opt_);
}

Mat Conv1d::stream(StreamHistory& state, const Mat& x) const {
  const kernels::ConvGeometry geom{kernel_, opt_.stride, opt_.dilation, opt_.groups};
  if (opt_.padding != Padding::CausalReplicate && !(geom.span() == 1 && opt_.stride == 1)) {
    throw std::logic_error("Conv1d::stream needs causal padding");
  }
  if (x.cols() == 0) return Mat(out_ch_, 0);
  const Mat xp = state.extend(x, geom.span() - 1);
  return kernels::conv1d_valid<double>(xp, weight->value, bias != nullptr ? &bias->value : nullptr, geom);
}

std::uint64_t Conv1d::macs_per_step() const {
  return static_cast<std::uint64_t>(out_ch_ * (in_ch_ / opt_.groups) * kernel_);
}

// --- TConvUnit -------------------------------------------------------------

TConvUnit::TConvUnit(ParamBuilder& pb, Index channels, const TConvSpec& spec, bool plain)
    : channels_(channels), spec_(spec), plain_(plain) {
  spec_.validate();
  ParamBuilder s = pb.scope("tconv");
  for (std::size_t i = 0; i < spec_.kernel_sizes.size(); ++i) {
    branches_.emplace_back(s, "branch" + std::to_string(i), channels, channels, spec_.branch_conv_k);
  }
  const Index n = static_cast<Index>(spec_.kernel_sizes.size());
  expand_ = Conv1d(s, "expand", n * channels, spec_.expansion * channels, 1, ConvOptions{1, 1, 1, Padding::None});
  compress_ = Conv1d(s, "compress", (spec_.expansion + 1) * channels, channels, 1,
                     ConvOptions{1, 1, 1, Padding::None});
}

Var TConvUnit::latent(Graph& g, Var x) const {
  if (x.rows() != channels_) throw ShapeError("TConvUnit: channel mismatch");
  std::vector<Var> parts;
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    Var pooled = plain_ ? x : tpooling(x, spec_.kernel_sizes[i]);
    parts.push_back(branches_[i].forward(g, pooled));
  }
  return gelu(expand_.forward(g, concat_channels(parts)));
}

Var TConvUnit::forward(Graph& g, Var x) const {
  Var features[] = {latent(g, x), x};
  return compress_.forward(g, concat_channels(features));
}

Mat TConvUnit::stream(Stream& state, const Mat& x) const {
  if (x.cols() == 0) return Mat(channels_, 0);
  state.pools.resize(branches_.size());
  state.branches.resize(branches_.size());
  const Index n = static_cast<Index>(branches_.size());
  Mat stacked(n * channels_, x.cols());
  for (Index i = 0; i < n; ++i) {
    Mat pooled;
    if (plain_) {
      pooled = x;
    } else {
      const Index k = spec_.kernel_sizes[static_cast<std::size_t>(i)];
      TPoolStream& ps = state.pools[static_cast<std::size_t>(i)];
      const Mat ap = ps.abs_history.extend(x.cwiseAbs(), k - 1);
      const Mat m = kernels::sliding_max_valid<double>(ap, k, nullptr);
      pooled = kernels::sliding_mean_valid<double>(ps.max_history.extend(m, k - 1), k);
    }
    stacked.middleRows(i * channels_, channels_) =
        branches_[static_cast<std::size_t>(i)].stream(state.branches[static_cast<std::size_t>(i)], pooled);
  }
  StreamHistory none;
  const Mat hidden = expand_.stream(none, stacked).unaryExpr([](double v) { return kernels::gelu(v); });
  Mat joined(hidden.rows() + channels_, x.cols());
  joined.topRows(hidden.rows()) = hidden;
  joined.bottomRows(channels_) = x;
  return compress_.stream(none, joined);
}

std::uint64_t TConvUnit::macs_per_step() const {
  std::uint64_t total = expand_.macs_per_step() + compress_.macs_per_step();
  for (const auto& b : branches_) total += b.macs_per_step();
  return total;
}

// --- ConvUnit --------------------------------------------------------------

ConvUnit::ConvUnit(ParamBuilder& pb, Index channels) {
  depthwise = Conv1d(pb, "dwconv", channels, channels, 7, ConvOptions{1, 1, channels, Padding::CausalReplicate});
  norm_gamma = &pb.constant("norm.gamma", {channels, 1}, 1.0);
  norm_beta = &pb.constant("norm.beta", {channels, 1}, 0.0);
  expand = Conv1d(pb, "pwconv1", channels, 4 * channels, 1, ConvOptions{1, 1, 1, Padding::None});
  alpha = &pb.constant("snake.alpha", {4 * channels, 1}, 1.0);
  compress = Conv1d(pb, "pwconv2", 4 * channels, channels, 1, ConvOptions{1, 1, 1, Padding::None});
}

Var ConvUnit::forward(Graph& g, Var x) const {
  if (x.rows() != depthwise.in_channels()) throw ShapeError("ConvUnit: channel mismatch");
  Var h = depthwise.forward(g, x);
  h = channel_norm(h, g.param(*norm_gamma), g.param(*norm_beta), kNormEps);
  h = snake(expand.forward(g, h), g.param(*alpha));
  return add(x, compress.forward(g, h));
}

Mat ConvUnit::stream(Stream& state, const Mat& x) const {
  if (x.cols() == 0) return x;
  Mat h = depthwise.stream(state.depthwise, x);
  h = kernels::channel_norm<double>(h, norm_gamma->value, norm_beta->value, kNormEps);
  StreamHistory none;
  h = kernels::snake<double>(expand.stream(none, h), alpha->value);
  return x + compress.stream(none, h);
}

std::uint64_t ConvUnit::macs_per_step() const {
  return depthwise.macs_per_step() + expand.macs_per_step() + compress.macs_per_step();
}

// --- Down / Up layers --------------------------------------------------------

DownLayer::DownLayer(ParamBuilder& pb, Index in_ch, Index out_ch, Index rate) : rate_(rate) {
  if (rate < 1) throw std::invalid_argument("DownLayer: rate must be >= 1");
  conv = Conv1d(pb, "down", in_ch, out_ch, 2 * rate, ConvOptions{rate, 1, 1, Padding::CausalReplicate});
}

UpLayer::UpLayer(ParamBuilder& pb, Index in_ch, Index out_ch, Index rate) : rate_(rate) {
  if (rate < 1) throw std::invalid_argument("UpLayer: rate must be >= 1");
  conv = Conv1d(pb, "up", in_ch, out_ch, 7, ConvOptions{1, 1, 1, Padding::CausalReplicate});
}

Var UpLayer::forward(Graph& g, Var x) const {
  return conv.forward(g, rate_ == 1 ? x : linear_upsample(x, rate_));
}

// --- TEConvUnit --------------------------------------------------------------

TEConvUnit::TEConvUnit(ParamBuilder& pb, Index channels, const TConvSpec& spec, bool plain) {
  ParamBuilder s = pb.scope("teconv");
  ParamBuilder su = s.scope("unit");
  unit = ConvUnit(su, channels);
  tconv = TConvUnit(s, channels, spec, plain);
  gate = Conv1d(s, "gate", spec.expansion * channels, channels, 1, ConvOptions{1, 1, 1, Padding::None});
}

Var TEConvUnit::forward(Graph& g, Var x) const {
  Var body = unit.forward(g, x);
  Var weights = sigmoid(gate.forward(g, instance_norm(tconv.latent(g, x), kNormEps)));
  return mul(body, weights);
}

std::uint64_t TEConvUnit::macs_per_step() const {
  return unit.macs_per_step() + tconv.macs_per_step() + gate.macs_per_step();
}

// --- LastUnit ----------------------------------------------------------------

LastUnit::LastUnit(ParamBuilder& pb, Index channels) {
  ParamBuilder s = pb.scope("last");
  widen = Conv1d(s, "widen", channels, 2 * channels, 1, ConvOptions{1, 1, 1, Padding::None});
  for (int i = 0; i < 3; ++i) {
    ParamBuilder su = s.scope("unit" + std::to_string(i));
    units.emplace_back(su, 2 * channels);
  }
  project = Conv1d(s, "project", 2 * channels, 1, 1, ConvOptions{1, 1, 1, Padding::None});
}

Var LastUnit::forward(Graph& g, Var x) const {
  Var h = widen.forward(g, x);
  for (const auto& u : units) h = u.forward(g, h);
  return tanh(project.forward(g, h));
}

std::uint64_t LastUnit::macs_per_step() const {
  std::uint64_t total = widen.macs_per_step() + project.macs_per_step();
  for (const auto& u : units) total += u.macs_per_step();
  return total;
}

}  // namespace l3ac
