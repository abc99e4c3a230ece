#include "l3ac/local_transformer.hpp"

namespace l3ac {

void AttentionSpec::validate(Index channels) const {
  if (window < 1) throw std::invalid_argument("attention window must be >= 1");
  if (n_layers < 0) throw std::invalid_argument("attention n_layers must be >= 0");
  if (n_heads < 1 || channels % n_heads != 0) {
    throw std::invalid_argument("attention heads must divide the channel count");
  }
}

TransformerBlock::TransformerBlock(ParamBuilder& pb, Index channels, const AttentionSpec& spec)
    : channels_(channels), spec_(spec) {
  spec_.validate(channels);
  const ConvOptions pw{1, 1, 1, Padding::None};
  norm1_gamma = &pb.constant("norm1.gamma", {channels, 1}, 1.0);
  norm1_beta = &pb.constant("norm1.beta", {channels, 1}, 0.0);
  query = Conv1d(pb, "q", channels, channels, 1, pw);
  key = Conv1d(pb, "k", channels, channels, 1, pw);
  value = Conv1d(pb, "v", channels, channels, 1, pw);
  out = Conv1d(pb, "o", channels, channels, 1, pw);
  position_bias = &pb.constant("position_bias", {spec.n_heads, spec.window}, 0.0);
  norm2_gamma = &pb.constant("norm2.gamma", {channels, 1}, 1.0);
  norm2_beta = &pb.constant("norm2.beta", {channels, 1}, 0.0);
  mlp_in = Conv1d(pb, "mlp1", channels, 4 * channels, 1, pw);
  mlp_out = Conv1d(pb, "mlp2", 4 * channels, channels, 1, pw);
}

Var TransformerBlock::forward(Graph& g, Var x) const {
  if (x.rows() != channels_) throw ShapeError("TransformerBlock: channel mismatch");
  Var h = channel_norm(x, g.param(*norm1_gamma), g.param(*norm1_beta), kNormEps);
  Var a = local_attention(query.forward(g, h), key.forward(g, h), value.forward(g, h), g.param(*position_bias),
                          spec_.n_heads, spec_.window);
  x = add(x, out.forward(g, a));
  h = channel_norm(x, g.param(*norm2_gamma), g.param(*norm2_beta), kNormEps);
  return add(x, mlp_out.forward(g, gelu(mlp_in.forward(g, h))));
}

Mat TransformerBlock::stream(Stream& state, const Mat& x) const {
  if (x.cols() == 0) return x;
  StreamHistory none;
  Mat h = kernels::channel_norm<double>(x, norm1_gamma->value, norm1_beta->value, kNormEps);
  const Mat q = query.stream(none, h);
  const Index cached = state.keys.cols();
  Mat k(channels_, cached + x.cols());
  Mat v(channels_, cached + x.cols());
  if (cached > 0) {
    k.leftCols(cached) = state.keys;
    v.leftCols(cached) = state.values;
  }
  k.rightCols(x.cols()) = key.stream(none, h);
  v.rightCols(x.cols()) = value.stream(none, h);
  const Mat a = kernels::local_attention<double>(q, k, v, position_bias->value, spec_.n_heads, spec_.window, nullptr);
  const Index keep = std::min<Index>(spec_.window - 1, k.cols());
  state.keys = k.rightCols(keep);
  state.values = v.rightCols(keep);

  Mat y = x + out.stream(none, a);
  h = kernels::channel_norm<double>(y, norm2_gamma->value, norm2_beta->value, kNormEps);
  const Mat hidden = mlp_in.stream(none, h).unaryExpr([](double t) { return kernels::gelu(t); });
  return y + mlp_out.stream(none, hidden);
}

std::uint64_t TransformerBlock::macs_per_step() const {
  // Projections and MLP, plus scores and weighted values over a full window.
  const auto attention = static_cast<std::uint64_t>(2 * channels_ * spec_.window);
  return query.macs_per_step() + key.macs_per_step() + value.macs_per_step() + out.macs_per_step() +
         mlp_in.macs_per_step() + mlp_out.macs_per_step() + attention;
}

LocalTransformer::LocalTransformer(ParamBuilder& pb, Index channels, const AttentionSpec& spec) {
  spec.validate(channels);
  for (Index i = 0; i < spec.n_layers; ++i) {
    ParamBuilder s = pb.scope("block" + std::to_string(i));
    blocks.emplace_back(s, channels, spec);
  }
}

Var LocalTransformer::forward(Graph& g, Var x) const {
  for (const auto& b : blocks) x = b.forward(g, x);
  return x;
}

Mat LocalTransformer::stream(Stream& state, const Mat& x) const {
  state.resize(blocks.size());
  Mat y = x;
  for (std::size_t i = 0; i < blocks.size(); ++i) y = blocks[i].stream(state[i], y);
  return y;
}

std::uint64_t LocalTransformer::macs_per_step() const {
  std::uint64_t total = 0;
  for (const auto& b : blocks) total += b.macs_per_step();
  return total;
}

}  // namespace l3ac
