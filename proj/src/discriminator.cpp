#include "l3ac/discriminator.hpp"

namespace l3ac {

namespace {

constexpr double kSlope = 0.2;
constexpr double kFloor = 1e-5;

}  // namespace

Discriminator::Discriminator(const DiscriminatorConfig& config) {
  if (config.width < 1) throw std::invalid_argument("discriminator: width must be >= 1");
  std::mt19937_64 rng(config.seed);
  ParamBuilder root(params_, rng, "disc");
  const Index w = config.width;

  {
    ParamBuilder pb = root.scope("wave");
    Stack s;
    const Index widths[] = {1, w, 2 * w, 4 * w, 4 * w};
    const Index kernels[] = {15, 15, 15, 5};
    const Index strides[] = {1, 4, 4, 1};
    for (int i = 0; i < kLayers; ++i) {
      s.layers.emplace_back(pb, "conv" + std::to_string(i), widths[i], widths[i + 1], kernels[i],
                            ConvOptions{strides[i], 1, 1, Padding::SameZero});
    }
    s.output = Conv1d(pb, "out", 4 * w, 1, 3, ConvOptions{1, 1, 1, Padding::SameZero});
    stacks_.push_back(std::move(s));
  }
  for (Index window : {Index{512}, Index{1024}}) {
    ParamBuilder pb = root.scope("stft" + std::to_string(window));
    Stack s;
    s.stft = StftSpec{window, window / 4};
    const Index widths[] = {s.stft->bins(), w, w, w, w};
    for (int i = 0; i < kLayers; ++i) {
      s.layers.emplace_back(pb, "conv" + std::to_string(i), widths[i], widths[i + 1], 3,
                            ConvOptions{1, 1, 1, Padding::SameZero});
    }
    s.output = Conv1d(pb, "out", w, 1, 3, ConvOptions{1, 1, 1, Padding::SameZero});
    stacks_.push_back(std::move(s));
  }
}

DiscriminatorOutput Discriminator::forward(Graph& g, Var audio) const {
  if (audio.rows() != 1) throw ShapeError("discriminator: expected mono audio");
  if (audio.cols() < 1024) throw std::invalid_argument("discriminator: needs at least 1024 samples");
  DiscriminatorOutput out;
  for (const Stack& s : stacks_) {
    Var h = s.stft ? log_power(stft_magnitude(audio, *s.stft), kFloor) : audio;
    std::vector<Var> features;
    for (const Conv1d& layer : s.layers) {
      h = leaky_relu(layer.forward(g, h), kSlope);
      features.push_back(h);
    }
    out.logits.push_back(s.output.forward(g, h));
    out.features.push_back(std::move(features));
  }
  return out;
}

}  // namespace l3ac
