#include "l3ac/streaming.hpp"

namespace l3ac {

StreamingEncoder::StreamingEncoder(const CodecModel& model) : model_(&model) {
  if (!model.config().causal) throw std::invalid_argument("streaming: encoder is not causal");
  for (const auto& stage : model.enc_units) units_.emplace_back(stage.size());
  downs_.resize(model.downs.size());
  blocks_.resize(model.enc_blocks.size());
}

FrameTokens StreamingEncoder::push(const Mat& chunk) {
  const CodecModel& m = *model_;
  const CodecConfig& c = m.config();
  if (chunk.rows() != 1) throw ShapeError("streaming: expected mono audio");
  if (chunk.cols() % c.hop() != 0) {
    throw std::invalid_argument("streaming: chunk length must be a multiple of " + std::to_string(c.hop()));
  }
  if (chunk.cols() == 0) {
    FrameTokens empty;
    empty.levels = c.levels;
    empty.codes.resize(0, c.levels.dims());
    return empty;
  }
  Mat h = m.enc_tconv.stream(tconv_, m.input_conv.stream(input_, chunk));
  for (std::size_t i = 0; i < m.downs.size(); ++i) {
    for (std::size_t u = 0; u < m.enc_units[i].size(); ++u) h = m.enc_units[i][u].stream(units_[i][u], h);
    h = m.downs[i].stream(downs_[i], h);
  }
  const bool resample = c.transformer_downsample > 1;
  for (std::size_t b = 0; b < m.enc_blocks.size(); ++b) {
    if (b == m.blocks_before_resample() && resample) h = m.enc_transformer_down.stream(transformer_down_, h);
    h = m.enc_blocks[b].stream(blocks_[b], h);
  }
  if (m.enc_blocks.empty() && resample) h = m.enc_transformer_down.stream(transformer_down_, h);
  StreamHistory none;
  const Mat z = m.enc_project.stream(none, h);
  frames_ += static_cast<std::uint64_t>(z.cols());
  return fsq_quantize(z, c.levels).tokens;
}

}  // namespace l3ac
