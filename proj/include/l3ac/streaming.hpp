#pragma once

// Incremental encoder. Each push() takes a whole number of hops and returns
// exactly the token frames they complete; concatenated, these equal encode()
// of the concatenated audio bit for bit.

#include "l3ac/codec.hpp"

namespace l3ac {

class StreamingEncoder {
 public:
  /// The model must outlive the encoder.
  explicit StreamingEncoder(const CodecModel& model);

  /// Throws std::invalid_argument unless chunk.cols() is a multiple of the
  /// hop. An empty chunk returns no frames and leaves the state untouched.
  FrameTokens push(const Mat& chunk);
  std::uint64_t frames_emitted() const { return frames_; }

 private:
  const CodecModel* model_;
  StreamHistory input_;
  TConvUnit::Stream tconv_;
  std::vector<std::vector<ConvUnit::Stream>> units_;
  std::vector<StreamHistory> downs_;
  std::vector<TransformerBlock::Stream> blocks_;
  StreamHistory transformer_down_;
  std::uint64_t frames_ = 0;
};

}  // namespace l3ac
