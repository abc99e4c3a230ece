#pragma once

// Finite scalar quantization.
//
// Per dimension with L levels: half = (L-1)/2, offset = 0.5 for even L (else 0),
// shift = atanh(offset/half), and the bound is
//   b(z) = half * tanh(z + shift) - offset.
// Codes are round(b) + floor(L/2) in [0, L); rounding is half-up. The centered
// value round(b) is z_hat; the decoder sees z_hat / floor(L/2).

#include "l3ac/autodiff.hpp"

#include <functional>
#include <span>

namespace l3ac {

class FsqLevels {
 public:
  FsqLevels() = default;
  /// Each level in [2, 255]; the codebook must fit in 63 bits.
  explicit FsqLevels(std::vector<int> levels);

  const std::vector<int>& values() const { return levels_; }
  Index dims() const { return static_cast<Index>(levels_.size()); }
  int operator[](Index i) const { return levels_[static_cast<std::size_t>(i)]; }
  std::uint64_t codebook_size() const;
  double bits_per_frame() const;

  double bound(Index dim, double z) const;
  double bound_derivative(Index dim, double z) const;
  /// floor(L/2): code of the zero center, and the decoder input scale.
  int half_width(Index dim) const { return (*this)[dim] / 2; }

  bool operator==(const FsqLevels&) const = default;

 private:
  std::vector<int> levels_;
};

/// Codes for a run of frames, frames x dims.
struct FrameTokens {
  using Codes = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  FsqLevels levels;
  Codes codes;

  Index n_frames() const { return codes.rows(); }
  /// Throws std::out_of_range on a code outside its level.
  void validate() const;
  bool operator==(const FrameTokens& o) const { return levels == o.levels && codes == o.codes; }
};

struct FsqResult {
  FrameTokens tokens;
  /// Centered integer values round(b), dims x frames.
  Mat z_hat;
};

/// Bound b(z) for a dims x frames block.
Mat fsq_bound(const Mat& z, const FsqLevels& levels);
/// Throws NumericalError on a non-finite latent.
FsqResult fsq_quantize(const Mat& z, const FsqLevels& levels);
/// Centered values (dims x frames) of the given codes.
Mat fsq_centers(const FrameTokens& tokens);
/// A latent z that quantizes back to `tokens`: the bound's preimage of each
/// center, pulled 1/4 step inside at the saturated ends where tanh never
/// reaches.
Mat fsq_preimage(const FrameTokens& tokens);

/// Differentiable bound.
Var fsq_bound(Var z, const FsqLevels& levels);
/// round(b(z)) with the straight-through gradient db/dz.
Var fsq_quantize(Var z, const FsqLevels& levels);
/// b(z) + u, u uniform in [-1/2, 1/2) drawn as uniform() - 1/2 with uniform()
/// in [0, 1). Training only: throws std::logic_error on a non-recording graph.
Var fsq_noise(Var z, const FsqLevels& levels, const std::function<double()>& uniform);

/// Mixed-radix frame index: sum_i code_i * prod_{j<i} L_j.
std::uint64_t codes_to_index(std::span<const int> codes, const FsqLevels& levels);
std::vector<int> index_to_codes(std::uint64_t index, const FsqLevels& levels);

}  // namespace l3ac
