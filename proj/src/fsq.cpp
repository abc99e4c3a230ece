#include "l3ac/fsq.hpp"

#include <cmath>
#include <limits>

namespace l3ac {

namespace {

// Slightly widened so the even-level shift stays finite at L = 2.
double half_range(int L) { return (L - 1) / 2.0 * (1.0 + 1e-3); }
double offset_of(int L) { return L % 2 == 0 ? 0.5 : 0.0; }
double shift_of(int L) { return std::atanh(offset_of(L) / half_range(L)); }

void require_dims(const Mat& z, const FsqLevels& levels) {
  if (z.rows() != levels.dims()) throw ShapeError("fsq: latent dims do not match levels");
}

}  // namespace

FsqLevels::FsqLevels(std::vector<int> levels) : levels_(std::move(levels)) {
  if (levels_.empty()) throw std::invalid_argument("fsq: no levels");
  unsigned __int128 product = 1;
  for (int L : levels_) {
    if (L < 2 || L > 255) throw std::invalid_argument("fsq: levels must be in [2, 255]");
    product *= static_cast<unsigned>(L);
    if (product > (static_cast<unsigned __int128>(1) << 63)) throw std::invalid_argument("fsq: codebook too large");
  }
}

std::uint64_t FsqLevels::codebook_size() const {
  std::uint64_t n = 1;
  for (int L : levels_) n *= static_cast<std::uint64_t>(L);
  return n;
}

double FsqLevels::bits_per_frame() const {
  double bits = 0;
  for (int L : levels_) bits += std::log2(static_cast<double>(L));
  return bits;
}

double FsqLevels::bound(Index dim, double z) const {
  const int L = (*this)[dim];
  return half_range(L) * std::tanh(z + shift_of(L)) - offset_of(L);
}

double FsqLevels::bound_derivative(Index dim, double z) const {
  const int L = (*this)[dim];
  const double t = std::tanh(z + shift_of(L));
  return half_range(L) * (1.0 - t * t);
}

void FrameTokens::validate() const {
  if (codes.cols() != levels.dims()) throw ShapeError("tokens: code width does not match levels");
  for (Index f = 0; f < codes.rows(); ++f) {
    for (Index d = 0; d < codes.cols(); ++d) {
      if (codes(f, d) < 0 || codes(f, d) >= levels[d]) throw std::out_of_range("tokens: code out of range");
    }
  }
}

Mat fsq_bound(const Mat& z, const FsqLevels& levels) {
  require_dims(z, levels);
  Mat b(z.rows(), z.cols());
  for (Index t = 0; t < z.cols(); ++t) {
    for (Index d = 0; d < z.rows(); ++d) b(d, t) = levels.bound(d, z(d, t));
  }
  return b;
}

FsqResult fsq_quantize(const Mat& z, const FsqLevels& levels) {
  if (!z.allFinite()) throw NumericalError("fsq: latent contains non-finite values");
  FsqResult r;
  r.z_hat = fsq_bound(z, levels).unaryExpr([](double v) { return std::floor(v + 0.5); });
  r.tokens.levels = levels;
  r.tokens.codes.resize(z.cols(), z.rows());
  for (Index t = 0; t < z.cols(); ++t) {
    for (Index d = 0; d < z.rows(); ++d) {
      r.tokens.codes(t, d) = static_cast<int>(r.z_hat(d, t)) + levels.half_width(d);
    }
  }
  return r;
}

Mat fsq_centers(const FrameTokens& tokens) {
  tokens.validate();
  Mat c(tokens.levels.dims(), tokens.n_frames());
  for (Index t = 0; t < c.cols(); ++t) {
    for (Index d = 0; d < c.rows(); ++d) c(d, t) = tokens.codes(t, d) - tokens.levels.half_width(d);
  }
  return c;
}

Mat fsq_preimage(const FrameTokens& tokens) {
  Mat c = fsq_centers(tokens);
  for (Index t = 0; t < c.cols(); ++t) {
    for (Index d = 0; d < c.rows(); ++d) {
      const int L = tokens.levels[d];
      const double lo = -half_range(L) - offset_of(L);
      const double hi = half_range(L) - offset_of(L);
      const double b = std::clamp(c(d, t), lo + 0.25, hi - 0.25);
      c(d, t) = std::atanh((b + offset_of(L)) / half_range(L)) - shift_of(L);
    }
  }
  return c;
}

Var fsq_bound(Var z, const FsqLevels& levels) {
  require_dims(z.value(), levels);
  return z.graph->make("fsq_bound", fsq_bound(z.value(), levels), {z}, [z, levels](Graph& g, const Mat& gy) {
    const Mat& zv = z.value();
    Mat dz(zv.rows(), zv.cols());
    for (Index t = 0; t < zv.cols(); ++t) {
      for (Index d = 0; d < zv.rows(); ++d) dz(d, t) = gy(d, t) * levels.bound_derivative(d, zv(d, t));
    }
    g.accumulate(z, dz);
  });
}

Var fsq_quantize(Var z, const FsqLevels& levels) { return round_straight_through(fsq_bound(z, levels)); }

Var fsq_noise(Var z, const FsqLevels& levels, const std::function<double()>& uniform) {
  if (!z.graph->recording()) throw std::logic_error("fsq_noise: noise perturbation is training-only");
  Mat noise(z.rows(), z.cols());
  for (Index i = 0; i < noise.size(); ++i) noise(i) = uniform() - 0.5;
  return add_constant(fsq_bound(z, levels), noise);
}

std::uint64_t codes_to_index(std::span<const int> codes, const FsqLevels& levels) {
  if (static_cast<Index>(codes.size()) != levels.dims()) throw ShapeError("codes_to_index: width mismatch");
  std::uint64_t index = 0;
  for (Index d = levels.dims() - 1; d >= 0; --d) {
    const int c = codes[static_cast<std::size_t>(d)];
    if (c < 0 || c >= levels[d]) throw std::out_of_range("codes_to_index: code out of range");
    index = index * static_cast<std::uint64_t>(levels[d]) + static_cast<std::uint64_t>(c);
  }
  return index;
}

std::vector<int> index_to_codes(std::uint64_t index, const FsqLevels& levels) {
  if (index >= levels.codebook_size()) throw std::out_of_range("index_to_codes: index out of range");
  std::vector<int> codes(static_cast<std::size_t>(levels.dims()));
  for (Index d = 0; d < levels.dims(); ++d) {
    const auto L = static_cast<std::uint64_t>(levels[d]);
    codes[static_cast<std::size_t>(d)] = static_cast<int>(index % L);
    index /= L;
  }
  return codes;
}

}  // namespace l3ac
