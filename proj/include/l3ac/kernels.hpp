#pragma once

// Forward kernels shared by the differentiable graph and the streaming encoder.
// Everything here is templated on the scalar type and works on column-major
// channel x time blocks. None of these functions pad: callers prepend history
// (streaming) or padding (graph ops) before calling.

#include "l3ac/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace l3ac::kernels {

struct ConvGeometry {
  Index kernel = 1;
  Index stride = 1;
  Index dilation = 1;
  Index groups = 1;

  Index span() const { return dilation * (kernel - 1) + 1; }
  Index output_length(Index padded_length) const {
    return padded_length < span() ? 0 : (padded_length - span()) / stride + 1;
  }
};

template <typename Scalar>
using ColumnView = Eigen::Map<const Signal<Scalar>, 0, Eigen::OuterStride<>>;

/// Columns start, start+step, ... (count of them) of `x`, restricted to rows
/// [row, row+rows).
template <typename Scalar>
ColumnView<Scalar> strided_columns(const Signal<Scalar>& x, Index row, Index rows, Index start,
                                   Index step, Index count) {
  return ColumnView<Scalar>(x.data() + start * x.rows() + row, rows, count,
                            Eigen::OuterStride<>(step * x.rows()));
}

/// Valid (unpadded) grouped 1-D convolution. `weight` is out x (kernel*in/groups)
/// with column index tap*(in/groups) + c.
template <typename Scalar>
Signal<Scalar> conv1d_valid(const Signal<Scalar>& xp, const Signal<Scalar>& weight,
                            const Signal<Scalar>* bias, const ConvGeometry& g) {
  const Index in_ch = xp.rows();
  const Index out_ch = weight.rows();
  const Index in_g = in_ch / g.groups;
  const Index out_g = out_ch / g.groups;
  const Index out_len = g.output_length(xp.cols());
  Signal<Scalar> y(out_ch, out_len);
  if (bias != nullptr) {
    y = bias->col(0).replicate(1, out_len);
  } else {
    y.setZero();
  }
  if (out_len == 0) return y;

  const bool depthwise = g.groups == in_ch && g.groups == out_ch;
  for (Index tap = 0; tap < g.kernel; ++tap) {
    const Index start = tap * g.dilation;
    if (depthwise) {
      auto x_tap = strided_columns(xp, 0, in_ch, start, g.stride, out_len);
      y.array() += x_tap.array().colwise() * weight.col(tap).array();
      continue;
    }
    for (Index grp = 0; grp < g.groups; ++grp) {
      auto x_tap = strided_columns(xp, grp * in_g, in_g, start, g.stride, out_len);
      y.middleRows(grp * out_g, out_g).noalias() +=
          weight.block(grp * out_g, tap * in_g, out_g, in_g) * x_tap;
    }
  }
  return y;
}

/// Left-pads with `count` copies of the first column.
template <typename Scalar>
Signal<Scalar> pad_replicate_left(const Signal<Scalar>& x, Index count) {
  Signal<Scalar> out(x.rows(), x.cols() + count);
  if (count > 0) out.leftCols(count) = x.col(0).replicate(1, count);
  out.rightCols(x.cols()) = x;
  return out;
}

/// Zero padding split as floor(total/2) left, the rest right.
template <typename Scalar>
Signal<Scalar> pad_zero_centered(const Signal<Scalar>& x, Index total) {
  const Index left = total / 2;
  Signal<Scalar> out = Signal<Scalar>::Zero(x.rows(), x.cols() + total);
  out.middleCols(left, x.cols()) = x;
  return out;
}

/// Sliding maximum over a window of `window` columns, valid positions only.
/// `argmax`, if given, receives the source column of each maximum; ties go to
/// the earliest column.
template <typename Scalar>
Signal<Scalar> sliding_max_valid(const Signal<Scalar>& xp, Index window,
                                 Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic>* argmax) {
  const Index out_len = xp.cols() - window + 1;
  Signal<Scalar> y(xp.rows(), std::max<Index>(out_len, 0));
  if (argmax != nullptr) argmax->resize(xp.rows(), y.cols());
  for (Index t = 0; t < y.cols(); ++t) {
    for (Index c = 0; c < xp.rows(); ++c) {
      Index best = t;
      Scalar value = xp(c, t);
      for (Index j = t + 1; j < t + window; ++j) {
        if (xp(c, j) > value) {
          value = xp(c, j);
          best = j;
        }
      }
      y(c, t) = value;
      if (argmax != nullptr) (*argmax)(c, t) = best;
    }
  }
  return y;
}

/// Sliding mean over a window of `window` columns, valid positions only.
/// Each window is summed left to right from scratch so that results do not
/// depend on where a stream was split.
template <typename Scalar>
Signal<Scalar> sliding_mean_valid(const Signal<Scalar>& xp, Index window) {
  const Index out_len = xp.cols() - window + 1;
  Signal<Scalar> y(xp.rows(), std::max<Index>(out_len, 0));
  const Scalar inv = Scalar(1) / static_cast<Scalar>(window);
  for (Index t = 0; t < y.cols(); ++t) {
    auto acc = xp.col(t).eval();
    for (Index j = t + 1; j < t + window; ++j) acc += xp.col(j);
    y.col(t) = acc * inv;
  }
  return y;
}

/// GELU, tanh approximation: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
template <typename Scalar>
Scalar gelu(Scalar x) {
  constexpr Scalar k = Scalar(0.7978845608028654);  // sqrt(2/pi)
  return Scalar(0.5) * x * (Scalar(1) + std::tanh(k * (x + Scalar(0.044715) * x * x * x)));
}

template <typename Scalar>
Scalar gelu_derivative(Scalar x) {
  constexpr Scalar k = Scalar(0.7978845608028654);
  const Scalar u = k * (x + Scalar(0.044715) * x * x * x);
  const Scalar th = std::tanh(u);
  const Scalar du = k * (Scalar(1) + Scalar(3) * Scalar(0.044715) * x * x);
  return Scalar(0.5) * (Scalar(1) + th) + Scalar(0.5) * x * (Scalar(1) - th * th) * du;
}

/// Snake: x + sin^2(alpha x) / alpha, alpha per row.
template <typename Scalar>
Signal<Scalar> snake(const Signal<Scalar>& x, const Signal<Scalar>& alpha) {
  Signal<Scalar> y(x.rows(), x.cols());
  for (Index t = 0; t < x.cols(); ++t) {
    for (Index c = 0; c < x.rows(); ++c) {
      const Scalar a = alpha(c, 0);
      const Scalar s = std::sin(a * x(c, t));
      y(c, t) = x(c, t) + s * s / a;
    }
  }
  return y;
}

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  return x >= 0 ? Scalar(1) / (Scalar(1) + std::exp(-x)) : std::exp(x) / (Scalar(1) + std::exp(x));
}

/// Per-column layer norm across channels with per-channel affine.
template <typename Scalar>
Signal<Scalar> channel_norm(const Signal<Scalar>& x, const Signal<Scalar>& gamma,
                            const Signal<Scalar>& beta, Scalar eps) {
  const Scalar n = static_cast<Scalar>(x.rows());
  Signal<Scalar> y(x.rows(), x.cols());
  for (Index t = 0; t < x.cols(); ++t) {
    const Scalar mean = x.col(t).sum() / n;
    const auto centered = (x.col(t).array() - mean).eval();
    const Scalar var = centered.square().sum() / n;
    const Scalar inv = Scalar(1) / std::sqrt(var + eps);
    y.col(t) = (centered * inv) * gamma.col(0).array() + beta.col(0).array();
  }
  return y;
}

/// Linear interpolation by an integer factor: output column t*rate + j equals
/// x_t + (x_{t+1} - x_t) * j / rate, with the last column held.
template <typename Scalar>
Signal<Scalar> linear_upsample(const Signal<Scalar>& x, Index rate) {
  const Index n = x.cols();
  Signal<Scalar> y(x.rows(), n * rate);
  for (Index t = 0; t < n; ++t) {
    const Index next = std::min(t + 1, n - 1);
    for (Index j = 0; j < rate; ++j) {
      const Scalar w = static_cast<Scalar>(j) / static_cast<Scalar>(rate);
      y.col(t * rate + j) = x.col(t) + (x.col(next) - x.col(t)) * w;
    }
  }
  return y;
}

/// Causal sliding-window multi-head attention.
///
/// `q` holds the queries for the last q.cols() key positions: key/value
/// columns [0, prefix) are cached context, where prefix = k.cols() - q.cols().
/// Query i sits at key position prefix + i and attends to key positions
/// [prefix + i - window + 1, prefix + i]. `bias` is heads x window with the
/// column indexed by distance (query position - key position).
/// `weights`, if given, receives per-head attention rows (window wide,
/// left-aligned to the earliest visible key).
template <typename Scalar>
Signal<Scalar> local_attention(const Signal<Scalar>& q, const Signal<Scalar>& k,
                               const Signal<Scalar>& v, const Signal<Scalar>& bias, Index heads,
                               Index window, std::vector<Signal<Scalar>>* weights) {
  const Index channels = q.rows();
  const Index head_dim = channels / heads;
  const Index n_query = q.cols();
  const Index prefix = k.cols() - n_query;
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(head_dim));
  Signal<Scalar> out = Signal<Scalar>::Zero(channels, n_query);
  if (weights != nullptr) weights->assign(heads, Signal<Scalar>::Zero(window, n_query));
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> scores(window);
  for (Index h = 0; h < heads; ++h) {
    const Index r0 = h * head_dim;
    for (Index i = 0; i < n_query; ++i) {
      const Index pos = prefix + i;
      const Index first = std::max<Index>(0, pos - window + 1);
      const Index count = pos - first + 1;
      Scalar best = -std::numeric_limits<Scalar>::infinity();
      for (Index j = 0; j < count; ++j) {
        const Index key = first + j;
        scores(j) = q.col(i).segment(r0, head_dim).dot(k.col(key).segment(r0, head_dim)) * scale +
                    bias(h, pos - key);
        best = std::max(best, scores(j));
      }
      Scalar total = 0;
      for (Index j = 0; j < count; ++j) {
        scores(j) = std::exp(scores(j) - best);
        total += scores(j);
      }
      for (Index j = 0; j < count; ++j) {
        const Scalar a = scores(j) / total;
        out.col(i).segment(r0, head_dim) += a * v.col(first + j).segment(r0, head_dim);
        if (weights != nullptr) (*weights)[h](j, i) = a;
      }
    }
  }
  return out;
}

}  // namespace l3ac::kernels
