#include "l3ac/autodiff.hpp"

#include <cmath>
#include <numeric>

namespace l3ac {

const Mat& Var::value() const { return graph->value(*this); }

double Var::scalar() const {
  const Mat& v = value();
  if (v.size() != 1) throw ShapeError("scalar() on a non-scalar node");
  return v(0, 0);
}

Var Graph::input(Mat value, bool requires_grad) {
  Node n;
  n.op = "input";
  n.value = std::move(value);
  n.requires_grad = record_ && requires_grad;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Graph::param(Parameter& p) {
  Node n;
  n.op = "param";
  n.value = p.value;
  n.param = &p;
  n.requires_grad = record_ && p.trainable && !frozen_.contains(&p);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

void Graph::freeze(const ParameterSet& set) {
  for (const auto& p : set) frozen_.insert(p.get());
}

Var Graph::make(const char* op, Mat value, std::initializer_list<Var> parents, Backward fn) {
  return make(op, std::move(value), std::span<const Var>(parents.begin(), parents.size()),
              std::move(fn));
}

Var Graph::make(const char* op, Mat value, std::span<const Var> parents, Backward fn) {
  Node n;
  n.op = op;
  n.value = std::move(value);
  if (record_) {
    for (const Var& p : parents) {
      if (p.valid() && nodes_[p.id].requires_grad) {
        n.requires_grad = true;
        break;
      }
    }
    if (n.requires_grad) n.backward = std::move(fn);
  }
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Mat& Graph::grad_buffer(Var v) {
  Node& n = nodes_[v.id];
  if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Graph::backward(Var root, double seed) {
  if (!record_) throw std::logic_error("backward() on a graph that does not record");
  if (nodes_[root.id].value.size() != 1) throw ShapeError("backward() root must be 1x1");
  if (!nodes_[root.id].requires_grad) return;
  nodes_[root.id].grad = Mat::Constant(1, 1, seed);
  for (int i = root.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0) continue;
    if (n.backward) {
      n.backward(*this, n.grad);
    } else if (n.param != nullptr) {
      n.param->ensure_grad() += n.grad;
    }
  }
}

std::optional<Var> Graph::first_non_finite() {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!nodes_[i].value.allFinite()) return Var{this, static_cast<int>(i)};
  }
  return std::nullopt;
}

namespace {

void require_same_shape(const Mat& a, const Mat& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch");
  }
}

}  // namespace

Var add(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "add");
  return a.graph->make("add", a.value() + b.value(), {a, b}, [a, b](Graph& g, const Mat& gy) {
    g.accumulate(a, gy);
    g.accumulate(b, gy);
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "sub");
  return a.graph->make("sub", a.value() - b.value(), {a, b}, [a, b](Graph& g, const Mat& gy) {
    g.accumulate(a, gy);
    g.accumulate(b, -gy);
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "mul");
  Mat v = a.value().cwiseProduct(b.value());
  return a.graph->make("mul", std::move(v), {a, b}, [a, b](Graph& g, const Mat& gy) {
    g.accumulate(a, gy.cwiseProduct(b.value()));
    g.accumulate(b, gy.cwiseProduct(a.value()));
  });
}

Var scale(Var a, double s) {
  return a.graph->make("scale", a.value() * s, {a},
                       [a, s](Graph& g, const Mat& gy) { g.accumulate(a, gy * s); });
}

Var add_constant(Var a, const Mat& c) {
  require_same_shape(a.value(), c, "add_constant");
  return a.graph->make("add_constant", a.value() + c, {a},
                       [a](Graph& g, const Mat& gy) { g.accumulate(a, gy); });
}

Var abs(Var a) {
  return a.graph->make("abs", a.value().cwiseAbs(), {a}, [a](Graph& g, const Mat& gy) {
    const Mat sign = a.value().unaryExpr([](double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); });
    g.accumulate(a, gy.cwiseProduct(sign));
  });
}

Var gelu(Var a) {
  Mat v = a.value().unaryExpr([](double x) { return kernels::gelu(x); });
  return a.graph->make("gelu", std::move(v), {a}, [a](Graph& g, const Mat& gy) {
    g.accumulate(a, gy.cwiseProduct(a.value().unaryExpr([](double x) { return kernels::gelu_derivative(x); })));
  });
}

Var sigmoid(Var a) {
  Mat v = a.value().unaryExpr([](double x) { return kernels::sigmoid(x); });
  Mat d = v.cwiseProduct((1.0 - v.array()).matrix());
  return a.graph->make("sigmoid", std::move(v), {a},
                       [a, d = std::move(d)](Graph& g, const Mat& gy) { g.accumulate(a, gy.cwiseProduct(d)); });
}

Var tanh(Var a) {
  Mat v = a.value().array().tanh().matrix();
  Mat d = (1.0 - v.array().square()).matrix();
  return a.graph->make("tanh", std::move(v), {a},
                       [a, d = std::move(d)](Graph& g, const Mat& gy) { g.accumulate(a, gy.cwiseProduct(d)); });
}

Var leaky_relu(Var a, double slope) {
  Mat v = a.value().unaryExpr([slope](double x) { return x > 0 ? x : slope * x; });
  return a.graph->make("leaky_relu", std::move(v), {a}, [a, slope](Graph& g, const Mat& gy) {
    g.accumulate(a, gy.cwiseProduct(a.value().unaryExpr([slope](double x) { return x > 0 ? 1.0 : slope; })));
  });
}

Var snake(Var x, Var alpha) {
  const Mat& xv = x.value();
  const Mat& av = alpha.value();
  if (av.rows() != xv.rows() || av.cols() != 1) throw ShapeError("snake: alpha must be channels x 1");
  if ((av.array() <= 0.0).any()) throw std::domain_error("snake: alpha must be positive");
  return x.graph->make("snake", kernels::snake(xv, av), {x, alpha}, [x, alpha](Graph& g, const Mat& gy) {
    const Mat& xv = x.value();
    const Mat& av = alpha.value();
    const bool need_x = g.requires_grad(x);
    const bool need_a = g.requires_grad(alpha);
    Mat dx(xv.rows(), xv.cols());
    Mat da = Mat::Zero(av.rows(), 1);
    for (Index t = 0; t < xv.cols(); ++t) {
      for (Index c = 0; c < xv.rows(); ++c) {
        const double a = av(c, 0);
        const double ax = a * xv(c, t);
        const double s = std::sin(ax);
        const double s2 = std::sin(2.0 * ax);
        dx(c, t) = gy(c, t) * (1.0 + s2);
        da(c, 0) += gy(c, t) * (xv(c, t) * s2 / a - s * s / (a * a));
      }
    }
    if (need_x) g.accumulate(x, dx);
    if (need_a) g.accumulate(alpha, da);
  });
}

Var concat_channels(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  const Index cols = parts.front().cols();
  Index rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw ShapeError("concat_channels: length mismatch");
    rows += p.rows();
  }
  Mat v(rows, cols);
  Index r = 0;
  for (const Var& p : parts) {
    v.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts.front().graph->make("concat", std::move(v), parts, [inputs](Graph& g, const Mat& gy) {
    Index r = 0;
    for (const Var& p : inputs) {
      const Index n = p.value().rows();
      g.accumulate(p, gy.middleRows(r, n));
      r += n;
    }
  });
}

Var slice_time(Var a, Index start, Index length) {
  if (start < 0 || length < 0 || start + length > a.cols()) throw ShapeError("slice_time: out of range");
  return a.graph->make("slice_time", a.value().middleCols(start, length), {a},
                       [a, start, length](Graph& g, const Mat& gy) {
                         Mat& buf = g.grad_buffer(a);
                         buf.middleCols(start, length) += gy;
                       });
}

Var scale_rows(Var a, const Vec& factors) {
  if (factors.size() != a.rows()) throw ShapeError("scale_rows: factor count mismatch");
  return a.graph->make("scale_rows", factors.asDiagonal() * a.value(), {a},
                       [a, factors](Graph& g, const Mat& gy) { g.accumulate(a, factors.asDiagonal() * gy); });
}

Var conv1d(Var x, Var weight, Var bias, Index kernel, const ConvOptions& opt) {
  const Mat& xv = x.value();
  const Mat& wv = weight.value();
  if (opt.stride < 1 || opt.dilation < 1) throw std::invalid_argument("conv1d: stride and dilation must be positive");
  if (kernel < 1 || opt.groups < 1) throw std::invalid_argument("conv1d: bad kernel or groups");
  if (xv.rows() % opt.groups != 0 || wv.rows() % opt.groups != 0) {
    throw ShapeError("conv1d: channels not divisible by groups");
  }
  const Index in_g = xv.rows() / opt.groups;
  if (wv.cols() != kernel * in_g) throw ShapeError("conv1d: input channel mismatch");
  if (bias.valid() && (bias.rows() != wv.rows() || bias.cols() != 1)) throw ShapeError("conv1d: bias shape");
  if (xv.cols() < 1) throw ShapeError("conv1d: empty input");

  const kernels::ConvGeometry geom{kernel, opt.stride, opt.dilation, opt.groups};
  const Mat xp = pad_for(xv, opt.padding, geom.span());
  if (xp.cols() < geom.span()) throw ShapeError("conv1d: kernel longer than padded input");
  Mat y = kernels::conv1d_valid<double>(xp, wv, bias.valid() ? &bias.value() : nullptr, geom);

  auto backward = [x, weight, bias, geom, padding = opt.padding](Graph& g, const Mat& gy) {
    const Mat& xv = x.value();
    const Mat& wv = weight.value();
    const Mat xp = pad_for(xv, padding, geom.span());
    const Index out_len = gy.cols();
    const Index in_ch = xv.rows();
    const Index in_g = in_ch / geom.groups;
    const Index out_g = wv.rows() / geom.groups;
    const bool need_x = g.requires_grad(x);
    const bool need_w = g.requires_grad(weight);
    const bool depthwise = geom.groups == in_ch && geom.groups == wv.rows();
    Mat dxp;
    if (need_x) dxp = Mat::Zero(xp.rows(), xp.cols());
    Mat dw;
    if (need_w) dw = Mat::Zero(wv.rows(), wv.cols());
    using StridedMut = Eigen::Map<Mat, 0, Eigen::OuterStride<>>;
    for (Index tap = 0; tap < geom.kernel; ++tap) {
      const Index start = tap * geom.dilation;
      if (depthwise) {
        auto x_tap = kernels::strided_columns(xp, 0, in_ch, start, geom.stride, out_len);
        if (need_w) dw.col(tap) += (gy.array() * x_tap.array()).rowwise().sum().matrix();
        if (need_x) {
          StridedMut d_tap(dxp.data() + start * in_ch, in_ch, out_len, Eigen::OuterStride<>(geom.stride * in_ch));
          d_tap.array() += gy.array().colwise() * wv.col(tap).array();
        }
        continue;
      }
      for (Index grp = 0; grp < geom.groups; ++grp) {
        auto x_tap = kernels::strided_columns(xp, grp * in_g, in_g, start, geom.stride, out_len);
        const auto gy_g = gy.middleRows(grp * out_g, out_g);
        if (need_w) dw.block(grp * out_g, tap * in_g, out_g, in_g).noalias() += gy_g * x_tap.transpose();
        if (need_x) {
          StridedMut d_tap(dxp.data() + start * in_ch + grp * in_g, in_g, out_len,
                           Eigen::OuterStride<>(geom.stride * in_ch));
          d_tap.noalias() += wv.block(grp * out_g, tap * in_g, out_g, in_g).transpose() * gy_g;
        }
      }
    }
    if (need_w) g.accumulate(weight, dw);
    if (bias.valid()) g.accumulate(bias, gy.rowwise().sum());
    if (need_x) {
      const Index pad = geom.span() - 1;
      switch (padding) {
        case Padding::CausalReplicate: {
          Mat dx = dxp.rightCols(xv.cols());
          if (pad > 0) dx.col(0) += dxp.leftCols(pad).rowwise().sum();
          g.accumulate(x, dx);
          break;
        }
        case Padding::SameZero:
          g.accumulate(x, dxp.middleCols(pad / 2, xv.cols()));
          break;
        case Padding::None:
          g.accumulate(x, dxp);
          break;
      }
    }
  };
  return x.graph->make("conv1d", std::move(y), {x, weight, bias}, std::move(backward));
}

Var pointwise_conv(Var x, Var weight, Var bias) {
  return conv1d(x, weight, bias, 1, ConvOptions{1, 1, 1, Padding::None});
}

Var max_pool_causal(Var x, Index window) {
  if (window < 1) throw std::invalid_argument("max_pool_causal: window must be >= 1");
  const Mat xp = kernels::pad_replicate_left(x.value(), window - 1);
  Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic> argmax;
  Mat y = kernels::sliding_max_valid<double>(xp, window, &argmax);
  return x.graph->make("max_pool", std::move(y), {x}, [x, window, argmax = std::move(argmax)](Graph& g, const Mat& gy) {
    Mat& dx = g.grad_buffer(x);
    for (Index t = 0; t < gy.cols(); ++t) {
      for (Index c = 0; c < gy.rows(); ++c) {
        const Index src = std::max<Index>(argmax(c, t) - (window - 1), 0);
        dx(c, src) += gy(c, t);
      }
    }
  });
}

Var avg_pool_causal(Var x, Index window) {
  if (window < 1) throw std::invalid_argument("avg_pool_causal: window must be >= 1");
  const Mat xp = kernels::pad_replicate_left(x.value(), window - 1);
  Mat y = kernels::sliding_mean_valid<double>(xp, window);
  return x.graph->make("avg_pool", std::move(y), {x}, [x, window](Graph& g, const Mat& gy) {
    const Index n = gy.cols();
    Mat dxp = Mat::Zero(gy.rows(), n + window - 1);
    const Mat share = gy / static_cast<double>(window);
    for (Index t = 0; t < n; ++t) {
      for (Index j = 0; j < window; ++j) dxp.col(t + j) += share.col(t);
    }
    Mat dx = dxp.rightCols(n);
    if (window > 1) dx.col(0) += dxp.leftCols(window - 1).rowwise().sum();
    g.accumulate(x, dx);
  });
}

Var instance_norm(Var x, double eps) {
  const Mat& xv = x.value();
  if (xv.cols() < 1) throw ShapeError("instance_norm: empty input");
  const double n = static_cast<double>(xv.cols());
  Vec inv(xv.rows());
  Mat y(xv.rows(), xv.cols());
  for (Index c = 0; c < xv.rows(); ++c) {
    const double mean = xv.row(c).sum() / n;
    const auto centered = (xv.row(c).array() - mean).eval();
    inv(c) = 1.0 / std::sqrt(centered.square().sum() / n + eps);
    y.row(c) = centered * inv(c);
  }
  Mat y_copy = y;
  return x.graph->make("instance_norm", std::move(y), {x},
                       [x, inv, xhat = std::move(y_copy)](Graph& g, const Mat& gy) {
                         const double n = static_cast<double>(gy.cols());
                         Mat dx(gy.rows(), gy.cols());
                         for (Index c = 0; c < gy.rows(); ++c) {
                           const double mg = gy.row(c).sum() / n;
                           const double mgx = gy.row(c).dot(xhat.row(c)) / n;
                           dx.row(c) = inv(c) * (gy.row(c).array() - mg - xhat.row(c).array() * mgx);
                         }
                         g.accumulate(x, dx);
                       });
}

Var channel_norm(Var x, Var gamma, Var beta, double eps) {
  const Mat& xv = x.value();
  if (gamma.rows() != xv.rows() || beta.rows() != xv.rows()) throw ShapeError("channel_norm: affine shape");
  Mat y = kernels::channel_norm<double>(xv, gamma.value(), beta.value(), eps);
  return x.graph->make("channel_norm", std::move(y), {x, gamma, beta}, [x, gamma, beta, eps](Graph& g, const Mat& gy) {
    const Mat& xv = x.value();
    const auto gam = gamma.value().col(0).array();
    const double n = static_cast<double>(xv.rows());
    Mat dx(xv.rows(), xv.cols());
    Vec dgamma = Vec::Zero(xv.rows());
    for (Index t = 0; t < xv.cols(); ++t) {
      const double mean = xv.col(t).sum() / n;
      const auto centered = (xv.col(t).array() - mean).eval();
      const double inv = 1.0 / std::sqrt(centered.square().sum() / n + eps);
      const auto xhat = (centered * inv).eval();
      dgamma.array() += gy.col(t).array() * xhat;
      const auto gh = (gy.col(t).array() * gam).eval();
      const double mg = gh.sum() / n;
      const double mgx = (gh * xhat).sum() / n;
      dx.col(t) = (inv * (gh - mg - xhat * mgx)).matrix();
    }
    g.accumulate(x, dx);
    g.accumulate(gamma, dgamma);
    g.accumulate(beta, gy.rowwise().sum());
  });
}

Var linear_upsample(Var x, Index rate) {
  if (rate < 1) throw std::invalid_argument("linear_upsample: rate must be >= 1");
  Mat y = kernels::linear_upsample<double>(x.value(), rate);
  return x.graph->make("linear_upsample", std::move(y), {x}, [x, rate](Graph& g, const Mat& gy) {
    const Index n = x.cols();
    Mat dx = Mat::Zero(x.rows(), n);
    for (Index t = 0; t < n; ++t) {
      const Index next = std::min(t + 1, n - 1);
      for (Index j = 0; j < rate; ++j) {
        const double w = static_cast<double>(j) / static_cast<double>(rate);
        dx.col(t) += (1.0 - w) * gy.col(t * rate + j);
        dx.col(next) += w * gy.col(t * rate + j);
      }
    }
    g.accumulate(x, dx);
  });
}

Var local_attention(Var q, Var k, Var v, Var bias, Index heads, Index window) {
  if (window < 1) throw std::invalid_argument("local_attention: window must be >= 1");
  if (heads < 1 || q.rows() % heads != 0) throw ShapeError("local_attention: channels not divisible by heads");
  require_same_shape(q.value(), k.value(), "local_attention");
  require_same_shape(q.value(), v.value(), "local_attention");
  if (bias.rows() != heads || bias.cols() < window) throw ShapeError("local_attention: bias table shape");
  std::vector<Mat> weights;
  Mat y = kernels::local_attention<double>(q.value(), k.value(), v.value(), bias.value(), heads, window,
                                           &weights);
  return q.graph->make("local_attention", std::move(y), {q, k, v, bias},
                       [q, k, v, bias, heads, window, weights = std::move(weights)](Graph& g, const Mat& gy) {
                         const Mat& qv = q.value();
                         const Mat& kv = k.value();
                         const Mat& vv = v.value();
                         const Index head_dim = qv.rows() / heads;
                         const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
                         Mat dq = Mat::Zero(qv.rows(), qv.cols());
                         Mat dk = Mat::Zero(kv.rows(), kv.cols());
                         Mat dv = Mat::Zero(vv.rows(), vv.cols());
                         Mat db = Mat::Zero(bias.rows(), bias.cols());
                         Vec da(window);
                         for (Index h = 0; h < heads; ++h) {
                           const Index r0 = h * head_dim;
                           for (Index i = 0; i < qv.cols(); ++i) {
                             const Index first = std::max<Index>(0, i - window + 1);
                             const Index count = i - first + 1;
                             const auto go = gy.col(i).segment(r0, head_dim);
                             double dot = 0;
                             for (Index j = 0; j < count; ++j) {
                               const double a = weights[h](j, i);
                               da(j) = go.dot(vv.col(first + j).segment(r0, head_dim));
                               dot += a * da(j);
                               dv.col(first + j).segment(r0, head_dim) += a * go;
                             }
                             for (Index j = 0; j < count; ++j) {
                               const double ds = weights[h](j, i) * (da(j) - dot);
                               dq.col(i).segment(r0, head_dim) += ds * scale * kv.col(first + j).segment(r0, head_dim);
                               dk.col(first + j).segment(r0, head_dim) += ds * scale * qv.col(i).segment(r0, head_dim);
                               db(h, i - first - j) += ds;
                             }
                           }
                         }
                         g.accumulate(q, dq);
                         g.accumulate(k, dk);
                         g.accumulate(v, dv);
                         g.accumulate(bias, db);
                       });
}

Var round_straight_through(Var a) {
  Mat v = a.value().unaryExpr([](double x) { return std::floor(x + 0.5); });
  return a.graph->make("round_st", std::move(v), {a}, [a](Graph& g, const Mat& gy) { g.accumulate(a, gy); });
}

Var sum_all(Var a) {
  return a.graph->make("sum_all", Mat::Constant(1, 1, a.value().sum()), {a}, [a](Graph& g, const Mat& gy) {
    g.accumulate(a, Mat::Constant(a.rows(), a.cols(), gy(0, 0)));
  });
}

Var mean_abs_diff(Var a, const Mat& target) {
  require_same_shape(a.value(), target, "mean_abs_diff");
  if (target.size() == 0) throw ShapeError("mean_abs_diff: empty input");
  const double n = static_cast<double>(target.size());
  const double value = (a.value() - target).cwiseAbs().sum() / n;
  return a.graph->make("mean_abs_diff", Mat::Constant(1, 1, value), {a}, [a, target, n](Graph& g, const Mat& gy) {
    const Mat d = a.value() - target;
    g.accumulate(a, d.unaryExpr([s = gy(0, 0) / n](double v) { return v > 0 ? s : (v < 0 ? -s : 0.0); }));
  });
}

Var l2_distance(Var a, const Mat& target) {
  require_same_shape(a.value(), target, "l2_distance");
  const double value = (a.value() - target).norm();
  return a.graph->make("l2_distance", Mat::Constant(1, 1, value), {a}, [a, target, value](Graph& g, const Mat& gy) {
    if (value == 0.0) return;
    g.accumulate(a, (a.value() - target) * (gy(0, 0) / value));
  });
}

Var l2_norm(Var a) {
  const double value = a.value().norm();
  return a.graph->make("l2_norm", Mat::Constant(1, 1, value), {a}, [a, value](Graph& g, const Mat& gy) {
    if (value == 0.0) return;
    g.accumulate(a, a.value() * (gy(0, 0) / value));
  });
}

Var add_scalars(std::span<const Var> terms) {
  if (terms.empty()) throw ShapeError("add_scalars: no terms");
  double total = 0;
  for (const Var& t : terms) total += t.scalar();
  std::vector<Var> inputs(terms.begin(), terms.end());
  return terms.front().graph->make("add_scalars", Mat::Constant(1, 1, total), terms, [inputs](Graph& g, const Mat& gy) {
    for (const Var& t : inputs) g.accumulate(t, gy);
  });
}

Var clamp_loss(Var loss, double cap) {
  if (!(cap > 0)) throw std::invalid_argument("clamp_loss: cap must be positive");
  const double l = loss.scalar();
  if (l < cap) {
    return loss.graph->make("clamp_loss", Mat::Constant(1, 1, l), {loss},
                            [loss](Graph& g, const Mat& gy) { g.accumulate(loss, gy); });
  }
  const double factor = cap / l;
  return loss.graph->make("clamp_loss", Mat::Constant(1, 1, cap), {loss},
                          [loss, factor](Graph& g, const Mat& gy) { g.accumulate(loss, gy * factor); });
}

}  // namespace l3ac
