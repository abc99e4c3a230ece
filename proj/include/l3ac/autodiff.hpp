#pragma once

// Tape-based reverse-mode differentiation over channel x time blocks.
//
// A Graph records one forward evaluation. Each op appends a node holding its
// value and, when recording and some input needs a gradient, a closure that
// pushes the node's gradient back to its inputs. Graph::backward walks the tape
// in reverse and finally accumulates leaf gradients into Parameter::grad.
//
// Non-smooth points follow the lesser-index convention: |x| has derivative 0
// at 0, max-pool ties route to the earliest column, rounding uses the
// straight-through derivative.

#include "l3ac/kernels.hpp"
#include "l3ac/tensor.hpp"

#include <functional>
#include <optional>
#include <span>
#include <unordered_set>

namespace l3ac {

class Graph;

/// Handle to a node in a Graph.
struct Var {
  Graph* graph = nullptr;
  int id = -1;

  bool valid() const { return graph != nullptr && id >= 0; }
  const Mat& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  /// Value of a 1x1 node.
  double scalar() const;
};

class Graph {
 public:
  using Backward = std::function<void(Graph&, const Mat& out_grad)>;

  /// With record=false no closures are stored and backward() is unavailable.
  explicit Graph(bool record = true) : record_(record) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return record_; }

  /// A leaf holding data; requires_grad makes it collect a gradient.
  Var input(Mat value, bool requires_grad = false);
  /// A leaf bound to a parameter. Frozen or non-trainable parameters are
  /// constants.
  Var param(Parameter& p);
  /// Parameters in `set` are treated as constants from now on.
  void freeze(const ParameterSet& set);

  /// Appends an op node. `fn` is kept only if recording and any parent
  /// requires a gradient.
  Var make(const char* op, Mat value, std::initializer_list<Var> parents, Backward fn);
  Var make(const char* op, Mat value, std::span<const Var> parents, Backward fn);

  const Mat& value(Var v) const { return nodes_[v.id].value; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  /// Gradient of a node after backward(); empty if none reached it.
  const Mat& grad(Var v) const { return nodes_[v.id].grad; }
  const char* op_name(Var v) const { return nodes_[v.id].op; }

  /// Adds `delta` into v's gradient if v requires one.
  template <typename Derived>
  void accumulate(Var v, const Eigen::MatrixBase<Derived>& delta) {
    Node& n = nodes_[v.id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = delta;
    } else {
      n.grad += delta;
    }
  }
  /// Mutable gradient buffer for scattered writes; allocated as zeros.
  Mat& grad_buffer(Var v);

  /// Reverse pass from a 1x1 node with seed gradient `seed`.
  void backward(Var root, double seed = 1.0);

  std::size_t size() const { return nodes_.size(); }
  /// First node (in creation order) holding a non-finite value, if any.
  std::optional<Var> first_non_finite();

 private:
  struct Node {
    const char* op = "";
    Mat value;
    Mat grad;
    Backward backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };

  bool record_;
  std::vector<Node> nodes_;
  std::unordered_set<const Parameter*> frozen_;
};

enum class Padding { CausalReplicate, SameZero, None };

struct ConvOptions {
  Index stride = 1;
  Index dilation = 1;
  Index groups = 1;
  Padding padding = Padding::CausalReplicate;
};

/// Pads a signal for a conv of the given geometry.
template <typename Scalar>
Signal<Scalar> pad_for(const Signal<Scalar>& x, Padding padding, Index span) {
  switch (padding) {
    case Padding::CausalReplicate:
      return kernels::pad_replicate_left(x, span - 1);
    case Padding::SameZero:
      return kernels::pad_zero_centered(x, span - 1);
    case Padding::None:
      break;
  }
  return x;
}

// Elementwise and structural ops.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_constant(Var a, const Mat& c);
Var abs(Var a);
Var gelu(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
Var leaky_relu(Var a, double slope);
/// x + sin^2(alpha x)/alpha with alpha a per-channel column (channels x 1).
Var snake(Var x, Var alpha);
Var concat_channels(std::span<const Var> parts);
Var slice_time(Var a, Index start, Index length);
/// Multiplies each row by a per-row constant.
Var scale_rows(Var a, const Vec& factors);

/// Grouped 1-D convolution. weight: out x (k*in/groups) tap-major; bias:
/// out x 1 or an invalid Var for none.
Var conv1d(Var x, Var weight, Var bias, Index kernel, const ConvOptions& opt);
Var pointwise_conv(Var x, Var weight, Var bias);

/// Causal sliding max/mean over `window` columns with left replicate padding.
Var max_pool_causal(Var x, Index window);
Var avg_pool_causal(Var x, Index window);

Var instance_norm(Var x, double eps);
/// Layer norm across channels at every time step, then gamma/beta.
Var channel_norm(Var x, Var gamma, Var beta, double eps);
Var linear_upsample(Var x, Index rate);

/// Sliding-window causal attention on already projected q, k, v.
Var local_attention(Var q, Var k, Var v, Var bias, Index heads, Index window);

/// Forward rounds half up; backward passes the gradient through unchanged.
Var round_straight_through(Var a);

// Reductions to 1x1.
Var sum_all(Var a);
Var mean_abs_diff(Var a, const Mat& target);
/// Euclidean norm of (a - target) over all entries; gradient 0 at 0.
Var l2_distance(Var a, const Mat& target);
Var l2_norm(Var a);
Var add_scalars(std::span<const Var> terms);

/// Forward min(l, cap); above the cap the gradient is scaled by cap / l.
Var clamp_loss(Var loss, double cap);

}  // namespace l3ac
