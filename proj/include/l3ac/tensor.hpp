#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace l3ac {

using Index = Eigen::Index;

/// A signal block: rows are channels, columns are time steps. Column-major, so
/// every time step is a contiguous channel vector.
template <typename Scalar>
using Signal = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Mat = Signal<double>;
using Vec = Eigen::VectorXd;

/// Thrown when a tensor holds NaN/Inf or a computation produced one.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown on shape or argument contract violations.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

/// Batch of signals sharing channel count and length.
template <typename Scalar>
struct Batch {
  std::vector<Signal<Scalar>> items;

  Index size() const { return static_cast<Index>(items.size()); }
  Index channels() const { return items.empty() ? 0 : items.front().rows(); }
  Index length() const { return items.empty() ? 0 : items.front().cols(); }
};

/// A named trainable tensor. `shape` is the logical shape (e.g. out x in x k for
/// a conv kernel); `value` stores it as rows = shape[0], cols = product of the
/// remaining dims, with the trailing dims flattened tap-major (see conv1d).
class Parameter {
 public:
  Parameter(std::string id, std::vector<Index> shape, Mat value, bool trainable = true);

  const std::string& id() const { return id_; }
  const std::vector<Index>& shape() const { return shape_; }
  Index numel() const { return value.size(); }

  void zero_grad();
  /// Allocates the gradient buffer if missing.
  Mat& ensure_grad();
  bool has_grad() const { return grad.size() == value.size() && value.size() > 0; }

  Mat value;
  Mat grad;
  bool trainable = true;

 private:
  std::string id_;
  std::vector<Index> shape_;
};

/// Owns parameters with stable addresses and unique ids, in insertion order.
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;
  ParameterSet(ParameterSet&&) = default;
  ParameterSet& operator=(ParameterSet&&) = default;

  Parameter& add(std::string id, std::vector<Index> shape, Mat value, bool trainable = true);
  Parameter* find(std::string_view id);
  const Parameter* find(std::string_view id) const;
  bool contains(const Parameter* p) const;

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad();
  /// Total scalar count of trainable parameters.
  Index count() const;

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

/// Copies `src` values into `dst` by id; throws if ids or shapes disagree.
void copy_values(const ParameterSet& src, ParameterSet& dst);

}  // namespace l3ac
