#include "l3ac/tensor.hpp"

#include <numeric>

namespace l3ac {

Parameter::Parameter(std::string id, std::vector<Index> shape, Mat value_in, bool trainable_in)
    : value(std::move(value_in)), trainable(trainable_in), id_(std::move(id)), shape_(std::move(shape)) {
  const Index expected =
      std::accumulate(shape_.begin(), shape_.end(), Index{1}, std::multiplies<Index>());
  if (shape_.empty() || expected != value.size()) {
    throw ShapeError("parameter '" + id_ + "': shape does not match data length");
  }
  if (value.rows() != shape_.front()) {
    throw ShapeError("parameter '" + id_ + "': leading dimension must be the row count");
  }
}

void Parameter::zero_grad() {
  if (grad.size() != value.size()) grad.resize(value.rows(), value.cols());
  grad.setZero();
}

Mat& Parameter::ensure_grad() {
  if (!has_grad()) zero_grad();
  return grad;
}

Parameter& ParameterSet::add(std::string id, std::vector<Index> shape, Mat value, bool trainable) {
  if (by_id_.contains(id)) throw std::invalid_argument("duplicate parameter id '" + id + "'");
  auto p = std::make_unique<Parameter>(id, std::move(shape), std::move(value), trainable);
  by_id_.emplace(std::move(id), params_.size());
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter* ParameterSet::find(std::string_view id) {
  auto it = by_id_.find(std::string(id));
  return it == by_id_.end() ? nullptr : params_[it->second].get();
}

const Parameter* ParameterSet::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  return it == by_id_.end() ? nullptr : params_[it->second].get();
}

bool ParameterSet::contains(const Parameter* p) const {
  for (const auto& q : params_) {
    if (q.get() == p) return true;
  }
  return false;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

Index ParameterSet::count() const {
  Index n = 0;
  for (const auto& p : params_) {
    if (p->trainable) n += p->numel();
  }
  return n;
}

void copy_values(const ParameterSet& src, ParameterSet& dst) {
  if (src.size() != dst.size()) throw ShapeError("parameter count mismatch");
  for (const auto& p : src) {
    Parameter* q = dst.find(p->id());
    if (q == nullptr) throw ShapeError("missing parameter '" + p->id() + "'");
    if (q->shape() != p->shape()) throw ShapeError("shape mismatch for '" + p->id() + "'");
    q->value = p->value;
  }
}

}  // namespace l3ac
