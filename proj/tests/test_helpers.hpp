#pragma once

#include "l3ac/tensor.hpp"

#include <random>

namespace testing {

inline l3ac::Mat randn(std::mt19937_64& rng, l3ac::Index rows, l3ac::Index cols, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  l3ac::Mat m(rows, cols);
  for (l3ac::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

inline double max_abs_diff(const l3ac::Mat& a, const l3ac::Mat& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace testing
