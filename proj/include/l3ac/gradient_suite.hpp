#pragma once

// The fixed set of finite-difference checks run by `l3ac grad-check` and the
// acceptance harness.

#include "l3ac/grad_check.hpp"

#include <string>
#include <vector>

namespace l3ac {

struct GradSuiteEntry {
  std::string name;
  GradCheckResult result;
};

/// Names in run order.
std::vector<std::string> gradient_suite_names();

/// Runs the named cases (all when `only` is empty). Throws std::out_of_range
/// on an unknown name.
std::vector<GradSuiteEntry> run_gradient_suite(const std::vector<std::string>& only = {}, std::uint64_t seed = 11);

}  // namespace l3ac
