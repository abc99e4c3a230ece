#pragma once

#include "l3ac/autodiff.hpp"

#include <cstdint>
#include <functional>

namespace l3ac {

/// Builds a computation on `g` from the input leaf and returns its output.
using GraphFn = std::function<Var(Graph& g, Var input)>;

struct GradCheckOptions {
  double step = 1e-5;
  /// Parameters whose gradients are checked in addition to the input.
  std::vector<Parameter*> params;
  /// Input coordinates (column-major flat index) to leave out, e.g. points
  /// within reach of a max-pool tie or a rounding boundary.
  std::function<bool(Index)> skip_input;
  /// Denominator floor of the relative error.
  double floor = 1e-6;
  std::uint64_t seed = 7;
};

struct GradCheckResult {
  double max_rel_error = 0;
  Index checked = 0;
  /// Which coordinate was worst: "input[i]" or "<param id>[i]".
  std::string worst;
};

/// Compares reverse-mode gradients with central differences. Non-scalar
/// outputs are reduced by a fixed random projection. Throws NumericalError if
/// any evaluation is non-finite.
GradCheckResult grad_check(const GraphFn& f, const Mat& input, const GradCheckOptions& opt = {});

/// As above, but finite differences are taken of `reference` while the
/// analytic gradient comes from `analytic` (used for straight-through paths).
GradCheckResult grad_check(const GraphFn& analytic, const GraphFn& reference, const Mat& input,
                           const GradCheckOptions& opt = {});

}  // namespace l3ac
