#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "brushplan/ad/graph.hpp"

namespace brushplan::ad {

/// Builds a scalar loss from a leaf on a fresh graph.
using ScalarFn = std::function<Var(Graph&, Var)>;

struct GradCheckOptions {
  /// Lower bound on the denominator of the relative error, so entries with
  /// negligible gradients are compared on an absolute scale.
  double abs_floor = 1e-6;
  /// Check at most this many elements (seeded random subset); 0 = all.
  std::size_t max_elements = 0;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  /// Elements where f has a kink within two steps (detected from f alone),
  /// so a central difference is not a valid reference there.
  std::size_t excluded = 0;
  bool passed = true;
  std::vector<double> analytic;
  std::vector<double> numeric;  // NaN for unchecked or excluded entries
};

/// Compares the reverse-mode gradient of fn at `input` against central
/// differences with the given step, element by element.
GradCheckReport check_gradients(const ScalarFn& fn, const Tensor& input, double step = 1e-5,
                                double tolerance = 1e-4, const GradCheckOptions& options = {});

/// Reverse-mode gradient of fn at `input`.
Tensor gradient_of(const ScalarFn& fn, const Tensor& input);
/// Scalar value of fn at `input`.
double value_of(const ScalarFn& fn, const Tensor& input);

}  // namespace brushplan::ad
