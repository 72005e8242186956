#include "brushplan/ad/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace brushplan::ad {

double value_of(const ScalarFn& fn, const Tensor& input) {
  Graph g;
  return fn(g, g.constant(input)).value().item();
}

Tensor gradient_of(const ScalarFn& fn, const Tensor& input) {
  Graph g;
  Var x = g.leaf(input);
  g.backward(fn(g, x));
  return g.grad(x);
}

GradCheckReport check_gradients(const ScalarFn& fn, const Tensor& input, double step,
                                double tolerance, const GradCheckOptions& options) {
  GradCheckReport report;
  const Tensor analytic = gradient_of(fn, input);
  report.analytic = analytic.to_vector();
  report.numeric.assign(input.size(), std::numeric_limits<double>::quiet_NaN());

  std::vector<std::size_t> order(input.size());
  std::iota(order.begin(), order.end(), 0);
  if (options.max_elements && options.max_elements < order.size()) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(options.max_elements);
    std::sort(order.begin(), order.end());
  }

  const double f0 = value_of(fn, input);
  std::vector<double> probe = input.to_vector();
  const auto eval_at = [&](std::size_t i, double x) {
    const double saved = probe[i];
    probe[i] = x;
    const double v = value_of(fn, Tensor(input.shape(), probe));
    probe[i] = saved;
    return v;
  };

  // A kink within two steps breaks the central difference. For smooth f the
  // one-sided slope gap scales linearly with the step and the central
  // difference is step-insensitive; both hold together only without a kink.
  constexpr double kRoundoff = 8.0 * std::numeric_limits<double>::epsilon();
  for (std::size_t i : order) {
    const double fp = eval_at(i, input[i] + step);
    const double fm = eval_at(i, input[i] - step);
    const double fp2 = eval_at(i, input[i] + 2.0 * step);
    const double fm2 = eval_at(i, input[i] - 2.0 * step);
    const double numeric = (fp - fm) / (2.0 * step);
    const double numeric2 = (fp2 - fm2) / (4.0 * step);
    const double gap = (fp - 2.0 * f0 + fm) / step;
    const double gap2 = (fp2 - 2.0 * f0 + fm2) / (2.0 * step);
    const double slope = std::max({std::abs(numeric), std::abs(numeric2), options.abs_floor});
    const double noise =
        kRoundoff * (std::abs(f0) + std::abs(fp) + std::abs(fm) + std::abs(fp2) + std::abs(fm2)) /
        step;
    const double threshold = 0.25 * tolerance * slope + noise;
    if (std::abs(gap2 - 2.0 * gap) > threshold || std::abs(numeric2 - numeric) > threshold) {
      ++report.excluded;
      continue;
    }
    report.numeric[i] = numeric;
    const double a = analytic[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), options.abs_floor});
    const double rel = std::abs(a - numeric) / denom;
    ++report.checked;
    if (rel > report.max_rel_error || !std::isfinite(rel)) {
      report.max_rel_error = std::isfinite(rel) ? rel : std::numeric_limits<double>::infinity();
      report.worst_index = i;
    }
  }
  report.passed = report.max_rel_error < tolerance;
  return report;
}

}  // namespace brushplan::ad
