#include "brushplan/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace brushplan {

FirstOrderOptimizer::FirstOrderOptimizer(OptimizerKind kind, std::size_t size)
    : first_moment(size, 0.0), second_moment(size, 0.0), kind_(kind) {}

void FirstOrderOptimizer::step(std::span<double> params, std::span<const double> grad,
                               std::span<const double> learning_rates) {
  if (params.size() != first_moment.size() || grad.size() != params.size() ||
      learning_rates.size() != params.size()) {
    throw std::invalid_argument("optimizer: parameter, gradient and rate sizes differ");
  }
  ++steps_;
  if (kind_ == OptimizerKind::kSgd) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= learning_rates[i] * grad[i];
    return;
  }
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(beta1_, t);
  const double c2 = 1.0 - std::pow(beta2_, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    first_moment[i] = beta1_ * first_moment[i] + (1.0 - beta1_) * grad[i];
    second_moment[i] = beta2_ * second_moment[i] + (1.0 - beta2_) * grad[i] * grad[i];
    const double mhat = first_moment[i] / c1;
    const double vhat = second_moment[i] / c2;
    params[i] -= learning_rates[i] * mhat / (std::sqrt(vhat) + epsilon_);
  }
}

}  // namespace brushplan
