#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace brushplan {

enum class OptimizerKind { kSgd, kAdam };

/// First-order update over a flat parameter vector with a learning rate per
/// element. The moment buffers are public so callers can permute them
/// alongside the parameters they belong to.
class FirstOrderOptimizer {
 public:
  FirstOrderOptimizer(OptimizerKind kind, std::size_t size);

  void step(std::span<double> params, std::span<const double> grad,
            std::span<const double> learning_rates);

  OptimizerKind kind() const { return kind_; }
  std::size_t steps() const { return steps_; }

  std::vector<double> first_moment;
  std::vector<double> second_moment;

 private:
  OptimizerKind kind_;
  std::size_t steps_ = 0;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double epsilon_ = 1e-8;
};

}  // namespace brushplan
