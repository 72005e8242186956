#include "brushplan/stroke.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace brushplan {

bool ShapeLimits::contains(const StrokeShape& s) const {
  return s.h >= h_min && s.h <= h_max && s.l >= l_min && s.l <= l_max && s.b >= -b_max &&
         s.b <= b_max;
}

StrokeShape ShapeLimits::clamp(const StrokeShape& s) const {
  return {std::clamp(s.h, h_min, h_max), std::clamp(s.l, l_min, l_max),
          std::clamp(s.b, -b_max, b_max)};
}

double wrap_angle(double theta) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double w = std::fmod(theta + std::numbers::pi, two_pi);
  if (w < 0.0) w += two_pi;
  w -= std::numbers::pi;
  return w >= std::numbers::pi ? -std::numbers::pi : w;
}

StrokeParams sanitize(const StrokeParams& p, const ShapeLimits& limits) {
  StrokeParams out = p;
  out.shape = limits.clamp(p.shape);
  out.x = std::clamp(p.x, 0.0, 1.0);
  out.y = std::clamp(p.y, 0.0, 1.0);
  out.theta = wrap_angle(p.theta);
  for (double& c : out.color) c = std::clamp(c, 0.0, 1.0);
  return out;
}

bool in_range(const StrokeParams& p, const ShapeLimits& limits) {
  const auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  return limits.contains(p.shape) && unit(p.x) && unit(p.y) && p.theta >= -std::numbers::pi &&
         p.theta < std::numbers::pi && unit(p.color[0]) && unit(p.color[1]) && unit(p.color[2]);
}

double luminance(const Rgb& c) { return 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]; }

double pressure_at(const StrokeShape& shape, double t) {
  const double ramp = t <= 0.5 ? t / 0.5 : (1.0 - t) / 0.5;
  return kEndpointPressure + (shape.h - kEndpointPressure) * ramp;
}

std::vector<TrajectoryPoint> bezier_trajectory(const StrokeShape& shape, std::size_t n) {
  if (n < 2) {
    throw std::invalid_argument("bezier_trajectory: need at least 2 samples, got " +
                                std::to_string(n));
  }
  const std::array<double, 4> cx{0.0, shape.l / 3.0, 2.0 * shape.l / 3.0, shape.l};
  const std::array<double, 4> cy{0.0, shape.b, shape.b, 0.0};
  std::vector<TrajectoryPoint> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(n - 1);
    const double s = 1.0 - t;
    const std::array<double, 4> basis{s * s * s, 3.0 * s * s * t, 3.0 * s * t * t, t * t * t};
    double x = 0.0, y = 0.0;
    for (int i = 0; i < 4; ++i) {
      x += basis[i] * cx[i];
      y += basis[i] * cy[i];
    }
    out.push_back({x, y, pressure_at(shape, t)});
  }
  return out;
}

}  // namespace brushplan
