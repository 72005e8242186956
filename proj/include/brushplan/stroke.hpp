#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace brushplan {

/// Brush pressure at the start and end of every stroke (light touch).
inline constexpr double kEndpointPressure = 0.2;

/// Stroke shape in robot terms: h is press depth as a fraction of full
/// press, l the travelled length and b the sideways bend, both in meters.
struct StrokeShape {
  double h = 0.5;
  double l = 0.03;
  double b = 0.0;

  bool operator==(const StrokeShape&) const = default;
};

struct ShapeLimits {
  double h_min = kEndpointPressure;
  double h_max = 1.0;
  double l_min = 0.01;
  double l_max = 0.05;
  double b_max = 0.02;

  bool contains(const StrokeShape& s) const;
  StrokeShape clamp(const StrokeShape& s) const;
};

using Rgb = std::array<double, 3>;

/// One brush stroke: shape, start position as canvas fractions, heading in
/// radians and paint color.
struct StrokeParams {
  StrokeShape shape;
  double x = 0.5;
  double y = 0.5;
  double theta = 0.0;
  Rgb color{0.0, 0.0, 0.0};

  bool operator==(const StrokeParams&) const = default;
};

/// Wraps an angle into [-pi, pi).
double wrap_angle(double theta);
/// Clamps position and color, wraps the angle and clamps the shape.
StrokeParams sanitize(const StrokeParams& p, const ShapeLimits& limits = {});
bool in_range(const StrokeParams& p, const ShapeLimits& limits = {});

/// Relative luminance used for light-to-dark ordering.
double luminance(const Rgb& c);

struct TrajectoryPoint {
  double x;         // meters along the stroke direction
  double y;         // meters of sideways offset
  double pressure;  // press depth fraction
};

/// Pressure at curve parameter t in [0,1]: endpoint value at both ends,
/// peak h at t = 0.5, linear in between.
double pressure_at(const StrokeShape& shape, double t);

/// Samples the stroke's cubic Bezier path (control points (0,0), (l/3,b),
/// (2l/3,b), (l,0)) at n evenly spaced parameters. Requires n >= 2.
std::vector<TrajectoryPoint> bezier_trajectory(const StrokeShape& shape, std::size_t n);

}  // namespace brushplan
