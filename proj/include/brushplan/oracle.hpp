#pragma once

#include <cstdint>
#include <random>

#include "brushplan/ad/tensor.hpp"
#include "brushplan/stroke.hpp"

namespace brushplan {

/// Pixel grid of a stroke stamp. The stroke starts at (origin_col,
/// origin_row) in pixel-centre coordinates and travels along +col; rows
/// grow in the +b direction.
struct StampGeometry {
  std::size_t rows = 32;
  std::size_t cols = 64;
  double meters_per_pixel = 0.0014;
  double origin_col = 5.0;
  double origin_row = 15.5;

  bool operator==(const StampGeometry&) const = default;
};

/// Single-channel ink coverage in [0,1], shape [rows, cols].
struct StrokeStamp {
  ad::Tensor magnitude;
  StampGeometry geometry;

  double ink_mass() const;
};

/// Physical brush used by the oracle rasterizer.
struct OracleBrush {
  double full_press_half_width = 0.0035;  // meters at h = 1
  double edge_softness = 0.004;           // meters of linear coverage falloff
};

/// Per-stroke disturbances of a real brush.
struct OracleNoise {
  double depletion_max = 0.4;    // paint fade (1 - d t), d ~ U[0, depletion_max]
  double width_jitter = 0.1;     // half-width scaled by U[1 - j, 1 + j]

  static OracleNoise none() { return {0.0, 0.0}; }
};

/// Concrete draw of the noise for one stroke.
struct OracleDraw {
  double depletion = 0.0;
  double width_scale = 1.0;

  static OracleDraw sample(const OracleNoise& noise, std::mt19937_64& rng);
};

/// Analytic ground-truth stroke: the Bezier path rasterized as a ribbon whose
/// half-width follows the pressure profile, faded along the path by paint
/// depletion. Deterministic for a fixed draw.
StrokeStamp oracle_render_stroke(const StrokeShape& shape, const StampGeometry& geometry,
                                 const OracleDraw& draw = {}, const OracleBrush& brush = {});

/// Convenience overload drawing the noise from `rng`.
StrokeStamp oracle_render_stroke(const StrokeShape& shape, const StampGeometry& geometry,
                                 const OracleNoise& noise, std::mt19937_64& rng,
                                 const OracleBrush& brush = {});

}  // namespace brushplan
