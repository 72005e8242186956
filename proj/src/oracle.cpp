#include "brushplan/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace brushplan {

double StrokeStamp::ink_mass() const {
  const auto d = magnitude.data();
  return std::accumulate(d.begin(), d.end(), 0.0);
}

OracleDraw OracleDraw::sample(const OracleNoise& noise, std::mt19937_64& rng) {
  OracleDraw draw;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  draw.depletion = noise.depletion_max * unit(rng);
  draw.width_scale = 1.0 + noise.width_jitter * (2.0 * unit(rng) - 1.0);
  return draw;
}

StrokeStamp oracle_render_stroke(const StrokeShape& shape, const StampGeometry& geometry,
                                 const OracleDraw& draw, const OracleBrush& brush) {
  constexpr std::size_t kSamples = 65;
  const auto path = bezier_trajectory(shape, kSamples);
  const double mpp = geometry.meters_per_pixel;
  const double soft = std::max(brush.edge_softness, 1e-12);

  // Bounding box of anything the ribbon can touch, in meters.
  double reach = 0.0;
  double ymin = 0.0, ymax = 0.0;
  for (const auto& p : path) {
    reach = std::max(reach, brush.full_press_half_width * p.pressure * draw.width_scale);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  reach += 0.5 * soft;

  std::vector<double> out(geometry.rows * geometry.cols, 0.0);
  for (std::size_t r = 0; r < geometry.rows; ++r) {
    const double py = (static_cast<double>(r) - geometry.origin_row) * mpp;
    if (py < ymin - reach || py > ymax + reach) continue;
    for (std::size_t c = 0; c < geometry.cols; ++c) {
      const double px = (static_cast<double>(c) - geometry.origin_col) * mpp;
      if (px < -reach || px > shape.l + reach) continue;
      double best = 0.0;
      for (std::size_t k = 0; k + 1 < kSamples; ++k) {
        const auto& a = path[k];
        const auto& b = path[k + 1];
        const double ex = b.x - a.x, ey = b.y - a.y;
        const double len2 = ex * ex + ey * ey;
        double u = len2 > 0.0 ? ((px - a.x) * ex + (py - a.y) * ey) / len2 : 0.0;
        u = std::clamp(u, 0.0, 1.0);
        const double dx = px - (a.x + u * ex), dy = py - (a.y + u * ey);
        const double dist = std::sqrt(dx * dx + dy * dy);
        const double t = (static_cast<double>(k) + u) / static_cast<double>(kSamples - 1);
        const double half_width =
            brush.full_press_half_width * pressure_at(shape, t) * draw.width_scale;
        const double coverage = std::clamp((half_width - dist) / soft + 0.5, 0.0, 1.0);
        best = std::max(best, coverage * (1.0 - draw.depletion * t));
      }
      out[r * geometry.cols + c] = best;
    }
  }
  return {ad::Tensor({geometry.rows, geometry.cols}, std::move(out)), geometry};
}

StrokeStamp oracle_render_stroke(const StrokeShape& shape, const StampGeometry& geometry,
                                 const OracleNoise& noise, std::mt19937_64& rng,
                                 const OracleBrush& brush) {
  return oracle_render_stroke(shape, geometry, OracleDraw::sample(noise, rng), brush);
}

}  // namespace brushplan
