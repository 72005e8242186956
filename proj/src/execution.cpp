#include "brushplan/execution.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "brushplan/ad/ops.hpp"
#include "brushplan/renderer.hpp"

namespace brushplan {

NoiseModel NoiseModel::scaled(double factor, std::uint64_t seed) {
  NoiseModel d;
  return {d.sigma_xy * factor, d.sigma_theta * factor, d.sigma_shape * factor,
          std::min(1.0, d.depletion_max * factor), d.sigma_rgb * factor, seed};
}

bool NoiseModel::is_zero() const {
  return sigma_xy == 0.0 && sigma_theta == 0.0 && sigma_shape == 0.0 && depletion_max == 0.0 &&
         sigma_rgb == 0.0;
}

void NoiseModel::validate() const {
  for (double v : {sigma_xy, sigma_theta, sigma_shape, depletion_max, sigma_rgb}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("noise model: magnitudes must be finite and >= 0");
  }
  if (depletion_max > 1.0) throw std::invalid_argument("noise model: depletion above 1");
}

Executor::Executor(Canvas canvas, NoiseModel noise, RenderMode mode, const StrokeShapeModel& model,
                   OracleBrush brush)
    : canvas_(std::move(canvas)), noise_(noise), mode_(mode), model_(&model), brush_(brush),
      rng_(noise.seed) {
  noise_.validate();
}

StrokeParams Executor::perturb(const StrokeParams& s, double& depletion) {
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  // Fixed draw order keeps runs reproducible whatever the magnitudes.
  const double e[9] = {n01(rng_), n01(rng_), n01(rng_), n01(rng_), n01(rng_),
                       n01(rng_), n01(rng_), n01(rng_), n01(rng_)};
  const double d = u01(rng_);
  StrokeParams r = s;
  r.x += noise_.sigma_xy * e[0];
  r.y += noise_.sigma_xy * e[1];
  r.theta += noise_.sigma_theta * e[2];
  r.shape.h *= 1.0 + noise_.sigma_shape * e[3];
  r.shape.l *= 1.0 + noise_.sigma_shape * e[4];
  r.shape.b *= 1.0 + noise_.sigma_shape * e[5];
  for (std::size_t c = 0; c < 3; ++c) r.color[c] += noise_.sigma_rgb * e[6 + c];
  depletion = noise_.depletion_max * d;
  // The robot cannot leave its workspace: shape and color saturate, the
  // pose may drift slightly off the canvas.
  r.shape = model_->limits.clamp(r.shape);
  r.theta = wrap_angle(r.theta);
  for (double& c : r.color) c = std::clamp(c, 0.0, 1.0);
  return r;
}

StrokeStamp Executor::stamp_for(const StrokeParams& realized, double depletion) {
  if (mode_ == RenderMode::kOracle) {
    OracleDraw draw;
    draw.depletion = depletion;
    return oracle_render_stroke(realized.shape, model_->geometry, draw, brush_);
  }
  StrokeStamp stamp = param2stroke_forward(*model_, realized.shape);
  if (depletion > 0.0) {
    // Fade along the stroke axis, as the oracle does along its path.
    const auto& g = stamp.geometry;
    std::vector<double> v = stamp.magnitude.to_vector();
    for (std::size_t r = 0; r < g.rows; ++r)
      for (std::size_t c = 0; c < g.cols; ++c) {
        const double along = (static_cast<double>(c) - g.origin_col) * g.meters_per_pixel;
        const double t = std::clamp(along / realized.shape.l, 0.0, 1.0);
        v[r * g.cols + c] *= 1.0 - depletion * t;
      }
    stamp.magnitude = ad::Tensor(stamp.magnitude.shape(), std::move(v));
  }
  return stamp;
}

const Canvas& Executor::execute(std::span<const StrokeParams> strokes) {
  for (const auto& s : strokes) {
    double depletion = 0.0;
    const StrokeParams realized = noise_.is_zero() ? s : perturb(s, depletion);
    Plan one;
    one.geometry = canvas_.geometry;
    one.strokes = {realized};
    if (mode_ == RenderMode::kModel && depletion == 0.0) {
      // Same arithmetic as the planner's simulation.
      canvas_ = render_plan(one, canvas_, *model_);
    } else {
      const StrokeStamp stamp = stamp_for(realized, depletion);
      canvas_ = render_with_stamps(one, std::span<const StrokeStamp>(&stamp, 1), canvas_);
    }
    log_.push_back({s, realized});
  }
  return canvas_;
}

Canvas Executor::perceive() const {
  Canvas snap = canvas_;
  if (distortion_) snap = apply_color_transform(*distortion_, snap);
  if (correction_) snap = apply_color_transform(*correction_, snap);
  return snap;
}

void Executor::export_log(const std::filesystem::path& path) const {
  Plan intended;
  intended.geometry = canvas_.geometry;
  std::vector<StrokeParams> realized;
  for (const auto& e : log_) {
    intended.strokes.push_back(e.intended);
    realized.push_back(e.realized);
  }
  write_plan(path, intended, &realized);
}

}  // namespace brushplan
