#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "brushplan/calibration.hpp"
#include "brushplan/canvas.hpp"
#include "brushplan/oracle.hpp"
#include "brushplan/plan.hpp"
#include "brushplan/stroke_model.hpp"

namespace brushplan {

/// Per-stroke execution disturbances.
struct NoiseModel {
  double sigma_xy = 0.005;     // canvas fractions
  double sigma_theta = 0.02;   // radians
  double sigma_shape = 0.05;   // relative, on h, l, b
  double depletion_max = 0.3;  // fade (1 - d t), d ~ U[0, depletion_max]
  double sigma_rgb = 0.01;
  std::uint64_t seed = 0;

  static NoiseModel zero(std::uint64_t seed = 0) { return {0, 0, 0, 0, 0, seed}; }
  /// Every default magnitude multiplied by `factor`.
  static NoiseModel scaled(double factor, std::uint64_t seed = 0);
  bool is_zero() const;
  void validate() const;
};

enum class RenderMode { kOracle, kModel };

struct ExecutedStroke {
  StrokeParams intended;
  StrokeParams realized;
};

/// Software stand-in for the robot and camera: perturbs each stroke,
/// renders it with the oracle brush or the learned model and composites it
/// onto a persistent canvas.
class Executor {
 public:
  Executor(Canvas canvas, NoiseModel noise, RenderMode mode, const StrokeShapeModel& model,
           OracleBrush brush = {});

  /// Paints the strokes in order; returns the updated canvas.
  const Canvas& execute(std::span<const StrokeParams> strokes);
  /// Camera snapshot, passed through the camera color distortion and then
  /// the correction when configured.
  Canvas perceive() const;

  void set_camera_distortion(std::optional<ColorTransform> d) { distortion_ = d; }
  void set_color_correction(std::optional<ColorTransform> c) { correction_ = c; }

  const Canvas& canvas() const { return canvas_; }
  const std::vector<ExecutedStroke>& log() const { return log_; }
  RenderMode mode() const { return mode_; }

  /// Writes the intended strokes as a plan file with a realized section.
  void export_log(const std::filesystem::path& path) const;

 private:
  StrokeParams perturb(const StrokeParams& s, double& depletion);
  StrokeStamp stamp_for(const StrokeParams& realized, double depletion);

  Canvas canvas_;
  NoiseModel noise_;
  RenderMode mode_;
  const StrokeShapeModel* model_;
  OracleBrush brush_;
  std::mt19937_64 rng_;
  std::vector<ExecutedStroke> log_;
  std::optional<ColorTransform> distortion_, correction_;
};

}  // namespace brushplan
