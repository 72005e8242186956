#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <vector>

#include "brushplan/canvas.hpp"
#include "brushplan/execution.hpp"
#include "brushplan/objectives.hpp"
#include "brushplan/optim.hpp"
#include "brushplan/plan.hpp"
#include "brushplan/stroke_model.hpp"

namespace brushplan {

/// Paint colors, light to dark.
struct Palette {
  std::vector<Rgb> colors;

  std::size_t size() const { return colors.size(); }
  /// Index of the nearest color (squared RGB distance, first on ties).
  std::size_t nearest(const Rgb& c) const;
};

/// Step sizes per parameter group. Shape rates are in units of each shape
/// parameter's range, so one rate serves h (fraction) and l, b (meters).
struct LearningRates {
  double pose = 0.01;   // x, y (canvas fractions) and theta (radians)
  double shape = 0.005;
  double color = 0.02;
};

/// Which parameter groups optimize() may change.
struct ParameterGroups {
  bool pose = true;
  bool shape = true;
  bool color = true;
};

struct PlannerConfig {
  std::size_t n_strokes = 100;
  std::size_t batch_size = 30;
  std::size_t init_iterations = 300;
  std::size_t replan_iterations = 100;
  LearningRates learning_rates;
  ParameterGroups groups;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  std::optional<ObjectiveConfig> init_objectives;
  ObjectiveConfig objectives;
  /// 0 disables palette discretization.
  std::size_t palette_k = 12;
  /// Colors are projected to the palette every this many iterations; 0 = only at the end.
  std::size_t discretize_period = 40;
  /// Reorder strokes light to dark whenever colors are discretized.
  bool sort_light_to_dark = true;
  bool replan = true;
  ShapeLimits limits;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument on n_strokes, batch_size or objective errors.
  void validate() const;
};

/// Strokes drawn uniformly over every parameter range.
Plan init_plan(std::size_t n_strokes, const CanvasGeometry& geometry, std::mt19937_64& rng,
               const ShapeLimits& limits = {});

struct OptimizeOptions {
  std::size_t iterations = 300;
  LearningRates learning_rates;
  ParameterGroups groups;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  std::size_t palette_k = 12;
  std::size_t discretize_period = 40;
  bool sort_light_to_dark = true;
  /// When set, colors snap to this palette instead of re-clustering.
  std::optional<Palette> fixed_palette;
  ShapeLimits limits;
  std::uint64_t seed = 0;

  static OptimizeOptions from(const PlannerConfig& config, std::size_t iterations);
};

struct OptimizeResult {
  Plan plan;                      // best iterate, colors on the palette when enabled
  std::vector<double> history;    // loss of each evaluated iterate
  std::vector<double> best_history;  // running minimum of history
  std::size_t best_iteration = 0;
  std::optional<Palette> palette;
};

/// Gradient descent on every stroke parameter. Evaluates `iterations`
/// iterates (stepping between them), re-clamps parameters after each step,
/// and every discretize_period iterations projects colors onto the palette
/// (optionally re-sorting strokes and their optimizer state). Returns the
/// iterate with the lowest loss.
OptimizeResult optimize(const Plan& plan, const Canvas& base, const StrokeShapeModel& model,
                        const Objective& objective, const OptimizeOptions& options);

/// K-means++ seeded clustering of stroke colors (<= 100 Lloyd iterations or
/// centroid movement below 1e-6). K above the number of strokes is reduced
/// with a warning on stderr.
std::pair<Plan, Palette> discretize_colors(const Plan& plan, std::size_t k, std::uint64_t seed);
/// Snaps every stroke color to its nearest palette entry.
Plan project_to_palette(const Plan& plan, const Palette& palette);
/// Stable sort by descending luminance.
Plan sort_light_to_dark(const Plan& plan);
/// Permutation applied by sort_light_to_dark (new position -> old index).
std::vector<std::size_t> light_to_dark_order(const Plan& plan);

/// Mean squared difference between the renders of two plans over `base`.
double plan_deviation(const Plan& now, const Plan& initial, const Canvas& base,
                      const StrokeShapeModel& model);

struct PaintRound {
  Plan remaining;          // plan about to be executed (this batch first)
  Canvas simulated;        // its render over the perceived canvas
  Plan executed;           // strokes sent to the executor
  Canvas perceived_after;  // camera view after the batch
  double deviation = 0.0;  // remaining plan over the real canvas vs the initial simulation
  std::vector<double> replan_history;  // empty without a replanning pass
};

struct PaintResult {
  Canvas final_canvas;
  Plan initial_plan;
  Canvas initial_simulation;
  OptimizeResult initial_optimization;
  std::vector<PaintRound> trace;
  std::optional<Palette> palette;

  std::vector<double> deviations() const;
};

/// Algorithm: optional initial pass with init objectives, full optimization,
/// then execute batch_size strokes, perceive, and re-optimize the rest on
/// top of the perceived canvas until the plan is used up.
PaintResult paint(const PlannerConfig& config, const FeatureExtractor& extractor,
                  const StrokeShapeModel& model, Executor& executor);

/// Continues from an already optimized plan (shared by runs that differ
/// only in the execution phase).
PaintResult paint_from(const PlannerConfig& config, const Objective& objective,
                       const StrokeShapeModel& model, Executor& executor,
                       const OptimizeResult& initial);

/// Initial planning part of paint(): random init plus optimization passes.
OptimizeResult plan_strokes(const PlannerConfig& config, const FeatureExtractor& extractor,
                            const StrokeShapeModel& model, const Canvas& base);

void write_loss_csv(const std::filesystem::path& path, const std::vector<double>& best_history);
void write_deviation_csv(const std::filesystem::path& path, const std::vector<double>& deviations);

}  // namespace brushplan
