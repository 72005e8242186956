#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <span>

#include "brushplan/dataset.hpp"
#include "brushplan/execution.hpp"
#include "brushplan/oracle.hpp"
#include "brushplan/planner.hpp"
#include "brushplan/renderer.hpp"
#include "brushplan/stroke_model.hpp"
#include "support.hpp"

using namespace brushplan;

namespace {

std::vector<StrokeParams> centred_strokes(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<StrokeParams> out;
  for (std::size_t i = 0; i < n; ++i) {
    auto s = support::random_stroke(rng);
    s.x = 0.5;
    s.y = 0.5;
    out.push_back(s);
  }
  return out;
}

}  // namespace

TEST(Executor, ZeroNoiseModelModeReproducesRenderPlan) {
  const auto g = support::small_canvas();
  const auto& m = support::trained_model();
  std::mt19937_64 rng(1);
  const auto plan = init_plan(25, g, rng);
  Executor ex(Canvas::blank(g), NoiseModel::zero(), RenderMode::kModel, m);
  ex.execute(plan.slice(0, 10).strokes);
  ex.execute(plan.slice(10, 15).strokes);
  EXPECT_EQ(ex.canvas().rgb, render_plan(plan, Canvas::blank(g), m).rgb);
  for (const auto& e : ex.log()) EXPECT_EQ(e.intended, e.realized);
}

TEST(Executor, OracleGapIsTheStampError) {
  // black ink on white at stamp scale with an identity pose: every canvas pixel
  // differs by exactly the stamp difference under it
  const auto& m = support::trained_model();
  const StampGeometry sg = m.geometry;
  const CanvasGeometry g{100, 60, sg.meters_per_pixel * 100, sg.meters_per_pixel * 60};
  StrokeParams s;
  s.shape = {0.7, 0.04, 0.012};
  s.x = (sg.origin_col + 0.5 + 10) / 100.0;
  s.y = (sg.origin_row + 0.5 + 10) / 60.0;
  s.color = {0, 0, 0};
  Executor oracle(Canvas::blank(g), NoiseModel::zero(), RenderMode::kOracle, m);
  Executor model(Canvas::blank(g), NoiseModel::zero(), RenderMode::kModel, m);
  oracle.execute(std::span(&s, 1));
  model.execute(std::span(&s, 1));
  const auto a = oracle_render_stroke(s.shape, sg).magnitude;
  const auto b = param2stroke_forward(m, s.shape).magnitude;
  double stamp_sum = 0;
  for (std::size_t k = 0; k < a.size(); ++k) stamp_sum += std::abs(a[k] - b[k]);
  const double canvas_sum = mean_abs_difference(oracle.canvas(), model.canvas()) * 3 * 100 * 60;
  EXPECT_GT(stamp_sum, 0.0);
  EXPECT_NEAR(canvas_sum, 3 * stamp_sum, 1e-9 * stamp_sum);
}

TEST(Executor, PositionErrorIsHalfNormal) {
  const double sigma = 0.01;
  NoiseModel noise = NoiseModel::zero(4);
  noise.sigma_xy = sigma;
  Executor ex(Canvas::blank(support::small_canvas()), noise, RenderMode::kModel, support::trained_model());
  const auto strokes = centred_strokes(1000, 3);
  ex.execute(strokes);
  double ax = 0, ay = 0;
  for (const auto& e : ex.log()) {
    ax += std::abs(e.realized.x - e.intended.x);
    ay += std::abs(e.realized.y - e.intended.y);
    EXPECT_EQ(e.realized.shape, e.intended.shape);
    EXPECT_EQ(e.realized.color, e.intended.color);
  }
  ax /= 1000.0;
  ay /= 1000.0;
  const double expect = sigma * std::sqrt(2.0 / std::numbers::pi);
  const double se = sigma * std::sqrt(1.0 - 2.0 / std::numbers::pi) / std::sqrt(1000.0);
  EXPECT_NEAR(ax, expect, 3 * se);
  EXPECT_NEAR(ay, expect, 3 * se);
}

TEST(Executor, NoiseIsUnbiased) {
  const NoiseModel noise = NoiseModel::scaled(2.0, 5);
  Executor ex(Canvas::blank(support::small_canvas()), noise, RenderMode::kModel, support::trained_model());
  ex.execute(centred_strokes(2000, 6));
  double dx = 0, dy = 0, dtheta = 0;
  for (const auto& e : ex.log()) {
    dx += e.realized.x - e.intended.x;
    dy += e.realized.y - e.intended.y;
    dtheta += wrap_angle(e.realized.theta - e.intended.theta);
  }
  const double n = 2000.0;
  EXPECT_NEAR(dx / n, 0.0, 3 * noise.sigma_xy / std::sqrt(n));
  EXPECT_NEAR(dy / n, 0.0, 3 * noise.sigma_xy / std::sqrt(n));
  EXPECT_NEAR(dtheta / n, 0.0, 3 * noise.sigma_theta / std::sqrt(n));
}

TEST(Executor, SameSeedSameCanvas) {
  const auto g = support::small_canvas();
  std::mt19937_64 rng(7);
  const auto plan = init_plan(15, g, rng);
  Executor a(Canvas::blank(g), NoiseModel::scaled(1.0, 11), RenderMode::kOracle, support::trained_model());
  Executor b(Canvas::blank(g), NoiseModel::scaled(1.0, 11), RenderMode::kOracle, support::trained_model());
  a.execute(plan.strokes);
  b.execute(plan.strokes);
  EXPECT_EQ(a.canvas().rgb, b.canvas().rgb);
  for (double v : a.canvas().rgb.data()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  Executor c(Canvas::blank(g), NoiseModel::scaled(1.0, 12), RenderMode::kOracle, support::trained_model());
  c.execute(plan.strokes);
  EXPECT_FALSE(a.canvas().rgb == c.canvas().rgb);
}

TEST(Executor, PerceiveSnapshots) {
  const auto g = support::small_canvas();
  std::mt19937_64 rng(8);
  const auto plan = init_plan(10, g, rng);
  Executor ex(Canvas::blank(g), NoiseModel{}, RenderMode::kOracle, support::trained_model());
  ex.execute(plan.slice(0, 5).strokes);
  const auto snap = ex.perceive();
  EXPECT_EQ(snap.rgb, ex.canvas().rgb);
  ex.set_color_correction(ColorTransform::identity());
  EXPECT_EQ(ex.perceive().rgb, ex.canvas().rgb);
  const auto copy = snap.rgb;
  ex.execute(plan.slice(5, 5).strokes);
  EXPECT_EQ(snap.rgb, copy);
  EXPECT_FALSE(snap.rgb == ex.canvas().rgb);
}

TEST(Executor, FittedCorrectionUndoesCameraDistortion) {
  const auto g = support::small_canvas();
  Executor ex(support::blob_target(g), NoiseModel::zero(), RenderMode::kModel, support::trained_model());
  ColorTransform distortion;
  distortion.m = {0.8, 0.05, 0.0, 0.05, 0.02, 0.85, 0.03, 0.04, 0.0, 0.06, 0.75, 0.1};
  ex.set_camera_distortion(distortion);
  // checker: known patches seen through the camera
  std::vector<Rgb> reference, measured;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 24; ++i) {
    reference.push_back({u(rng), u(rng), u(rng)});
    measured.push_back(distortion.apply(reference.back()));
  }
  EXPECT_FALSE(mean_abs_difference(ex.perceive(), ex.canvas()) < 1e-3);
  ex.set_color_correction(fit_color_transform(measured, reference));
  EXPECT_LT(mean_abs_difference(ex.perceive(), ex.canvas()), 1e-9);
}

TEST(Executor, ExportedLogCarriesRealizedStrokes) {
  const auto g = support::small_canvas();
  std::mt19937_64 rng(10);
  const auto plan = init_plan(6, g, rng);
  Executor ex(Canvas::blank(g), NoiseModel::scaled(1.0, 3), RenderMode::kOracle, support::trained_model());
  ex.execute(plan.strokes);
  const auto path = std::filesystem::temp_directory_path() / "brushplan_exec_log.txt";
  ex.export_log(path);
  std::vector<StrokeParams> realized;
  const auto intended = read_plan(path, &realized);
  EXPECT_EQ(intended.strokes, plan.strokes);
  ASSERT_EQ(realized.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(realized[i], ex.log()[i].realized);
  std::filesystem::remove(path);
}

TEST(NoiseModel, Validation) {
  EXPECT_TRUE(NoiseModel::zero().is_zero());
  EXPECT_FALSE(NoiseModel{}.is_zero());
  NoiseModel bad;
  bad.sigma_theta = -0.1;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  EXPECT_THROW(Executor(Canvas::blank({}), bad, RenderMode::kOracle, StrokeShapeModel::zeros()),
               std::invalid_argument);
}
