#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "brushplan/ad/gradcheck.hpp"
#include "brushplan/ad/ops.hpp"
#include "brushplan/dataset.hpp"
#include "brushplan/oracle.hpp"
#include "brushplan/stroke_model.hpp"
#include "support.hpp"

using namespace brushplan;

namespace {

// de Casteljau on the four control points.
std::pair<double, double> de_casteljau(double l, double b, double t) {
  double px[4] = {0.0, l / 3, 2 * l / 3, l};
  double py[4] = {0.0, b, b, 0.0};
  for (int level = 3; level > 0; --level)
    for (int i = 0; i < level; ++i) {
      px[i] = (1 - t) * px[i] + t * px[i + 1];
      py[i] = (1 - t) * py[i] + t * py[i + 1];
    }
  return {px[0], py[0]};
}

double ink(const ad::Tensor& t) {
  double s = 0.0;
  for (double v : t.data()) s += v;
  return s;
}

}  // namespace

TEST(Bezier, StraightStrokeHasNoSidewaysOffset) {
  for (double l : {0.01, 0.027, 0.05}) {
    for (const auto& p : bezier_trajectory({0.7, l, 0.0}, 17)) EXPECT_EQ(p.y, 0.0);
  }
}

TEST(Bezier, SamplesMatchDeCasteljau) {
  const StrokeShape s{0.6, 0.04, 0.013};
  const auto pts = bezier_trajectory(s, 11);
  ASSERT_EQ(pts.size(), 11u);
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const auto [x, y] = de_casteljau(s.l, s.b, double(k) / 10.0);
    EXPECT_NEAR(pts[k].x, x, 1e-15);
    EXPECT_NEAR(pts[k].y, y, 1e-15);
  }
  const auto mid = bezier_trajectory(s, 3)[1];
  EXPECT_NEAR(mid.x, s.l / 2, 1e-15);
  EXPECT_NEAR(mid.y, 0.75 * s.b, 1e-15);
}

TEST(Bezier, PressureProfile) {
  const auto pts = bezier_trajectory({0.9, 0.04, 0.01}, 3);
  EXPECT_DOUBLE_EQ(pts[0].pressure, 0.2);
  EXPECT_DOUBLE_EQ(pts[1].pressure, 0.9);
  EXPECT_DOUBLE_EQ(pts[2].pressure, 0.2);
  EXPECT_DOUBLE_EQ(pressure_at({0.9, 0.04, 0.0}, 0.25), 0.55);
}

TEST(Bezier, EndpointPressureIgnoresH) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> uh(0.2, 1.0);
  for (int i = 0; i < 100; ++i) {
    const auto pts = bezier_trajectory({uh(rng), 0.03, 0.0}, 5);
    EXPECT_EQ(pts.front().pressure, kEndpointPressure);
    EXPECT_EQ(pts.back().pressure, kEndpointPressure);
  }
}

TEST(Bezier, RejectsFewerThanTwoSamples) {
  EXPECT_THROW(bezier_trajectory({}, 1), std::invalid_argument);
  EXPECT_THROW(bezier_trajectory({}, 0), std::invalid_argument);
}

TEST(Oracle, MinimalStrokeIsAThinBarOnTheBaseline) {
  const StampGeometry g;
  const OracleBrush brush;
  const StrokeShape s{0.2, 0.01, 0.0};
  const auto stamp = oracle_render_stroke(s, g).magnitude;
  ASSERT_EQ(stamp.shape(), (ad::Shape{g.rows, g.cols}));
  const double reach = (brush.full_press_half_width * 0.2 + 0.5 * brush.edge_softness) / g.meters_per_pixel;
  double row_moment = 0.0, total = 0.0;
  for (std::size_t r = 0; r < g.rows; ++r)
    for (std::size_t c = 0; c < g.cols; ++c) {
      const double v = stamp[r * g.cols + c];
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
      EXPECT_NEAR(v, stamp[(g.rows - 1 - r) * g.cols + c], 1e-12);
      if (v > 0.0) {
        EXPECT_LE(std::abs(double(r) - g.origin_row), reach);
        EXPECT_GE(double(c), g.origin_col - reach);
        EXPECT_LE(double(c), g.origin_col + s.l / g.meters_per_pixel + reach);
      }
      row_moment += v * double(r);
      total += v;
    }
  ASSERT_GT(total, 0.0);
  EXPECT_NEAR(row_moment / total, g.origin_row, 1e-9);
}

TEST(Oracle, DeterministicWithoutNoise) {
  const StrokeShape s{0.55, 0.033, -0.007};
  EXPECT_EQ(oracle_render_stroke(s, {}).magnitude, oracle_render_stroke(s, {}).magnitude);
}

TEST(Oracle, InkMassStrictlyIncreasesWithLength) {
  for (double b : {0.0, 0.012}) {
    double prev = -1.0;
    for (double l = 0.01; l <= 0.05 + 1e-12; l += 0.0025) {
      const double m = oracle_render_stroke({0.6, l, b}, {}).ink_mass();
      EXPECT_GT(m, prev) << "l=" << l << " b=" << b;
      prev = m;
    }
  }
}

TEST(Oracle, MirroredBendMirrorsRows) {
  const StampGeometry g;
  for (double b : {0.004, 0.011, 0.02}) {
    const auto up = oracle_render_stroke({0.7, 0.04, b}, g).magnitude;
    const auto down = oracle_render_stroke({0.7, 0.04, -b}, g).magnitude;
    for (std::size_t r = 0; r < g.rows; ++r)
      for (std::size_t c = 0; c < g.cols; ++c)
        ASSERT_NEAR(up[r * g.cols + c], down[(g.rows - 1 - r) * g.cols + c], 1e-12);
  }
}

TEST(Oracle, DepletionFadesAlongTheStroke) {
  const StrokeShape s{0.8, 0.04, 0.0};
  const auto clean = oracle_render_stroke(s, {}).ink_mass();
  OracleDraw draw;
  draw.depletion = 0.4;
  EXPECT_LT(oracle_render_stroke(s, {}, draw).ink_mass(), clean);
}

TEST(Dataset, SinglePairIsReproducible) {
  const auto a = generate_dataset(1, 42);
  const auto b = generate_dataset(1, 42);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a.samples[0].shape, b.samples[0].shape);
  EXPECT_EQ(a.samples[0].stamp, b.samples[0].stamp);
  EXPECT_EQ(a.provenance, "oracle");
}

TEST(Dataset, ShapesInRangeAndUniformLength) {
  const ShapeLimits lim;
  const auto d = generate_dataset(10000, 5);
  double mean = 0.0;
  for (const auto& s : d.samples) {
    EXPECT_TRUE(lim.contains(s.shape));
    mean += s.shape.l;
  }
  mean /= double(d.size());
  const double se = (lim.l_max - lim.l_min) / std::sqrt(12.0) / std::sqrt(double(d.size()));
  EXPECT_NEAR(mean, 0.5 * (lim.l_min + lim.l_max), 3 * se);
}

TEST(Dataset, StrokeStreamsAreIndependentOfCount) {
  const auto small = generate_dataset(3, 9);
  const auto large = generate_dataset(10, 9);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(small.samples[i].stamp, large.samples[i].stamp);
}

TEST(Dataset, RejectsEmpty) { EXPECT_THROW(generate_dataset(0, 1), std::invalid_argument); }

TEST(StrokeModel, OutputShapeAndRange) {
  const auto model = StrokeShapeModel::initialized(3);
  std::mt19937_64 rng(8);
  for (int i = 0; i < 20; ++i) {
    const auto s = support::random_stroke(rng).shape;
    const auto stamp = param2stroke_forward(model, s).magnitude;
    ASSERT_EQ(stamp.shape(), (ad::Shape{32, 64}));
    for (double v : stamp.data()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(StrokeModel, OutOfRangeShapeIsClampedAndCounted) {
  const auto model = StrokeShapeModel::initialized(3);
  const auto before = shape_clamp_warnings();
  const auto clamped = param2stroke_forward(model, {1.7, 0.09, -0.5}).magnitude;
  EXPECT_EQ(shape_clamp_warnings(), before + 1);
  EXPECT_EQ(clamped, param2stroke_forward(model, {1.0, 0.05, -0.02}).magnitude);
  param2stroke_forward(model, {1.0, 0.05, -0.02});
  EXPECT_EQ(shape_clamp_warnings(), before + 1);
}

TEST(StrokeModel, GradientOfMeanStampMatchesFiniteDifferences) {
  const auto& model = support::trained_model();
  const ad::ScalarFn fn = [&](ad::Graph& g, ad::Var shape) {
    const ModelBinding binding(g, model, false);
    return ad::reduce_mean(param2stroke_forward(binding, shape));
  };
  std::mt19937_64 rng(21);
  for (int i = 0; i < 5; ++i) {
    const auto s = support::random_stroke(rng).shape;
    const auto r = ad::check_gradients(fn, ad::Tensor::vector({s.h, s.l, s.b}), 1e-6, 1e-4);
    EXPECT_TRUE(r.passed) << "max rel error " << r.max_rel_error;
  }
}

TEST(StrokeModel, MemorizesASinglePair) {
  const auto data = generate_dataset(1, 3);
  TrainConfig tc;
  tc.epochs = 1000;
  tc.seed = 2;
  const auto r = train_param2stroke(data, tc);
  EXPECT_EQ(r.validation_size, 0u);
  EXPECT_LT(r.history[r.best_epoch].train, 1e-3);
  EXPECT_LT(evaluate_model(r.model, data), 0.03);
}

TEST(StrokeModel, BestEpochNeverWorseThanTheStart) {
  const auto data = generate_dataset(20, 4);
  TrainConfig tc;
  tc.epochs = 30;
  const auto r = train_param2stroke(data, tc);
  EXPECT_EQ(r.validation_size, 4u);
  EXPECT_EQ(r.train_size, 16u);
  ASSERT_EQ(r.history.size(), 31u);
  EXPECT_LE(r.history[r.best_epoch].validation, r.history[0].validation);
  for (const auto& e : r.history) EXPECT_LE(r.history[r.best_epoch].validation, e.validation);
}

TEST(StrokeModel, TrainingIsDeterministic) {
  const auto data = generate_dataset(12, 6);
  TrainConfig tc;
  tc.epochs = 5;
  tc.seed = 9;
  EXPECT_EQ(train_param2stroke(data, tc).model.parameters(), train_param2stroke(data, tc).model.parameters());
}

TEST(StrokeModel, RejectsEmptyDataset) {
  StrokeDataset empty;
  EXPECT_THROW(train_param2stroke(empty, {}), std::invalid_argument);
  EXPECT_THROW(evaluate_model(StrokeShapeModel::zeros(), empty), std::invalid_argument);
}

TEST(StrokeModel, ZeroModelOnBlankStampsScoresZero) {
  StrokeDataset blank;
  for (int i = 0; i < 4; ++i) blank.samples.push_back({{0.5, 0.02 + 0.005 * i, 0.0}, ad::Tensor({32, 64})});
  EXPECT_EQ(evaluate_model(StrokeShapeModel::zeros(), blank), 0.0);
}

TEST(StrokeModel, TrainedBeatsUntrained) {
  const auto test = generate_dataset(50, 12);
  EXPECT_LT(evaluate_model(support::trained_model(), test),
            evaluate_model(StrokeShapeModel::initialized(3), test));
}

TEST(StrokeModel, TrainedInkMassGrowsWithLength) {
  // the learned map is not monotone step by step, but it follows the trend
  const auto& model = support::trained_model();
  for (const auto [h, b] : {std::pair{0.6, 0.0}, std::pair{0.9, 0.01}, std::pair{0.4, -0.01}}) {
    std::vector<double> mass;
    for (double l : {0.01, 0.02, 0.03, 0.04, 0.05}) mass.push_back(ink(param2stroke_forward(model, {h, l, b}).magnitude));
    EXPECT_GT(mass.back(), 1.5 * mass.front()) << "h=" << h << " b=" << b;
    int rising = 0;
    for (std::size_t i = 0; i < mass.size(); ++i)
      for (std::size_t j = i + 1; j < mass.size(); ++j) rising += mass[j] > mass[i] ? 1 : -1;
    EXPECT_GE(rising, 6) << "h=" << h << " b=" << b;  // Kendall tau >= 0.6
  }
}

TEST(StrokeModel, LearningCurveReportsMedians) {
  const auto pool = generate_dataset(20, 2);
  const auto test = generate_dataset(5, 3);
  TrainConfig tc;
  tc.epochs = 2;
  const auto curve = learning_curve(pool, test, {5, 10}, 3, tc);
  ASSERT_EQ(curve.size(), 2u);
  for (const auto& p : curve) {
    ASSERT_EQ(p.fold_mae.size(), 3u);
    auto sorted = p.fold_mae;
    std::sort(sorted.begin(), sorted.end());
    EXPECT_EQ(p.median_mae, sorted[1]);
  }
  EXPECT_THROW(learning_curve(pool, test, {21}, 3, tc), std::invalid_argument);
}
