#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>

#include "brushplan/ad/gradcheck.hpp"
#include "brushplan/ad/ops.hpp"
#include "brushplan/objectives.hpp"
#include "brushplan/planner.hpp"
#include "brushplan/renderer.hpp"
#include "support.hpp"

using namespace brushplan;

namespace {

double cosine_distance_of(std::span<const double> a, std::span<const double> b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ab += a[k] * b[k];
    aa += a[k] * a[k];
    bb += b[k] * b[k];
  }
  return 1.0 - ab / std::sqrt(aa * bb);
}

double brute_force_remd(const ad::Tensor& a, const ad::Tensor& b) {
  const std::size_t n = a.dim(0), m = b.dim(0), d = a.dim(1);
  const auto row = [d](const ad::Tensor& t, std::size_t i) { return t.data().subspan(i * d, d); };
  double ra = 0, rb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double best = INFINITY;
    for (std::size_t j = 0; j < m; ++j) best = std::min(best, cosine_distance_of(row(a, i), row(b, j)));
    ra += best;
  }
  for (std::size_t j = 0; j < m; ++j) {
    double best = INFINITY;
    for (std::size_t i = 0; i < n; ++i) best = std::min(best, cosine_distance_of(row(a, i), row(b, j)));
    rb += best;
  }
  return std::max(ra / double(n), rb / double(m));
}

double eval(const std::function<ad::Var(ad::Graph&)>& f) {
  ad::Graph g;
  return f(g).value().item();
}

// Builtin image path without the text capability.
class ImageOnlyExtractor final : public FeatureExtractor {
 public:
  Features extract(ad::Var canvas) const override { return inner_.extract(canvas); }
  std::size_t embedding_dim() const override { return inner_.embedding_dim(); }

 private:
  BuiltinExtractor inner_;
};

}  // namespace

TEST(LossPrint, IdentityAndExtremes) {
  std::mt19937_64 rng(1);
  const auto a = support::random_tensor({3, 6, 7}, rng, 0, 1);
  EXPECT_EQ(eval([&](ad::Graph& g) { return loss_print(g.constant(a), g.constant(a)); }), 0.0);
  EXPECT_EQ(eval([&](ad::Graph& g) {
              return loss_print(g.constant(ad::Tensor({3, 6, 7})), g.constant(ad::Tensor::full({3, 6, 7}, 1.0)));
            }),
            1.0);
}

TEST(LossPrint, GradientIsTwiceTheResidualOverN) {
  std::mt19937_64 rng(2);
  const auto r = support::random_tensor({3, 4, 5}, rng, 0, 1);
  const auto t = support::random_tensor({3, 4, 5}, rng, 0, 1);
  const auto grad = ad::gradient_of([&](ad::Graph& g, ad::Var v) { return loss_print(v, g.constant(t)); }, r);
  for (std::size_t i = 0; i < r.size(); ++i) EXPECT_NEAR(grad[i], 2 * (r[i] - t[i]) / 60.0, 1e-15);
}

TEST(LossPrint, RejectsMismatchedSizes) {
  ad::Graph g;
  EXPECT_THROW(loss_print(g.constant(ad::Tensor({3, 4, 4})), g.constant(ad::Tensor({3, 4, 5}))),
               std::invalid_argument);
}

TEST(Extractor, LayerShapesAndUnitEmbedding) {
  const BuiltinExtractor ex(3);
  ad::Graph g;
  std::mt19937_64 rng(3);
  const auto f = ex.extract(g.constant(support::random_tensor({3, 13, 10}, rng, 0, 1)));
  ASSERT_EQ(f.layers.size(), 3u);
  EXPECT_EQ(f.layers[0].shape(), (ad::Shape{5, 13, 10}));
  EXPECT_EQ(f.layers[1].shape(), (ad::Shape{5, 7, 5}));
  EXPECT_EQ(f.layers[2].shape(), (ad::Shape{5, 4, 3}));
  ASSERT_EQ(f.embedding.shape(), (ad::Shape{128}));
  double norm = 0;
  for (double v : f.embedding.value().data()) norm += v * v;
  EXPECT_NEAR(norm, 1.0, 1e-12);
}

TEST(Extractor, DeterministicPerSeed) {
  std::mt19937_64 rng(4);
  const auto img = support::random_tensor({3, 8, 8}, rng, 0, 1);
  const auto embed = [&](std::uint64_t seed) {
    ad::Graph g;
    return BuiltinExtractor(seed).extract(g.constant(img)).embedding.value();
  };
  EXPECT_EQ(embed(5), embed(5));
  EXPECT_FALSE(embed(5) == embed(6));
  EXPECT_EQ(BuiltinExtractor(5).text_embedding("a red bird"), BuiltinExtractor(5).text_embedding("a red bird"));
}

TEST(Extractor, BlurOfConstantIsConstant) {
  ad::Graph g;
  const auto out = blur_down(g.constant(ad::Tensor::full({3, 9, 6}, 0.25))).value();
  EXPECT_EQ(out.shape(), (ad::Shape{3, 5, 3}));
  for (double v : out.data()) EXPECT_NEAR(v, 0.25, 1e-15);
}

TEST(Extractor, LuminanceGradientOfHorizontalRamp) {
  // luminance of a gray ramp is the ramp itself; central difference 1 inside, 0.5 at the edges
  std::vector<double> v(3 * 4 * 6);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 6; ++j) v[(c * 4 + i) * 6 + j] = double(j);
  ad::Graph g;
  const auto out = luminance_gradients(g.constant(ad::Tensor({3, 4, 6}, v))).value();
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 6; ++j) {
      EXPECT_NEAR(out[i * 6 + j], (j == 0 || j == 5) ? 0.5 : 1.0, 1e-12);
      EXPECT_NEAR(out[24 + i * 6 + j], 0.0, 1e-12);
    }
}

TEST(Extractor, PyramidOpsMatchFiniteDifferences) {
  std::mt19937_64 rng(5);
  const auto x = support::random_tensor({3, 7, 6}, rng, 0, 1);
  const auto w1 = support::random_tensor({3, 4, 3}, rng);
  const auto w2 = support::random_tensor({2, 7, 6}, rng);
  EXPECT_TRUE(ad::check_gradients([&](ad::Graph& g, ad::Var v) {
                return ad::reduce_sum(ad::mul(blur_down(v), g.constant(w1)));
              }, x).passed);
  EXPECT_TRUE(ad::check_gradients([&](ad::Graph& g, ad::Var v) {
                return ad::reduce_sum(ad::mul(luminance_gradients(v), g.constant(w2)));
              }, x).passed);
}

TEST(LossSemantic, IdentityIsZeroAndMismatchThrows) {
  const BuiltinExtractor ex;
  std::mt19937_64 rng(6);
  const auto a = support::random_tensor({3, 16, 16}, rng, 0, 1);
  EXPECT_EQ(eval([&](ad::Graph& g) { return loss_semantic(g.constant(a), g.constant(a), ex); }), 0.0);
  ad::Graph g;
  EXPECT_THROW(loss_semantic(g.constant(a), g.constant(ad::Tensor({3, 16, 12})), ex), std::invalid_argument);
}

TEST(LossSemantic, PoolingDampsASinglePixelFlip) {
  const BuiltinExtractor ex;
  std::mt19937_64 rng(7);
  const auto target = support::random_tensor({3, 32, 32}, rng, 0, 1);
  auto flipped = target.to_vector();
  for (std::size_t c = 0; c < 3; ++c) flipped[c * 1024 + 17 * 32 + 9] = 1.0 - flipped[c * 1024 + 17 * 32 + 9];
  const ad::Tensor r({3, 32, 32}, flipped);
  const double sem = eval([&](ad::Graph& g) { return loss_semantic(g.constant(r), g.constant(target), ex); });
  const double print = eval([&](ad::Graph& g) { return loss_print(g.constant(r), g.constant(target)); });
  EXPECT_GT(sem, 0.0);
  EXPECT_LT(sem, print);
}

TEST(LossSemantic, GradientMatchesFiniteDifferences) {
  const BuiltinExtractor ex;
  std::mt19937_64 rng(8);
  const auto r = support::random_tensor({3, 12, 12}, rng, 0, 1);
  const auto t = support::random_tensor({3, 12, 12}, rng, 0, 1);
  const auto rep = ad::check_gradients(
      [&](ad::Graph& g, ad::Var v) { return loss_semantic(v, g.constant(t), ex); }, r, 1e-5, 1e-4);
  EXPECT_TRUE(rep.passed) << rep.max_rel_error;
}

TEST(Remd, IdentitySingletonsAndBruteForce) {
  std::mt19937_64 rng(9);
  const auto a = support::random_tensor({5, 3}, rng);
  EXPECT_NEAR(eval([&](ad::Graph& g) { return ad::remd(g.constant(a), g.constant(a)); }), 0.0, 1e-15);
  const auto x = support::random_tensor({1, 4}, rng), y = support::random_tensor({1, 4}, rng);
  EXPECT_NEAR(eval([&](ad::Graph& g) { return ad::remd(g.constant(x), g.constant(y)); }),
              cosine_distance_of(x.data(), y.data()), 1e-15);
  for (int k = 0; k < 20; ++k) {
    const auto p = support::random_tensor({5, 3}, rng), q = support::random_tensor({5, 3}, rng);
    EXPECT_NEAR(eval([&](ad::Graph& g) { return ad::remd(g.constant(p), g.constant(q)); }),
                brute_force_remd(p, q), 1e-12);
  }
}

TEST(Remd, RejectsEmptySets) {
  ad::Graph g;
  EXPECT_THROW(ad::remd(g.constant(ad::Tensor({0, 3})), g.constant(ad::Tensor({2, 3}))), std::invalid_argument);
}

TEST(LossStyle, IdentityAndSymmetry) {
  const BuiltinExtractor ex;
  std::mt19937_64 rng(10);
  const auto a = support::random_tensor({3, 20, 20}, rng, 0, 1);
  const auto b = support::random_tensor({3, 24, 24}, rng, 0, 1);
  EXPECT_NEAR(eval([&](ad::Graph& g) { return loss_style(g.constant(a), g.constant(a), ex, 128, 3); }), 0.0, 1e-15);
  const double ab = eval([&](ad::Graph& g) { return loss_style(g.constant(a), g.constant(b), ex, 128, 3); });
  const double ba = eval([&](ad::Graph& g) { return loss_style(g.constant(b), g.constant(a), ex, 128, 3); });
  EXPECT_GT(ab, 0.0);
  EXPECT_EQ(ab, ba);
}

TEST(LossStyle, GradientMatchesFiniteDifferencesAwayFromTies) {
  const BuiltinExtractor ex;
  std::mt19937_64 rng(11);
  const auto r = support::random_tensor({3, 12, 12}, rng, 0, 1);
  const auto s = support::random_tensor({3, 12, 12}, rng, 0, 1);
  const auto rep = ad::check_gradients(
      [&](ad::Graph& g, ad::Var v) { return loss_style(v, g.constant(s), ex, 64, 2); }, r, 1e-6, 1e-3);
  EXPECT_TRUE(rep.passed) << rep.max_rel_error;
  EXPECT_GT(rep.checked, rep.excluded);
}

TEST(LossText, RangeIdentityAndGradient) {
  const BuiltinExtractor ex;
  std::mt19937_64 rng(12);
  const auto r = support::random_tensor({3, 12, 12}, rng, 0, 1);
  for (const char* text : {"a bird", "stormy sea at night", "x"}) {
    const double v = eval([&](ad::Graph& g) { return loss_text(g.constant(r), text, ex); });
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 2.0);
  }
  ad::Graph g;
  const auto own = ex.extract(g.constant(r)).embedding.value();
  EXPECT_NEAR(eval([&](ad::Graph& h) { return loss_text(h.constant(r), own, ex); }), 0.0, 1e-12);
  const auto rep = ad::check_gradients(
      [&](ad::Graph& h, ad::Var v) { return loss_text(v, std::string("a bird"), ex); }, r, 1e-6, 1e-4);
  EXPECT_TRUE(rep.passed) << rep.max_rel_error;
}

TEST(LossText, ExtractorWithoutTextIsNamed) {
  const ImageOnlyExtractor ex;
  ad::Graph g;
  try {
    loss_text(g.constant(ad::Tensor({3, 8, 8})), std::string("a bird"), ex);
    FAIL() << "expected throw";
  } catch (const std::logic_error& e) {
    EXPECT_NE(std::string(e.what()).find("text embedding"), std::string::npos);
  }
}

TEST(ObjectiveConfig, MissingTargetNamesTheWeight) {
  ObjectiveConfig oc;
  oc.weights.style = 1.0;
  try {
    oc.validate();
    FAIL() << "expected throw";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("'style'"), std::string::npos);
  }
  oc.weights.style = -0.5;
  EXPECT_THROW(oc.validate(), std::invalid_argument);
  ObjectiveConfig zero;
  EXPECT_NO_THROW(zero.validate());
}

class TotalLoss : public ::testing::Test {
 protected:
  void SetUp() override {
    geometry = CanvasGeometry::with_width(32, 32, 0.05);
    std::mt19937_64 rng(13);
    plan = init_plan(6, geometry, rng);
    base = Canvas::blank(geometry);
    config.target = Canvas::from_tensor(geometry, support::random_tensor({3, 32, 32}, rng, 0, 1));
    config.style = Canvas::from_tensor(CanvasGeometry::with_width(24, 24, 0.05),
                                       support::random_tensor({3, 24, 24}, rng, 0, 1));
    config.text = "warm sunset";
    config.style_positions = 128;
  }

  double loss(const ObjectiveWeights& w) const {
    auto c = config;
    c.weights = w;
    ad::Graph g;
    return total_loss(g, plan, base, support::trained_model(), c, extractor).value().item();
  }

  ad::Tensor rendered() const { return render_plan(plan, base, support::trained_model()).rgb; }

  CanvasGeometry geometry;
  Plan plan;
  Canvas base;
  ObjectiveConfig config;
  BuiltinExtractor extractor;
};

TEST_F(TotalLoss, AllWeightsZeroIsZero) { EXPECT_EQ(loss({0, 0, 0, 0}), 0.0); }

TEST_F(TotalLoss, PrintOnlyEqualsLossPrint) {
  const auto r = rendered();
  EXPECT_EQ(loss({0, 0, 1, 0}),
            eval([&](ad::Graph& g) { return loss_print(g.constant(r), g.constant(config.target->rgb)); }));
}

TEST_F(TotalLoss, StylePlusSemanticRecomputed) {
  const auto r = rendered();
  const double style = eval([&](ad::Graph& g) {
    return loss_style(g.constant(r), g.constant(config.style->rgb), extractor, config.style_positions, config.style_seed);
  });
  const double semantic =
      eval([&](ad::Graph& g) { return loss_semantic(g.constant(r), g.constant(config.target->rgb), extractor); });
  EXPECT_NEAR(loss({0, 1, 0, 1}), style + semantic, 1e-12);
}

TEST_F(TotalLoss, LinearInTheWeights) {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> u(0, 2);
  for (int k = 0; k < 5; ++k) {
    const ObjectiveWeights w1{u(rng), u(rng), u(rng), u(rng)}, w2{u(rng), u(rng), u(rng), u(rng)};
    const double a = u(rng), b = u(rng);
    const ObjectiveWeights mix{a * w1.text + b * w2.text, a * w1.style + b * w2.style,
                               a * w1.print + b * w2.print, a * w1.semantic + b * w2.semantic};
    EXPECT_NEAR(loss(mix), a * loss(w1) + b * loss(w2), 1e-12);
  }
}

TEST(FeatureFile, RoundTrip) {
  std::mt19937_64 rng(15);
  const auto v = support::random_tensor({7}, rng);
  const auto path = std::filesystem::temp_directory_path() / "brushplan_feat_test.txt";
  write_feature_file(path, v);
  EXPECT_EQ(read_feature_file(path), v);
  std::ofstream(path) << "FEAT1 3\n1 2\n";
  EXPECT_THROW(read_feature_file(path), std::runtime_error);
  std::filesystem::remove(path);
}
