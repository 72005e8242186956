#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "brushplan/ad/graph.hpp"
#include "brushplan/canvas.hpp"
#include "brushplan/plan.hpp"
#include "brushplan/stroke_model.hpp"

namespace brushplan {

struct Features {
  std::vector<ad::Var> layers;  // shallow to deep, each [C,h,w]
  ad::Var embedding;            // unit vector
};

/// Differentiable image features. Implementations must be deterministic and
/// safe to share across threads.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual Features extract(ad::Var canvas) const = 0;
  virtual std::size_t embedding_dim() const = 0;
  virtual bool has_text() const { return false; }
  /// Unit text vector in the image-embedding space. The default throws.
  virtual ad::Tensor text_embedding(const std::string& text) const;
};

/// Three-level pyramid (binomial blur, stride 2) with R, G, B, |d/dx|,
/// |d/dy| of luminance at every level; the embedding is a seeded random
/// projection of the deepest level. Text goes through a seeded hashed bag of
/// words into the same space.
class BuiltinExtractor final : public FeatureExtractor {
 public:
  static constexpr std::size_t kLevels = 3;
  static constexpr std::size_t kChannels = 5;
  static constexpr std::size_t kEmbeddingDim = 128;

  explicit BuiltinExtractor(std::uint64_t seed = 0) : seed_(seed) {}

  Features extract(ad::Var canvas) const override;
  std::size_t embedding_dim() const override { return kEmbeddingDim; }
  bool has_text() const override { return true; }
  ad::Tensor text_embedding(const std::string& text) const override;

  std::uint64_t seed() const { return seed_; }

 private:
  const ad::Tensor& projection(std::size_t input_dim) const;

  std::uint64_t seed_;
  mutable std::mutex mutex_;
  mutable std::map<std::size_t, std::shared_ptr<const ad::Tensor>> projections_;
};

// Pyramid building blocks of BuiltinExtractor, on [C,H,W] inputs.
/// Binomial 5x5 blur with edge replication keeping every second pixel;
/// output [C, ceil(H/2), ceil(W/2)].
ad::Var blur_down(ad::Var x);
/// Central differences of luminance with edge replication, [2,H,W] (x then
/// y) from a [3,H,W] input.
ad::Var luminance_gradients(ad::Var x);

/// Weights follow the order (text, style, print, semantic).
struct ObjectiveWeights {
  double text = 0.0;
  double style = 0.0;
  double print = 0.0;
  double semantic = 0.0;
};

struct ObjectiveConfig {
  ObjectiveWeights weights;
  std::optional<std::string> text;
  /// Fixed target embedding (e.g. read from a FEAT1 file); takes precedence
  /// over `text`.
  std::optional<ad::Tensor> text_embedding;
  std::optional<Canvas> style;
  std::optional<Canvas> target;
  std::size_t style_positions = 512;
  std::uint64_t style_seed = 0;

  /// Throws std::invalid_argument naming the first nonzero weight whose
  /// target is missing, or a negative weight.
  void validate() const;
};

// Individual losses on graph nodes. Canvases are [3,H,W].
ad::Var loss_print(ad::Var rendered, ad::Var target);
ad::Var loss_semantic(ad::Var rendered, ad::Var target, const FeatureExtractor& extractor);
ad::Var loss_style(ad::Var rendered, ad::Var style, const FeatureExtractor& extractor,
                   std::size_t positions = 512, std::uint64_t seed = 0);
ad::Var loss_text(ad::Var rendered, const std::string& text, const FeatureExtractor& extractor);
ad::Var loss_text(ad::Var rendered, const ad::Tensor& target_embedding, const FeatureExtractor& extractor);

/// Hypercolumn features [positions, sum of level channels] sampled at seeded
/// positions (shared across canvas sizes via normalized coordinates), with
/// each column's mean removed.
ad::Var style_features(const Features& features, std::size_t positions, std::uint64_t seed);

/// Weighted objective with target-side features computed once.
class Objective {
 public:
  Objective(ObjectiveConfig config, const FeatureExtractor& extractor);

  ad::Var evaluate(ad::Var rendered) const;
  const ObjectiveConfig& config() const { return config_; }
  bool needs_features() const;

 private:
  ObjectiveConfig config_;
  const FeatureExtractor* extractor_;
  ad::Tensor target_rgb_;
  ad::Tensor target_deep_;
  ad::Tensor style_set_;
  ad::Tensor text_vec_;
};

/// Renders `plan` over `base` on `graph` and evaluates the weighted sum.
ad::Var total_loss(ad::Graph& graph, const Plan& plan, const Canvas& base,
                   const StrokeShapeModel& model, const ObjectiveConfig& config,
                   const FeatureExtractor& extractor);

/// `FEAT1 <dim>` header then whitespace-separated decimals.
ad::Tensor read_feature_file(const std::filesystem::path& path);
void write_feature_file(const std::filesystem::path& path, const ad::Tensor& features);

}  // namespace brushplan
