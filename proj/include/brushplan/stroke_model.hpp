#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "brushplan/ad/graph.hpp"
#include "brushplan/dataset.hpp"
#include "brushplan/oracle.hpp"
#include "brushplan/stroke.hpp"

namespace brushplan {

/// param2stroke weights: linear(3->64), relu, linear(64->16*32), reshaped to
/// a 1x16x32 seed map, conv3x3(1->8), relu, conv3x3(8->1), bilinear upscale
/// to the stamp grid, clamp to [0,1].
struct StrokeShapeModel {
  static constexpr std::size_t kHidden = 64;
  static constexpr std::size_t kSeedRows = 16;
  static constexpr std::size_t kSeedCols = 32;
  static constexpr std::size_t kConvChannels = 8;

  ad::Tensor fc1_weight, fc1_bias;
  ad::Tensor fc2_weight, fc2_bias;
  ad::Tensor conv1_weight, conv1_bias;
  ad::Tensor conv2_weight, conv2_bias;
  StampGeometry geometry;
  ShapeLimits limits;

  /// Seeded random initialization (He-uniform weights, zero biases).
  static StrokeShapeModel initialized(std::uint64_t seed, const StampGeometry& geometry = {});
  /// All weights zero; predicts an empty stamp for every shape.
  static StrokeShapeModel zeros(const StampGeometry& geometry = {});

  /// Weight tensors in declaration order.
  std::vector<ad::Tensor> parameters() const;
  void set_parameters(const std::vector<ad::Tensor>& params);
  std::size_t upscale() const;
};

/// Model weights placed on a graph, trainable or fixed.
class ModelBinding {
 public:
  ModelBinding(ad::Graph& graph, const StrokeShapeModel& model, bool trainable);

  /// Network output before the final clamp, [rows, cols].
  ad::Var raw(ad::Var shape) const;
  /// Stamp in [0,1]. Out-of-range shapes are clamped to the model's limits
  /// and counted in shape_clamp_warnings().
  ad::Var stamp(ad::Var shape) const;

  const std::vector<ad::Var>& weights() const { return weights_; }
  const StrokeShapeModel& model() const { return *model_; }

 private:
  ad::Var network(ad::Var normalized) const;
  ad::Var normalize(ad::Var shape, bool clamp_to_limits) const;

  ad::Graph* graph_;
  const StrokeShapeModel* model_;
  std::vector<ad::Var> weights_;
  ad::Var input_scale_, input_offset_;
};

/// Differentiable stamp prediction for a [3] (h, l, b) node.
ad::Var param2stroke_forward(const ModelBinding& binding, ad::Var shape);
/// Eager prediction for a single shape.
StrokeStamp param2stroke_forward(const StrokeShapeModel& model, const StrokeShape& shape);

std::uint64_t shape_clamp_warnings();

struct TrainConfig {
  std::size_t epochs = 200;
  double learning_rate = 3e-3;
  double validation_fraction = 0.2;
  std::size_t batch_size = 8;
  std::uint64_t seed = 0;
};

struct EpochLoss {
  double train = 0.0;       // mean squared error, clamped output
  double validation = 0.0;  // same on the held-out split; NaN without one
};

struct TrainResult {
  StrokeShapeModel model;        // weights at the best epoch
  std::vector<EpochLoss> history;  // entry 0 is the untrained model
  std::size_t best_epoch = 0;
  std::size_t train_size = 0;
  std::size_t validation_size = 0;
};

/// Fits the model to the dataset by Adam on per-stamp mean squared error.
/// Holds out `validation_fraction` of the pairs and keeps the weights with
/// the lowest validation loss (training loss when nothing is held out).
TrainResult train_param2stroke(const StrokeDataset& dataset, const TrainConfig& config);

/// Mean over pairs of the per-stamp mean absolute error.
double evaluate_model(const StrokeShapeModel& model, const StrokeDataset& test);

struct LearningCurvePoint {
  std::size_t dataset_size = 0;
  double median_mae = 0.0;
  std::vector<double> fold_mae;
};

/// For each size, trains on `folds` seeded random subsets of the pool and
/// reports the median held-out MAE on `test`.
std::vector<LearningCurvePoint> learning_curve(const StrokeDataset& pool, const StrokeDataset& test,
                                               const std::vector<std::size_t>& sizes, std::size_t folds,
                                               const TrainConfig& config);

/// Binary model file: "P2S1", little-endian u32 layer-shape header, f64
/// weights in declaration order, then the stamp geometry.
void save_model(const StrokeShapeModel& model, std::ostream& out);
void save_model(const StrokeShapeModel& model, const std::filesystem::path& path);
StrokeShapeModel load_model(std::istream& in);
StrokeShapeModel load_model(const std::filesystem::path& path);

}  // namespace brushplan
