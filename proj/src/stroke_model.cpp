#include "brushplan/stroke_model.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>

#include "brushplan/ad/ops.hpp"
#include "brushplan/optim.hpp"

namespace brushplan {
namespace {

std::atomic<std::uint64_t> g_shape_clamp_warnings{0};

ad::Tensor uniform_tensor(ad::Shape shape, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(ad::shape_size(shape));
  for (double& x : v) x = dist(rng);
  return ad::Tensor(std::move(shape), std::move(v));
}

std::array<double, 3> lower_bounds(const ShapeLimits& lim) { return {lim.h_min, lim.l_min, -lim.b_max}; }
std::array<double, 3> upper_bounds(const ShapeLimits& lim) { return {lim.h_max, lim.l_max, lim.b_max}; }

}  // namespace

StrokeShapeModel StrokeShapeModel::initialized(std::uint64_t seed, const StampGeometry& geometry) {
  StrokeShapeModel m = zeros(geometry);
  std::mt19937_64 rng(seed);
  const auto he = [](double fan_in) { return std::sqrt(6.0 / fan_in); };
  m.fc1_weight = uniform_tensor({3, kHidden}, he(3.0), rng);
  m.fc2_weight = uniform_tensor({kHidden, kSeedRows * kSeedCols}, he(kHidden), rng);
  m.conv1_weight = uniform_tensor({kConvChannels, 1, 3, 3}, he(9.0), rng);
  m.conv2_weight = uniform_tensor({1, kConvChannels, 3, 3}, he(9.0 * kConvChannels), rng);
  return m;
}

StrokeShapeModel StrokeShapeModel::zeros(const StampGeometry& geometry) {
  if (geometry.rows % kSeedRows != 0 || geometry.cols % kSeedCols != 0 ||
      geometry.rows / kSeedRows != geometry.cols / kSeedCols) {
    throw std::invalid_argument("stroke model: stamp " + std::to_string(geometry.rows) + "x" +
                                std::to_string(geometry.cols) +
                                " is not an integer upscale of the 16x32 seed map");
  }
  StrokeShapeModel m;
  m.geometry = geometry;
  m.fc1_weight = ad::Tensor({3, kHidden});
  m.fc1_bias = ad::Tensor({kHidden});
  m.fc2_weight = ad::Tensor({kHidden, kSeedRows * kSeedCols});
  m.fc2_bias = ad::Tensor({kSeedRows * kSeedCols});
  m.conv1_weight = ad::Tensor({kConvChannels, 1, 3, 3});
  m.conv1_bias = ad::Tensor({kConvChannels});
  m.conv2_weight = ad::Tensor({1, kConvChannels, 3, 3});
  m.conv2_bias = ad::Tensor({1});
  return m;
}

std::vector<ad::Tensor> StrokeShapeModel::parameters() const {
  return {fc1_weight, fc1_bias, fc2_weight, fc2_bias,
          conv1_weight, conv1_bias, conv2_weight, conv2_bias};
}

void StrokeShapeModel::set_parameters(const std::vector<ad::Tensor>& params) {
  const auto current = parameters();
  if (params.size() != current.size()) {
    throw std::invalid_argument("stroke model: expected " + std::to_string(current.size()) +
                                " weight tensors, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape() != current[i].shape()) {
      throw std::invalid_argument("stroke model: weight " + std::to_string(i) + " has shape " +
                                  ad::shape_string(params[i].shape()) + ", expected " +
                                  ad::shape_string(current[i].shape()));
    }
  }
  fc1_weight = params[0];
  fc1_bias = params[1];
  fc2_weight = params[2];
  fc2_bias = params[3];
  conv1_weight = params[4];
  conv1_bias = params[5];
  conv2_weight = params[6];
  conv2_bias = params[7];
}

std::size_t StrokeShapeModel::upscale() const { return geometry.rows / kSeedRows; }

ModelBinding::ModelBinding(ad::Graph& graph, const StrokeShapeModel& model, bool trainable)
    : graph_(&graph), model_(&model) {
  for (const auto& t : model.parameters()) {
    weights_.push_back(trainable ? graph.leaf(t) : graph.constant(t));
  }
  // u = (s - lo) / (hi - lo) mapped to [-1, 1]
  const auto lo = lower_bounds(model.limits), hi = upper_bounds(model.limits);
  std::vector<double> sc(3), off(3);
  for (int i = 0; i < 3; ++i) {
    sc[i] = 2.0 / (hi[i] - lo[i]);
    off[i] = -2.0 * lo[i] / (hi[i] - lo[i]) - 1.0;
  }
  input_scale_ = graph.constant(ad::Tensor({3}, sc));
  input_offset_ = graph.constant(ad::Tensor({3}, off));
}

ad::Var ModelBinding::normalize(ad::Var shape, bool clamp_to_limits) const {
  if (shape.shape() != ad::Shape{3}) {
    throw std::invalid_argument("param2stroke: shape input must be [3], got " +
                                ad::shape_string(shape.shape()));
  }
  if (clamp_to_limits) {
    const auto lo = lower_bounds(model_->limits), hi = upper_bounds(model_->limits);
    const auto v = shape.value();
    bool outside = false;
    for (int i = 0; i < 3; ++i) outside = outside || v[i] < lo[i] || v[i] > hi[i];
    if (outside) {
      // Only out-of-range inputs pass through clamp, so a value sitting on a
      // bound keeps its gradient.
      ++g_shape_clamp_warnings;
      std::vector<ad::Var> parts;
      for (std::size_t i = 0; i < 3; ++i) {
        parts.push_back(ad::clamp(ad::gather(shape, {i}, {1}), lo[i], hi[i]));
      }
      shape = ad::concat(parts);
    }
  }
  return ad::add(ad::mul(shape, input_scale_), input_offset_);
}

ad::Var ModelBinding::network(ad::Var u) const {
  using namespace ad;
  const auto& w = weights_;
  constexpr auto S = StrokeShapeModel::kSeedRows, T = StrokeShapeModel::kSeedCols;
  Var h = relu(linear(reshape(u, {1, 3}), w[0], w[1]));
  Var seed = reshape(linear(h, w[2], w[3]), {1, S, T});
  Var c = relu(conv2d(seed, w[4], w[5]));
  Var out = bilinear_upsample(conv2d(c, w[6], w[7]), model_->upscale());
  return reshape(out, {model_->geometry.rows, model_->geometry.cols});
}

ad::Var ModelBinding::raw(ad::Var shape) const { return network(normalize(shape, false)); }

ad::Var ModelBinding::stamp(ad::Var shape) const {
  return ad::clamp01(network(normalize(shape, true)));
}

ad::Var param2stroke_forward(const ModelBinding& binding, ad::Var shape) {
  return binding.stamp(shape);
}

StrokeStamp param2stroke_forward(const StrokeShapeModel& model, const StrokeShape& shape) {
  ad::Graph g;
  const ModelBinding binding(g, model, false);
  const auto s = g.constant(ad::Tensor::vector({shape.h, shape.l, shape.b}));
  return {binding.stamp(s).value(), model.geometry};
}

std::uint64_t shape_clamp_warnings() { return g_shape_clamp_warnings.load(); }

namespace {

ad::Tensor shape_tensor(const StrokeShape& s) { return ad::Tensor::vector({s.h, s.l, s.b}); }

double clamped_mse(const ad::Tensor& raw, const ad::Tensor& target) {
  double acc = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double d = std::clamp(raw[i], 0.0, 1.0) - target[i];
    acc += d * d;
  }
  return acc / static_cast<double>(raw.size());
}

double mean_clamped_mse(const StrokeShapeModel& model, const StrokeDataset& data,
                        const std::vector<std::size_t>& idx) {
  if (idx.empty()) return std::numeric_limits<double>::quiet_NaN();
  double acc = 0.0;
  for (std::size_t i : idx) {
    ad::Graph g;
    const ModelBinding binding(g, model, false);
    const auto& s = data.samples[i];
    acc += clamped_mse(binding.raw(g.constant(shape_tensor(s.shape))).value(), s.stamp);
  }
  return acc / static_cast<double>(idx.size());
}

void check_stamps(const StrokeDataset& data) {
  for (const auto& s : data.samples) {
    if (s.stamp.shape() != ad::Shape{data.geometry.rows, data.geometry.cols}) {
      throw std::invalid_argument("stroke dataset: stamp shape " + ad::shape_string(s.stamp.shape()) +
                                  " does not match the dataset geometry");
    }
  }
}

}  // namespace

TrainResult train_param2stroke(const StrokeDataset& dataset, const TrainConfig& config) {
  if (dataset.empty()) throw std::invalid_argument("train_param2stroke: empty dataset");
  if (config.batch_size == 0) throw std::invalid_argument("train_param2stroke: batch size 0");
  if (!(config.validation_fraction >= 0.0 && config.validation_fraction < 1.0)) {
    throw std::invalid_argument("train_param2stroke: validation fraction must be in [0,1)");
  }
  check_stamps(dataset);

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  // Small sets (and a zero fraction) train on everything without validation.
  std::size_t n_val = 0;
  if (dataset.size() >= 5 && config.validation_fraction > 0.0) {
    n_val = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(config.validation_fraction * dataset.size())));
  }
  const std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<long>(n_val));
  std::vector<std::size_t> train(order.begin() + static_cast<long>(n_val), order.end());

  TrainResult result;
  result.train_size = train.size();
  result.validation_size = val.size();
  StrokeShapeModel model = StrokeShapeModel::initialized(config.seed ^ 0x9e3779b97f4a7c15ULL,
                                                         dataset.geometry);

  const auto record_epoch = [&](const StrokeShapeModel& m) {
    EpochLoss e{mean_clamped_mse(m, dataset, train), mean_clamped_mse(m, dataset, val)};
    result.history.push_back(e);
    return n_val > 0 ? e.validation : e.train;
  };

  double best = record_epoch(model);
  result.model = model;
  result.best_epoch = 0;

  std::vector<double> flat;
  for (const auto& t : model.parameters()) flat.insert(flat.end(), t.data().begin(), t.data().end());
  FirstOrderOptimizer opt(OptimizerKind::kAdam, flat.size());
  const std::vector<double> rates(flat.size(), config.learning_rate);
  std::vector<double> grad(flat.size());

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(train.begin(), train.end(), rng);
    for (std::size_t start = 0; start < train.size(); start += config.batch_size) {
      const std::size_t stop = std::min(train.size(), start + config.batch_size);
      ad::Graph g;
      const ModelBinding binding(g, model, true);
      ad::Var total;
      for (std::size_t k = start; k < stop; ++k) {
        const auto& s = dataset.samples[train[k]];
        // Fit the pre-clamp output; the clamp would zero gradients on
        // saturated pixels.
        const ad::Var l = ad::mse(binding.raw(g.constant(shape_tensor(s.shape))), g.constant(s.stamp));
        total = total.valid() ? ad::add(total, l) : l;
      }
      const ad::Var loss = ad::scale(total, 1.0 / static_cast<double>(stop - start));
      g.backward(loss);

      std::size_t off = 0;
      for (const auto& w : binding.weights()) {
        const ad::Tensor gw = g.grad(w);
        std::copy(gw.data().begin(), gw.data().end(), grad.begin() + static_cast<long>(off));
        off += gw.size();
      }
      opt.step(flat, grad, rates);

      std::vector<ad::Tensor> next;
      off = 0;
      for (const auto& t : model.parameters()) {
        next.emplace_back(t.shape(), std::vector<double>(flat.begin() + static_cast<long>(off),
                                                         flat.begin() + static_cast<long>(off + t.size())));
        off += t.size();
      }
      model.set_parameters(next);
    }
    const double score = record_epoch(model);
    if (score < best) {
      best = score;
      result.model = model;
      result.best_epoch = epoch;
    }
  }
  return result;
}

double evaluate_model(const StrokeShapeModel& model, const StrokeDataset& test) {
  if (test.empty()) throw std::invalid_argument("evaluate_model: empty test set");
  check_stamps(test);
  if (!(test.geometry == model.geometry)) {
    throw std::invalid_argument("evaluate_model: test stamps use a different geometry than the model");
  }
  double acc = 0.0;
  for (const auto& s : test.samples) {
    const auto pred = param2stroke_forward(model, s.shape).magnitude;
    double e = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) e += std::abs(pred[i] - s.stamp[i]);
    acc += e / static_cast<double>(pred.size());
  }
  return acc / static_cast<double>(test.size());
}

std::vector<LearningCurvePoint> learning_curve(const StrokeDataset& pool, const StrokeDataset& test,
                                               const std::vector<std::size_t>& sizes, std::size_t folds,
                                               const TrainConfig& config) {
  if (folds == 0) throw std::invalid_argument("learning_curve: need at least one fold");
  std::vector<LearningCurvePoint> out;
  for (std::size_t n : sizes) {
    if (n == 0 || n > pool.size()) {
      throw std::invalid_argument("learning_curve: dataset size " + std::to_string(n) +
                                  " outside 1.." + std::to_string(pool.size()));
    }
    LearningCurvePoint point;
    point.dataset_size = n;
    for (std::size_t f = 0; f < folds; ++f) {
      // fold f draws its own subset; the same subsets for every run with this seed
      std::vector<std::size_t> idx(pool.size());
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                        static_cast<std::uint32_t>(f), 0x5eedu};
      std::mt19937_64 rng(seq);
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(n);
      TrainConfig fc = config;
      fc.seed = config.seed + f;
      const auto trained = train_param2stroke(pool.subset(idx), fc);
      point.fold_mae.push_back(evaluate_model(trained.model, test));
    }
    auto sorted = point.fold_mae;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t m = sorted.size() / 2;
    point.median_mae = sorted.size() % 2 ? sorted[m] : 0.5 * (sorted[m - 1] + sorted[m]);
    out.push_back(std::move(point));
  }
  return out;
}

// ---- model file ----

namespace {

constexpr char kModelMagic[4] = {'P', '2', 'S', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("model file: truncated header");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("model file: truncated data");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

}  // namespace

void save_model(const StrokeShapeModel& model, std::ostream& out) {
  const auto params = model.parameters();
  out.write(kModelMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& t : params) {
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
  }
  put_u32(out, static_cast<std::uint32_t>(model.geometry.rows));
  put_u32(out, static_cast<std::uint32_t>(model.geometry.cols));
  for (const auto& t : params)
    for (double v : t.data()) put_f64(out, v);
  const auto& g = model.geometry;
  const auto& l = model.limits;
  for (double v : {g.meters_per_pixel, g.origin_col, g.origin_row, l.h_min, l.h_max, l.l_min,
                   l.l_max, l.b_max}) {
    put_f64(out, v);
  }
  if (!out) throw std::runtime_error("model file: write failed");
}

StrokeShapeModel load_model(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || !std::equal(magic, magic + 4, kModelMagic)) {
    throw std::runtime_error("model file: missing P2S1 magic");
  }
  const std::uint32_t n = get_u32(in);
  if (n != 8) throw std::runtime_error("model file: expected 8 weight tensors, found " + std::to_string(n));
  std::vector<ad::Shape> shapes;
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint32_t rank = get_u32(in);
    if (rank == 0 || rank > 4) throw std::runtime_error("model file: bad tensor rank");
    ad::Shape s;
    for (std::uint32_t k = 0; k < rank; ++k) s.push_back(get_u32(in));
    shapes.push_back(s);
  }
  StampGeometry geom;
  geom.rows = get_u32(in);
  geom.cols = get_u32(in);
  std::vector<ad::Tensor> params;
  for (const auto& s : shapes) {
    std::vector<double> v(ad::shape_size(s));
    for (double& x : v) x = get_f64(in);
    params.emplace_back(s, std::move(v));
  }
  geom.meters_per_pixel = get_f64(in);
  geom.origin_col = get_f64(in);
  geom.origin_row = get_f64(in);
  StrokeShapeModel m = StrokeShapeModel::zeros(geom);
  m.limits.h_min = get_f64(in);
  m.limits.h_max = get_f64(in);
  m.limits.l_min = get_f64(in);
  m.limits.l_max = get_f64(in);
  m.limits.b_max = get_f64(in);
  m.set_parameters(params);
  return m;
}

void save_model(const StrokeShapeModel& model, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  save_model(model, f);
}

StrokeShapeModel load_model(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  return load_model(f);
}

}  // namespace brushplan
