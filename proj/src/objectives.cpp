#include "brushplan/objectives.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "brushplan/ad/ops.hpp"
#include "brushplan/numeric_text.hpp"
#include "brushplan/renderer.hpp"

namespace brushplan {

ad::Tensor FeatureExtractor::text_embedding(const std::string&) const {
  throw std::logic_error("feature extractor has no text embedding capability");
}

namespace {

constexpr double kBinomial[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};

std::size_t clamp_index(long v, std::size_t n) {
  return static_cast<std::size_t>(std::clamp<long>(v, 0, static_cast<long>(n) - 1));
}

}  // namespace

ad::Var blur_down(ad::Var x) {
  const auto& xv = x.value();
  const std::size_t C = xv.dim(0), H = xv.dim(1), W = xv.dim(2);
  const std::size_t OH = (H + 1) / 2, OW = (W + 1) / 2;
  const auto for_taps = [=](auto&& body) {
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t i = 0; i < OH; ++i)
        for (int a = -2; a <= 2; ++a) {
          const std::size_t r = clamp_index(static_cast<long>(2 * i) + a, H);
          for (std::size_t j = 0; j < OW; ++j)
            for (int b = -2; b <= 2; ++b) {
              const std::size_t q = clamp_index(static_cast<long>(2 * j) + b, W);
              body((c * OH + i) * OW + j, (c * H + r) * W + q, kBinomial[a + 2] * kBinomial[b + 2]);
            }
        }
  };
  std::vector<double> out(C * OH * OW, 0.0);
  const auto xd = xv.data();
  for_taps([&](std::size_t o, std::size_t in, double w) { out[o] += w * xd[in]; });
  return x.graph().record(
      ad::Tensor({C, OH, OW}, std::move(out)), {x},
      [for_taps](ad::BackwardContext& ctx) {
        const auto g = ctx.grad_out();
        auto gx = ctx.input_grad(0);
        for_taps([&](std::size_t o, std::size_t in, double w) { gx[in] += w * g[o]; });
      },
      "blur_down");
}

ad::Var luminance_gradients(ad::Var x) {
  const auto& xv = x.value();
  const std::size_t H = xv.dim(1), W = xv.dim(2), plane = H * W;
  constexpr double lum[3] = {0.299, 0.587, 0.114};
  const auto for_taps = [=](auto&& body) {
    for (std::size_t i = 0; i < H; ++i)
      for (std::size_t j = 0; j < W; ++j) {
        const std::size_t o = i * W + j;
        const std::size_t jl = clamp_index(static_cast<long>(j) - 1, W), jr = clamp_index(static_cast<long>(j) + 1, W);
        const std::size_t iu = clamp_index(static_cast<long>(i) - 1, H), id = clamp_index(static_cast<long>(i) + 1, H);
        for (std::size_t c = 0; c < 3; ++c) {
          const double w = 0.5 * lum[c];
          body(o, c * plane + i * W + jr, w);
          body(o, c * plane + i * W + jl, -w);
          body(plane + o, c * plane + id * W + j, w);
          body(plane + o, c * plane + iu * W + j, -w);
        }
      }
  };
  std::vector<double> out(2 * plane, 0.0);
  const auto xd = xv.data();
  for_taps([&](std::size_t o, std::size_t in, double w) { out[o] += w * xd[in]; });
  return x.graph().record(
      ad::Tensor({2, H, W}, std::move(out)), {x},
      [for_taps](ad::BackwardContext& ctx) {
        const auto g = ctx.grad_out();
        auto gx = ctx.input_grad(0);
        for_taps([&](std::size_t o, std::size_t in, double w) { gx[in] += w * g[o]; });
      },
      "luminance_gradients");
}

namespace {

ad::Tensor normal_tensor(ad::Shape shape, double sd, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, sd);
  std::vector<double> v(ad::shape_size(shape));
  for (double& x : v) x = n(rng);
  return ad::Tensor(std::move(shape), std::move(v));
}

std::uint64_t fnv1a(const std::string& s, std::uint64_t seed) {
  std::uint64_t h = 1469598103934665603ULL ^ seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

void check_canvas(ad::Var v, const char* op) {
  if (v.value().rank() != 3 || v.value().dim(0) != 3) {
    throw std::invalid_argument(std::string(op) + ": expected a [3,H,W] canvas, got " +
                                ad::shape_string(v.shape()));
  }
}

}  // namespace

Features BuiltinExtractor::extract(ad::Var canvas) const {
  check_canvas(canvas, "BuiltinExtractor");
  Features f;
  ad::Var level = canvas;
  for (std::size_t l = 0; l < kLevels; ++l) {
    if (l > 0) level = blur_down(level);
    const ad::Var parts[2] = {level, ad::abs(luminance_gradients(level))};
    f.layers.push_back(ad::concat(parts));
  }
  const ad::Var deep = f.layers.back();
  const auto& P = projection(deep.size());
  const ad::Var proj = ad::matmul(ad::reshape(deep, {1, deep.size()}), canvas.graph().constant(P));
  f.embedding = ad::l2_normalize(ad::reshape(proj, {kEmbeddingDim}));
  return f;
}

const ad::Tensor& BuiltinExtractor::projection(std::size_t input_dim) const {
  std::lock_guard lock(mutex_);
  auto& slot = projections_[input_dim];
  if (!slot) {
    std::mt19937_64 rng(seed_ * 0x9e3779b97f4a7c15ULL + input_dim);
    slot = std::make_shared<const ad::Tensor>(
        normal_tensor({input_dim, kEmbeddingDim}, 1.0 / std::sqrt(static_cast<double>(input_dim)), rng));
  }
  return *slot;
}

ad::Tensor BuiltinExtractor::text_embedding(const std::string& text) const {
  std::vector<double> acc(kEmbeddingDim, 0.0);
  std::size_t tokens = 0;
  std::string word;
  const auto flush = [&] {
    if (word.empty()) return;
    std::mt19937_64 rng(fnv1a(word, seed_));
    std::normal_distribution<double> n(0.0, 1.0);
    for (double& a : acc) a += n(rng);
    ++tokens;
    word.clear();
  };
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      word.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  if (tokens == 0) throw std::invalid_argument("text embedding: no words in '" + text + "'");
  double norm = 0.0;
  for (double a : acc) norm += a * a;
  norm = std::sqrt(norm);
  for (double& a : acc) a /= norm;
  return ad::Tensor({kEmbeddingDim}, std::move(acc));
}

void ObjectiveConfig::validate() const {
  const struct {
    const char* name;
    double w;
    bool present;
  } terms[] = {{"text", weights.text, text.has_value() || text_embedding.has_value()},
               {"style", weights.style, style.has_value()},
               {"print", weights.print, target.has_value()},
               {"semantic", weights.semantic, target.has_value()}};
  for (const auto& t : terms) {
    if (!(t.w >= 0.0) || !std::isfinite(t.w)) {
      throw std::invalid_argument(std::string("objective weight '") + t.name + "' must be a finite value >= 0");
    }
    if (t.w > 0.0 && !t.present) {
      throw std::invalid_argument(std::string("objective weight '") + t.name +
                                  "' is nonzero but its target is missing");
    }
  }
  if (weights.style > 0.0 && style_positions == 0) {
    throw std::invalid_argument("style loss needs at least one sampling position");
  }
}

ad::Var loss_print(ad::Var rendered, ad::Var target) {
  if (rendered.shape() != target.shape()) {
    throw std::invalid_argument("loss_print: incompatible shapes " + ad::shape_string(rendered.shape()) +
                                " and " + ad::shape_string(target.shape()));
  }
  return ad::mse(rendered, target);
}

ad::Var loss_semantic(ad::Var rendered, ad::Var target, const FeatureExtractor& extractor) {
  if (rendered.shape() != target.shape()) {
    throw std::invalid_argument("loss_semantic: incompatible shapes " + ad::shape_string(rendered.shape()) +
                                " and " + ad::shape_string(target.shape()));
  }
  return ad::mse(extractor.extract(rendered).layers.back(), extractor.extract(target).layers.back());
}

ad::Var style_features(const Features& features, std::size_t positions, std::uint64_t seed) {
  if (positions == 0) throw std::invalid_argument("style_features: need at least one position");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::pair<double, double>> uv(positions);
  for (auto& p : uv) {
    p.first = unit(rng);
    p.second = unit(rng);
  }
  std::size_t dim = 0;
  std::vector<ad::Var> flat;
  for (const auto& l : features.layers) {
    dim += l.value().dim(0);
    flat.push_back(ad::reshape(l, {l.size()}));
  }
  std::vector<std::size_t> idx;
  idx.reserve(positions * dim);
  for (const auto& [u, v] : uv) {
    std::size_t base = 0;
    for (const auto& l : features.layers) {
      const std::size_t C = l.value().dim(0), h = l.value().dim(1), w = l.value().dim(2);
      const std::size_t r = std::min(h - 1, static_cast<std::size_t>(v * static_cast<double>(h)));
      const std::size_t q = std::min(w - 1, static_cast<std::size_t>(u * static_cast<double>(w)));
      for (std::size_t c = 0; c < C; ++c) idx.push_back(base + (c * h + r) * w + q);
      base += l.size();
    }
  }
  const ad::Var all = ad::concat(flat);
  return ad::center_columns(ad::gather(all, std::move(idx), {positions, dim}));
}

ad::Var loss_style(ad::Var rendered, ad::Var style, const FeatureExtractor& extractor,
                   std::size_t positions, std::uint64_t seed) {
  check_canvas(style, "loss_style");
  return ad::remd(style_features(extractor.extract(rendered), positions, seed),
                  style_features(extractor.extract(style), positions, seed));
}

ad::Var loss_text(ad::Var rendered, const ad::Tensor& target_embedding,
                  const FeatureExtractor& extractor) {
  if (target_embedding.size() != extractor.embedding_dim()) {
    throw std::invalid_argument("loss_text: target embedding has " + std::to_string(target_embedding.size()) +
                                " entries, extractor produces " + std::to_string(extractor.embedding_dim()));
  }
  const auto e = extractor.extract(rendered).embedding;
  return ad::cosine_distance(e, rendered.graph().constant(target_embedding.reshaped(e.shape())));
}

ad::Var loss_text(ad::Var rendered, const std::string& text, const FeatureExtractor& extractor) {
  if (!extractor.has_text()) {
    throw std::invalid_argument("loss_text: feature extractor has no text embedding capability");
  }
  return loss_text(rendered, extractor.text_embedding(text), extractor);
}

Objective::Objective(ObjectiveConfig config, const FeatureExtractor& extractor)
    : config_(std::move(config)), extractor_(&extractor) {
  config_.validate();
  const auto& w = config_.weights;
  ad::Graph g;
  if (config_.target && (w.print > 0.0 || w.semantic > 0.0)) {
    target_rgb_ = config_.target->rgb;
    if (w.semantic > 0.0) target_deep_ = extractor.extract(g.constant(target_rgb_)).layers.back().value();
  }
  if (w.style > 0.0) {
    style_set_ = style_features(extractor.extract(g.constant(config_.style->rgb)),
                                config_.style_positions, config_.style_seed)
                     .value();
  }
  if (w.text > 0.0) {
    if (config_.text_embedding) {
      text_vec_ = *config_.text_embedding;
      if (text_vec_.size() != extractor.embedding_dim()) {
        throw std::invalid_argument("text target embedding has " + std::to_string(text_vec_.size()) +
                                    " entries, extractor produces " + std::to_string(extractor.embedding_dim()));
      }
    } else {
      if (!extractor.has_text()) {
        throw std::invalid_argument("objective weight 'text' needs an extractor with text embeddings");
      }
      text_vec_ = extractor.text_embedding(*config_.text);
    }
  }
}

bool Objective::needs_features() const {
  const auto& w = config_.weights;
  return w.text > 0.0 || w.style > 0.0 || w.semantic > 0.0;
}

ad::Var Objective::evaluate(ad::Var rendered) const {
  check_canvas(rendered, "objective");
  auto& g = rendered.graph();
  const auto& w = config_.weights;
  ad::Var total;
  const auto accumulate = [&](double weight, ad::Var term) {
    const ad::Var t = ad::scale(term, weight);
    total = total.valid() ? ad::add(total, t) : t;
  };
  // Same term order as the weight vector: text, style, print, semantic.
  Features f;
  if (needs_features()) f = extractor_->extract(rendered);
  if (w.text > 0.0) {
    accumulate(w.text, ad::cosine_distance(f.embedding, g.constant(text_vec_.reshaped(f.embedding.shape()))));
  }
  if (w.style > 0.0) {
    accumulate(w.style, ad::remd(style_features(f, config_.style_positions, config_.style_seed),
                                 g.constant(style_set_)));
  }
  if (w.print > 0.0) accumulate(w.print, loss_print(rendered, g.constant(target_rgb_)));
  if (w.semantic > 0.0) {
    const ad::Var deep = f.layers.back();
    if (deep.shape() != target_deep_.shape()) {
      throw std::invalid_argument("loss_semantic: incompatible shapes " + ad::shape_string(deep.shape()) +
                                  " and " + ad::shape_string(target_deep_.shape()));
    }
    accumulate(w.semantic, ad::mse(deep, g.constant(target_deep_)));
  }
  return total.valid() ? total : g.constant(ad::Tensor::scalar(0.0));
}

ad::Var total_loss(ad::Graph& graph, const Plan& plan, const Canvas& base,
                   const StrokeShapeModel& model, const ObjectiveConfig& config,
                   const FeatureExtractor& extractor) {
  const Objective objective(config, extractor);
  const ModelBinding binding(graph, model, false);
  std::vector<StrokeVars> vars;
  for (const auto& s : plan.strokes) vars.push_back(constant_stroke(graph, s));
  const ad::Var rendered = render_strokes(binding, vars, graph.constant(base.rgb), plan.geometry);
  return objective.evaluate(rendered);
}

ad::Tensor read_feature_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  std::string text = ss.str();
  std::replace(text.begin(), text.end(), '\n', ' ');
  const auto fields = split_fields(text);  // views into text
  if (fields.size() < 2 || fields[0] != "FEAT1") {
    throw std::runtime_error("feature file " + path.string() + ": missing FEAT1 header");
  }
  const double dim = parse_double(fields[1], "feature dimension");
  if (!(dim >= 1.0) || dim != std::floor(dim) || fields.size() - 2 != static_cast<std::size_t>(dim)) {
    throw std::runtime_error("feature file " + path.string() + ": value count does not match the header");
  }
  std::vector<double> v;
  for (std::size_t i = 2; i < fields.size(); ++i) v.push_back(parse_double(fields[i], "feature value"));
  const std::size_t n = v.size();
  return ad::Tensor({n}, std::move(v));
}

void write_feature_file(const std::filesystem::path& path, const ad::Tensor& features) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  f << "FEAT1 " << features.size() << '\n';
  for (std::size_t i = 0; i < features.size(); ++i) f << (i ? " " : "") << format_double(features[i]);
  f << '\n';
}

}  // namespace brushplan
