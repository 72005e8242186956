#include "brushplan/planner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "brushplan/ad/ops.hpp"
#include "brushplan/numeric_text.hpp"
#include "brushplan/renderer.hpp"

namespace brushplan {

std::size_t Palette::nearest(const Rgb& c) const {
  if (colors.empty()) throw std::logic_error("palette is empty");
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < colors.size(); ++k) {
    double d = 0.0;
    for (std::size_t ch = 0; ch < 3; ++ch) d += (c[ch] - colors[k][ch]) * (c[ch] - colors[k][ch]);
    if (d < best_d) best_d = d, best = k;
  }
  return best;
}

void PlannerConfig::validate() const {
  if (n_strokes < 1) throw std::invalid_argument("planner: n_strokes must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("planner: batch_size must be >= 1");
  objectives.validate();
  if (init_objectives) init_objectives->validate();
}

Plan init_plan(std::size_t n_strokes, const CanvasGeometry& geometry, std::mt19937_64& rng,
               const ShapeLimits& limits) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto between = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  Plan plan;
  plan.geometry = geometry;
  for (std::size_t i = 0; i < n_strokes; ++i) {
    StrokeParams s;
    s.shape.h = between(limits.h_min, limits.h_max);
    s.shape.l = between(limits.l_min, limits.l_max);
    s.shape.b = between(-limits.b_max, limits.b_max);
    s.x = unit(rng);
    s.y = unit(rng);
    s.theta = wrap_angle(between(-std::numbers::pi, std::numbers::pi));
    for (double& c : s.color) c = unit(rng);
    plan.strokes.push_back(s);
  }
  return plan;
}

OptimizeOptions OptimizeOptions::from(const PlannerConfig& config, std::size_t iterations) {
  OptimizeOptions o;
  o.iterations = iterations;
  o.learning_rates = config.learning_rates;
  o.groups = config.groups;
  o.optimizer = config.optimizer;
  o.palette_k = config.palette_k;
  o.discretize_period = config.discretize_period;
  o.sort_light_to_dark = config.sort_light_to_dark;
  o.limits = config.limits;
  o.seed = config.seed;
  return o;
}

namespace {

constexpr std::size_t kStride = 9;  // h l b x y theta r g b

std::vector<double> pack(const Plan& plan) {
  std::vector<double> v;
  v.reserve(plan.size() * kStride);
  for (const auto& s : plan.strokes) {
    v.insert(v.end(), {s.shape.h, s.shape.l, s.shape.b, s.x, s.y, s.theta, s.color[0], s.color[1],
                       s.color[2]});
  }
  return v;
}

Plan unpack(const std::vector<double>& v, const CanvasGeometry& geometry) {
  Plan plan;
  plan.geometry = geometry;
  for (std::size_t i = 0; i + kStride <= v.size(); i += kStride) {
    StrokeParams s;
    s.shape = {v[i], v[i + 1], v[i + 2]};
    s.x = v[i + 3];
    s.y = v[i + 4];
    s.theta = v[i + 5];
    s.color = {v[i + 6], v[i + 7], v[i + 8]};
    plan.strokes.push_back(s);
  }
  return plan;
}

void clamp_params(std::vector<double>& v, const ShapeLimits& lim) {
  for (std::size_t i = 0; i < v.size(); i += kStride) {
    v[i] = std::clamp(v[i], lim.h_min, lim.h_max);
    v[i + 1] = std::clamp(v[i + 1], lim.l_min, lim.l_max);
    v[i + 2] = std::clamp(v[i + 2], -lim.b_max, lim.b_max);
    v[i + 3] = std::clamp(v[i + 3], 0.0, 1.0);
    v[i + 4] = std::clamp(v[i + 4], 0.0, 1.0);
    v[i + 5] = wrap_angle(v[i + 5]);
    for (std::size_t c = 6; c < 9; ++c) v[i + c] = std::clamp(v[i + c], 0.0, 1.0);
  }
}

template <typename T>
void permute_rows(std::vector<T>& v, const std::vector<std::size_t>& order) {
  std::vector<T> out(v.size());
  for (std::size_t k = 0; k < order.size(); ++k)
    std::copy_n(v.begin() + static_cast<long>(order[k] * kStride), kStride,
                out.begin() + static_cast<long>(k * kStride));
  v = std::move(out);
}

double squared_distance(const Rgb& a, const Rgb& b) {
  double d = 0.0;
  for (std::size_t c = 0; c < 3; ++c) d += (a[c] - b[c]) * (a[c] - b[c]);
  return d;
}

}  // namespace

std::pair<Plan, Palette> discretize_colors(const Plan& plan, std::size_t k, std::uint64_t seed) {
  if (plan.empty()) throw std::invalid_argument("discretize_colors: empty plan");
  if (k == 0) throw std::invalid_argument("discretize_colors: K must be >= 1");
  const std::size_t n = plan.size();
  if (k > n) {
    std::cerr << "warning: palette size " << k << " exceeds the " << n << " strokes; using " << n
              << '\n';
    k = n;
  }
  std::vector<Rgb> pts;
  for (const auto& s : plan.strokes) pts.push_back(s.color);

  // k-means++ seeding
  std::mt19937_64 rng(seed);
  std::vector<Rgb> centroids{pts[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)]};
  std::vector<double> d2(n);
  while (centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centroids) best = std::min(best, squared_distance(pts[i], c));
      d2[i] = best;
      total += best;
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      // Roundoff fallback: the last point with positive weight.
      for (std::size_t i = 0; i < n; ++i)
        if (d2[i] > 0.0) pick = i;
      double r = std::uniform_real_distribution<double>(0.0, total)(rng);
      for (std::size_t i = 0; i < n; ++i) {
        if (r < d2[i]) {
          pick = i;
          break;
        }
        r -= d2[i];
      }
    } else {
      pick = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    }
    centroids.push_back(pts[pick]);
  }

  // Lloyd iterations
  std::vector<std::size_t> assign(n, 0);
  const auto assign_all = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = squared_distance(pts[i], centroids[c]);
        if (d < best) best = d, assign[i] = c;
      }
    }
  };
  for (int it = 0; it < 100; ++it) {
    assign_all();
    double moved = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      // Mean as first member plus mean offset, so identical members give
      // back exactly their color.
      std::size_t count = 0, first = n;
      Rgb acc{0, 0, 0};
      for (std::size_t i = 0; i < n; ++i) {
        if (assign[i] != c) continue;
        if (first == n) first = i;
        for (std::size_t ch = 0; ch < 3; ++ch) acc[ch] += pts[i][ch] - pts[first][ch];
        ++count;
      }
      if (count == 0) continue;
      Rgb next;
      for (std::size_t ch = 0; ch < 3; ++ch) next[ch] = pts[first][ch] + acc[ch] / static_cast<double>(count);
      moved = std::max(moved, std::sqrt(squared_distance(next, centroids[c])));
      centroids[c] = next;
    }
    if (moved < 1e-6) break;
  }
  assign_all();

  Plan out = plan;
  for (std::size_t i = 0; i < n; ++i) out.strokes[i].color = centroids[assign[i]];

  Palette palette;
  for (const auto& c : centroids)
    if (std::find(palette.colors.begin(), palette.colors.end(), c) == palette.colors.end())
      palette.colors.push_back(c);
  std::stable_sort(palette.colors.begin(), palette.colors.end(),
                   [](const Rgb& a, const Rgb& b) { return luminance(a) > luminance(b); });
  return {out, palette};
}

Plan project_to_palette(const Plan& plan, const Palette& palette) {
  Plan out = plan;
  for (auto& s : out.strokes) s.color = palette.colors[palette.nearest(s.color)];
  return out;
}

std::vector<std::size_t> light_to_dark_order(const Plan& plan) {
  std::vector<std::size_t> order(plan.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return luminance(plan.strokes[a].color) > luminance(plan.strokes[b].color);
  });
  return order;
}

Plan sort_light_to_dark(const Plan& plan) {
  Plan out;
  out.geometry = plan.geometry;
  for (std::size_t i : light_to_dark_order(plan)) out.strokes.push_back(plan.strokes[i]);
  return out;
}

OptimizeResult optimize(const Plan& plan, const Canvas& base, const StrokeShapeModel& model,
                        const Objective& objective, const OptimizeOptions& options) {
  OptimizeResult result;
  result.plan = plan;
  if (options.iterations == 0 || plan.empty()) return result;
  if (!(plan.geometry == base.geometry)) {
    throw std::invalid_argument("optimize: plan and base canvas geometries differ");
  }

  const auto& lim = options.limits;
  const auto& lr = options.learning_rates;
  const auto& grp = options.groups;
  const double shape_lr[3] = {lr.shape * (lim.h_max - lim.h_min), lr.shape * (lim.l_max - lim.l_min),
                              lr.shape * 2.0 * lim.b_max};
  std::vector<double> params = pack(plan);
  clamp_params(params, lim);
  const std::size_t n = plan.size();
  std::vector<double> rates(params.size());
  for (std::size_t i = 0; i < n; ++i) {
    double* r = rates.data() + i * kStride;
    for (int k = 0; k < 3; ++k) r[k] = grp.shape ? shape_lr[k] : 0.0;
    for (int k = 3; k < 6; ++k) r[k] = grp.pose ? lr.pose : 0.0;
    for (int k = 6; k < 9; ++k) r[k] = grp.color ? lr.color : 0.0;
  }

  FirstOrderOptimizer opt(options.optimizer, params.size());
  std::vector<double> grad(params.size());
  std::vector<double> best_params = params;
  double best = std::numeric_limits<double>::infinity();
  std::optional<Palette> palette = options.fixed_palette;
  const bool discretize = options.palette_k > 0 || options.fixed_palette.has_value();

  const auto discretize_now = [&](bool permute_state) {
    Plan cur = unpack(params, plan.geometry);
    if (options.fixed_palette) {
      cur = project_to_palette(cur, *options.fixed_palette);
    } else {
      auto [projected, pal] = discretize_colors(cur, options.palette_k, options.seed);
      cur = std::move(projected);
      palette = std::move(pal);
    }
    params = pack(cur);
    if (options.sort_light_to_dark) {
      const auto order = light_to_dark_order(cur);
      permute_rows(params, order);
      if (permute_state) {
        permute_rows(opt.first_moment, order);
        permute_rows(opt.second_moment, order);
      }
    }
  };

  for (std::size_t k = 0; k < options.iterations; ++k) {
    if (discretize && options.discretize_period > 0 && k > 0 && k % options.discretize_period == 0) {
      discretize_now(true);
    }
    ad::Graph g;
    const ModelBinding binding(g, model, false);
    std::vector<StrokeVars> vars(n);
    const auto node = [&](std::size_t i, std::size_t off, bool trainable) {
      ad::Tensor t({3}, std::vector<double>(params.begin() + static_cast<long>(i * kStride + off),
                                            params.begin() + static_cast<long>(i * kStride + off + 3)));
      return trainable ? g.leaf(std::move(t)) : g.constant(std::move(t));
    };
    for (std::size_t i = 0; i < n; ++i) {
      vars[i] = {node(i, 0, grp.shape), node(i, 3, grp.pose), node(i, 6, grp.color)};
    }
    const ad::Var rendered = render_strokes(binding, vars, g.constant(base.rgb), plan.geometry);
    const ad::Var loss = objective.evaluate(rendered);
    const double value = loss.value().item();
    result.history.push_back(value);
    if (value < best) {
      best = value;
      best_params = params;
      result.best_iteration = k;
    }
    result.best_history.push_back(best);
    if (k + 1 == options.iterations) break;

    g.backward(loss);
    for (std::size_t i = 0; i < n; ++i) {
      const ad::Var parts[3] = {vars[i].shape, vars[i].pose, vars[i].color};
      for (std::size_t p = 0; p < 3; ++p) {
        const ad::Tensor gp = g.grad(parts[p]);
        std::copy(gp.data().begin(), gp.data().end(), grad.begin() + static_cast<long>(i * kStride + 3 * p));
      }
    }
    opt.step(params, grad, rates);
    clamp_params(params, lim);
  }

  params = best_params;
  if (discretize) discretize_now(false);
  result.plan = unpack(params, plan.geometry);
  result.palette = palette;
  return result;
}

double plan_deviation(const Plan& now, const Plan& initial, const Canvas& base,
                      const StrokeShapeModel& model) {
  return mean_sq_difference(render_plan(now, base, model), render_plan(initial, base, model));
}

std::vector<double> PaintResult::deviations() const {
  std::vector<double> out;
  for (const auto& r : trace) out.push_back(r.deviation);
  return out;
}

OptimizeResult plan_strokes(const PlannerConfig& config, const FeatureExtractor& extractor,
                            const StrokeShapeModel& model, const Canvas& base) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  Plan plan = init_plan(config.n_strokes, base.geometry, rng, config.limits);
  if (config.init_objectives) {
    const Objective init(*config.init_objectives, extractor);
    auto options = OptimizeOptions::from(config, config.init_iterations);
    options.palette_k = 0;
    plan = optimize(plan, base, model, init, options).plan;
  }
  const Objective main(config.objectives, extractor);
  return optimize(plan, base, model, main, OptimizeOptions::from(config, config.init_iterations));
}

PaintResult paint_from(const PlannerConfig& config, const Objective& objective,
                       const StrokeShapeModel& model, Executor& executor,
                       const OptimizeResult& initial) {
  config.validate();
  PaintResult out;
  out.initial_optimization = initial;
  out.initial_plan = initial.plan;
  out.palette = initial.palette;
  out.initial_simulation = render_plan(initial.plan, executor.perceive(), model);

  auto options = OptimizeOptions::from(config, config.replan_iterations);
  options.fixed_palette = initial.palette;
  if (!initial.palette) options.palette_k = 0;

  Plan plan = initial.plan;
  while (!plan.empty()) {
    PaintRound round;
    const Canvas perceived = executor.perceive();
    round.remaining = plan;
    round.simulated = render_plan(plan, perceived, model);
    round.executed = plan.slice(0, config.batch_size);
    executor.execute(round.executed.strokes);
    plan = plan.slice(config.batch_size, plan.size());
    round.perceived_after = executor.perceive();
    if (config.replan && !plan.empty()) {
      auto r = optimize(plan, round.perceived_after, model, objective, options);
      plan = std::move(r.plan);
      round.replan_history = std::move(r.history);
    }
    round.deviation =
        mean_sq_difference(render_plan(plan, round.perceived_after, model), out.initial_simulation);
    out.trace.push_back(std::move(round));
  }
  out.final_canvas = executor.canvas();
  return out;
}

PaintResult paint(const PlannerConfig& config, const FeatureExtractor& extractor,
                  const StrokeShapeModel& model, Executor& executor) {
  config.validate();
  const Canvas base = executor.perceive();
  const OptimizeResult initial = plan_strokes(config, extractor, model, base);
  const Objective main(config.objectives, extractor);
  return paint_from(config, main, model, executor, initial);
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<double>& best_history) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  f << "iteration,loss\n";
  for (std::size_t i = 0; i < best_history.size(); ++i) f << i << ',' << format_double(best_history[i]) << '\n';
  if (!f) throw std::runtime_error("write failed for " + path.string());
}

void write_deviation_csv(const std::filesystem::path& path, const std::vector<double>& deviations) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  f << "batch,deviation\n";
  for (std::size_t i = 0; i < deviations.size(); ++i) f << i + 1 << ',' << format_double(deviations[i]) << '\n';
  if (!f) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace brushplan
