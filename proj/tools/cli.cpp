#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>

#include "brushplan/calibration.hpp"
#include "brushplan/dataset.hpp"
#include "brushplan/execution.hpp"
#include "brushplan/numeric_text.hpp"
#include "brushplan/objectives.hpp"
#include "brushplan/planner.hpp"
#include "brushplan/renderer.hpp"
#include "brushplan/stroke_model.hpp"

namespace fs = std::filesystem;

namespace brushplan::cli {
namespace {

constexpr std::size_t kDefaultTrainingStrokes = 200;
constexpr std::size_t kTestStrokes = 50;

struct TrainArgs {
  std::string dataset;
  std::size_t generate = 0;
  std::uint64_t seed = 0;
  std::size_t epochs = 200;
  double lr = 3e-3;
  std::vector<std::size_t> sweep;
  std::size_t folds = 5;
  std::string save_dataset;
  std::string out = "model.p2s";
};

struct PlanArgs {
  std::string target, style, text, text_features, model;
  std::vector<std::string> objective{"print"};
  std::vector<double> weights;
  std::size_t strokes = 100;
  std::size_t batch = 30;
  std::size_t iters = 300;
  std::size_t replan_iters = 100;
  std::uint64_t seed = 0;
  std::size_t palette_k = 12;
  double canvas_width = 0.1;
  std::string optimizer = "adam";
  double noise = 1.0;
  std::string exec_render = "oracle";
  bool no_replan = false;
  std::string out = ".";
};

struct CalibrateArgs {
  std::string correspondences, checker, image;
  std::vector<double> corners;
  double canvas_width = 0.1;
  std::string out;
};

// ---- train ----

// Held-out strokes: for generated data, the next strokes of the same
// stream; for imported data, a seeded fifth of it.
std::pair<StrokeDataset, StrokeDataset> training_split(const TrainArgs& a) {
  if (!a.dataset.empty()) {
    auto all = load_dataset(a.dataset);
    if (all.size() < 2) throw std::runtime_error("dataset needs at least 2 strokes to hold some out");
    std::vector<std::size_t> idx(all.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(a.seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    const std::size_t n_test = std::max<std::size_t>(1, all.size() / 5);
    const std::vector<std::size_t> test(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
    const std::vector<std::size_t> pool(idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
    return {all.subset(pool), all.subset(test)};
  }
  const std::size_t n = a.generate ? a.generate : kDefaultTrainingStrokes;
  auto all = generate_dataset(n + kTestStrokes, a.seed);
  std::vector<std::size_t> pool(n), test(kTestStrokes);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  std::iota(test.begin(), test.end(), n);
  return {all.subset(pool), all.subset(test)};
}

int cmd_train(const TrainArgs& a) {
  if (!a.dataset.empty() && a.generate) throw std::invalid_argument("use either --dataset or --generate");
  auto [pool, test] = training_split(a);
  if (!a.save_dataset.empty()) save_dataset(pool, a.save_dataset);

  TrainConfig tc;
  tc.epochs = a.epochs;
  tc.learning_rate = a.lr;
  tc.seed = a.seed;

  std::vector<LearningCurvePoint> curve;
  if (!a.sweep.empty()) curve = learning_curve(pool, test, a.sweep, a.folds, tc);

  const auto result = train_param2stroke(pool, tc);
  const fs::path out = a.out;
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_model(result.model, out);
  const double mae = evaluate_model(result.model, test);
  if (curve.empty()) curve.push_back({pool.size(), mae, {mae}});

  const fs::path csv = out.parent_path() / "learning_curve.csv";
  std::ofstream f(csv, std::ios::binary | std::ios::trunc);
  f << "dataset_size,median_test_MAE\n";
  for (const auto& p : curve) f << p.dataset_size << ',' << format_double(p.median_mae) << '\n';
  if (!f) throw std::runtime_error("cannot write " + csv.string());

  std::printf("trained on %zu strokes (%s), best epoch %zu, held-out MAE %.5f -> %s\n", pool.size(),
              pool.provenance.c_str(), result.best_epoch, mae, out.string().c_str());
  for (const auto& p : curve) {
    if (!a.sweep.empty()) std::printf("  n=%zu median MAE %.5f\n", p.dataset_size, p.median_mae);
  }
  return 0;
}

// ---- plan / paint ----

ObjectiveConfig objective_config(const PlanArgs& a, double canvas_width) {
  if (!a.weights.empty() && a.weights.size() != a.objective.size()) {
    throw std::invalid_argument("--weights needs one value per --objective entry");
  }
  ObjectiveConfig oc;
  for (std::size_t i = 0; i < a.objective.size(); ++i) {
    const double w = a.weights.empty() ? 1.0 : a.weights[i];
    const auto& name = a.objective[i];
    if (name == "print") oc.weights.print = w;
    else if (name == "semantic") oc.weights.semantic = w;
    else if (name == "style") oc.weights.style = w;
    else if (name == "text") oc.weights.text = w;
    else throw std::invalid_argument("unknown objective '" + name + "' (print|semantic|style|text)");
  }
  if (!a.target.empty()) oc.target = read_canvas(a.target, canvas_width);
  if (!a.style.empty()) oc.style = read_canvas(a.style, canvas_width);
  if (!a.text.empty()) oc.text = a.text;
  if (!a.text_features.empty()) oc.text_embedding = read_feature_file(a.text_features);
  oc.style_seed = a.seed;
  oc.validate();
  return oc;
}

PlannerConfig planner_config(const PlanArgs& a) {
  PlannerConfig pc;
  pc.n_strokes = a.strokes;
  pc.batch_size = a.batch;
  pc.init_iterations = a.iters;
  pc.replan_iterations = a.replan_iters;
  pc.palette_k = a.palette_k;
  pc.replan = !a.no_replan;
  pc.seed = a.seed;
  pc.optimizer = a.optimizer == "sgd" ? OptimizerKind::kSgd : OptimizerKind::kAdam;
  pc.objectives = objective_config(a, a.canvas_width);
  pc.validate();
  return pc;
}

CanvasGeometry canvas_geometry(const PlanArgs& a, const ObjectiveConfig& oc) {
  if (oc.target) return oc.target->geometry;
  if (oc.style) return oc.style->geometry;
  return CanvasGeometry::with_width(64, 64, a.canvas_width);
}

StrokeShapeModel model_for(const PlanArgs& a) {
  if (!a.model.empty()) return load_model(a.model);
  std::fprintf(stderr, "no --model given; training a default model on %zu oracle strokes\n",
               kDefaultTrainingStrokes);
  TrainConfig tc;
  tc.seed = a.seed;
  return train_param2stroke(generate_dataset(kDefaultTrainingStrokes, a.seed), tc).model;
}

void report_loss(const char* what, const Canvas& canvas, const ObjectiveConfig& oc) {
  if (oc.target) std::printf("%s loss_print %.6f\n", what, mean_sq_difference(canvas, *oc.target));
}

int cmd_plan(const PlanArgs& a) {
  const auto pc = planner_config(a);
  const auto geometry = canvas_geometry(a, pc.objectives);
  const auto model = model_for(a);
  const BuiltinExtractor extractor(a.seed);
  const auto base = Canvas::blank(geometry);
  const auto result = plan_strokes(pc, extractor, model, base);

  const fs::path out = a.out;
  fs::create_directories(out);
  write_plan(out / "plan.txt", result.plan);
  const auto sim = render_plan(result.plan, base, model);
  write_canvas(out / "sim.ppm", sim);
  write_loss_csv(out / "loss.csv", result.best_history);
  if (!result.history.empty()) {
    std::printf("loss %.6f -> %.6f (best iterate %zu of %zu)\n", result.history.front(),
                result.best_history.back(), result.best_iteration, result.history.size());
  }
  report_loss("simulated", sim, pc.objectives);
  return 0;
}

int cmd_paint(const PlanArgs& a) {
  if (!(a.noise >= 0.0)) throw std::invalid_argument("--noise must be >= 0");
  if (a.exec_render != "oracle" && a.exec_render != "model") {
    throw std::invalid_argument("--exec-render must be oracle or model");
  }
  const auto pc = planner_config(a);
  const auto geometry = canvas_geometry(a, pc.objectives);
  const auto model = model_for(a);
  const BuiltinExtractor extractor(a.seed);
  const auto mode = a.exec_render == "model" ? RenderMode::kModel : RenderMode::kOracle;
  const auto noise = a.noise == 0.0 ? NoiseModel::zero(a.seed) : NoiseModel::scaled(a.noise, a.seed);
  Executor executor(Canvas::blank(geometry), noise, mode, model);
  const auto result = paint(pc, extractor, model, executor);

  const fs::path out = a.out;
  fs::create_directories(out);
  write_plan(out / "plan.txt", result.initial_plan);
  executor.export_log(out / "executed.txt");
  write_loss_csv(out / "loss.csv", result.initial_optimization.best_history);
  write_deviation_csv(out / "deviation.csv", result.deviations());
  for (std::size_t i = 0; i < result.trace.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "batch_%03zu.ppm", i + 1);
    write_canvas(out / name, result.trace[i].perceived_after);
  }
  write_canvas(out / "sim.ppm", result.trace.back().simulated);
  write_canvas(out / "final.ppm", result.final_canvas);
  std::printf("painted %zu strokes in %zu batches (%s)\n", result.initial_plan.size(), result.trace.size(),
              pc.replan ? "replanning" : "no replanning");
  report_loss("simulated", result.initial_simulation, pc.objectives);
  report_loss("final", result.final_canvas, pc.objectives);
  return 0;
}

// ---- calibrate ----

int cmd_calibrate(const CalibrateArgs& a) {
  if (!a.correspondences.empty()) {
    write_homography(a.out, fit_homography(read_correspondences(a.correspondences)));
  } else if (!a.checker.empty()) {
    std::vector<Rgb> measured, reference;
    read_color_pairs(a.checker, measured, reference);
    write_color_transform(a.out, fit_color_transform(measured, reference));
  } else {
    const auto image = read_canvas(a.image, a.canvas_width);
    std::array<Point2, 4> corners;
    for (std::size_t i = 0; i < 4; ++i) corners[i] = {a.corners[2 * i], a.corners[2 * i + 1]};
    write_canvas(a.out, rectify_canvas(image, corners));
  }
  std::printf("wrote %s\n", a.out.c_str());
  return 0;
}

void add_plan_options(CLI::App& cmd, PlanArgs& a, bool painting) {
  cmd.add_option("--target", a.target, "target image (P6) for print/semantic objectives");
  cmd.add_option("--style", a.style, "style image (P6)");
  cmd.add_option("--text", a.text, "text prompt for the text objective");
  cmd.add_option("--text-features", a.text_features, "FEAT1 file with a precomputed text embedding");
  cmd.add_option("--objective", a.objective, "comma list of print|semantic|style|text")
      ->delimiter(',')
      ->capture_default_str();
  cmd.add_option("--weights", a.weights, "comma list of weights, one per objective (default 1 each)")
      ->delimiter(',');
  cmd.add_option("--strokes", a.strokes, "number of strokes")->capture_default_str();
  cmd.add_option("--iters", a.iters, "optimization iterations")->capture_default_str();
  cmd.add_option("--seed", a.seed, "random seed")->capture_default_str();
  cmd.add_option("--palette-k", a.palette_k, "palette size, 0 keeps continuous colors")->capture_default_str();
  cmd.add_option("--canvas-width", a.canvas_width, "physical canvas width in meters")->capture_default_str();
  cmd.add_option("--optimizer", a.optimizer, "adam|sgd")
      ->check(CLI::IsMember({"adam", "sgd"}))
      ->capture_default_str();
  cmd.add_option("--model", a.model, "param2stroke model file (trained on the fly when absent)");
  cmd.add_option("--out", a.out, "output directory")->capture_default_str();
  if (painting) {
    cmd.add_option("--batch", a.batch, "strokes per executed batch")->capture_default_str();
    cmd.add_option("--replan-iters", a.replan_iters, "iterations per replanning pass")->capture_default_str();
    cmd.add_option("--noise", a.noise, "execution noise scale, 1 = default magnitudes, 0 = exact")
        ->capture_default_str();
    cmd.add_option("--exec-render", a.exec_render, "oracle|model")
        ->check(CLI::IsMember({"oracle", "model"}))
        ->capture_default_str();
    cmd.add_flag("--no-replan", a.no_replan, "execute the initial plan without replanning");
  }
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Stroke-based painting planner with a learned brush model", "brushplan"};
  app.set_config("--config", "", "TOML/INI file; entries for a command go in its [section]");
  app.footer(
      "Precedence: command-line flag > --config file entry > built-in default.\n"
      "Run `brushplan <command> --help` for the options of each command.");
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "fit the param2stroke model; writes the model and learning_curve.csv");
  train->add_option("--dataset", train_args.dataset, "dataset directory with index.tsv");
  train->add_option("--generate", train_args.generate, "generate N oracle strokes (default 200)");
  train->add_option("--seed", train_args.seed, "random seed")->capture_default_str();
  train->add_option("--epochs", train_args.epochs, "training epochs")->capture_default_str();
  train->add_option("--lr", train_args.lr, "Adam learning rate")->capture_default_str();
  train->add_option("--sweep", train_args.sweep, "comma list of dataset sizes for a learning curve")
      ->delimiter(',');
  train->add_option("--folds", train_args.folds, "folds per sweep size")->capture_default_str();
  train->add_option("--save-dataset", train_args.save_dataset, "also write the training strokes here");
  train->add_option("--out", train_args.out, "model file")->capture_default_str();

  PlanArgs plan_args;
  auto* plan = app.add_subcommand("plan", "optimize a stroke plan; writes plan.txt, sim.ppm, loss.csv");
  add_plan_options(*plan, plan_args, false);

  PlanArgs paint_args;
  auto* paint_cmd = app.add_subcommand(
      "paint", "plan, execute in batches and replan; writes final.ppm, sim.ppm, deviation.csv, batch_###.ppm");
  add_plan_options(*paint_cmd, paint_args, true);

  CalibrateArgs cal_args;
  auto* calibrate = app.add_subcommand("calibrate", "fit a homography or color transform, or rectify a photo");
  auto* inputs = calibrate->add_option_group("input");
  inputs->add_option("--correspondences", cal_args.correspondences, "`sx sy dx dy` lines -> 9 entries");
  inputs->add_option("--checker", cal_args.checker, "`mr mg mb rr rg rb` lines -> 12 entries");
  inputs->add_option("--image", cal_args.image, "photo to rectify with --corners -> P6 image");
  inputs->require_option(1);
  calibrate->add_option("--corners", cal_args.corners, "x0,y0,...,x3,y3 (TL, TR, BR, BL)")
      ->delimiter(',')
      ->expected(8);
  calibrate->add_option("--canvas-width", cal_args.canvas_width, "physical canvas width in meters")
      ->capture_default_str();
  calibrate->add_option("--out", cal_args.out, "output file")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*train) return cmd_train(train_args);
    if (*plan) return cmd_plan(plan_args);
    if (*paint_cmd) return cmd_paint(paint_args);
    if (*calibrate) {
      if (!cal_args.image.empty() && cal_args.corners.size() != 8) {
        throw std::invalid_argument("--image needs --corners with 8 values");
      }
      return cmd_calibrate(cal_args);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "brushplan: error: %s\n", e.what());
    return 1;
  }
  return 1;
}

}  // namespace brushplan::cli
