#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "brushplan/calibration.hpp"
#include "brushplan/dataset.hpp"
#include "brushplan/execution.hpp"
#include "brushplan/objectives.hpp"
#include "brushplan/planner.hpp"
#include "brushplan/renderer.hpp"
#include "brushplan/stroke_model.hpp"

namespace py = pybind11;
using namespace pybind11::literals;
using namespace brushplan;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_numpy(const ad::Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

ad::Tensor from_numpy(const Array& a) {
  ad::Shape shape(a.shape(), a.shape() + a.ndim());
  return ad::Tensor(std::move(shape), std::vector<double>(a.data(), a.data() + a.size()));
}

// canvases cross the boundary as [3,H,W] arrays with a physical width
Canvas canvas_from(const Array& rgb, double width_m) {
  if (rgb.ndim() != 3 || rgb.shape(0) != 3) throw std::invalid_argument("canvas arrays must be [3, H, W]");
  const auto g = CanvasGeometry::with_width(std::size_t(rgb.shape(2)), std::size_t(rgb.shape(1)), width_m);
  return Canvas::from_tensor(g, from_numpy(rgb));
}

// weights by objective name, as on the command line
ObjectiveConfig objectives_from(const py::dict& weights, const std::optional<Canvas>& target,
                                const std::optional<Canvas>& style, const std::optional<std::string>& text) {
  ObjectiveConfig c;
  for (const auto& [key, value] : weights) {
    const auto name = key.cast<std::string>();
    const double w = value.cast<double>();
    if (name == "print") c.weights.print = w;
    else if (name == "semantic") c.weights.semantic = w;
    else if (name == "style") c.weights.style = w;
    else if (name == "text") c.weights.text = w;
    else throw std::invalid_argument("unknown objective '" + name + "' (print|semantic|style|text)");
  }
  c.target = target;
  c.style = style;
  c.text = text;
  return c;
}

const BuiltinExtractor& extractor() {
  static const BuiltinExtractor e;
  return e;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Stroke-based painting planner: learned brush model, differentiable renderer, replanning.";

  py::class_<StrokeShape>(m, "StrokeShape")
      .def(py::init([](double h, double l, double b) { return StrokeShape{h, l, b}; }), py::arg("h") = 0.5,
           py::arg("l") = 0.03, py::arg("b") = 0.0)
      .def_readwrite("h", &StrokeShape::h)
      .def_readwrite("l", &StrokeShape::l)
      .def_readwrite("b", &StrokeShape::b)
      .def(py::self == py::self)
      .def("__repr__", [](const StrokeShape& s) {
        std::ostringstream o;
        o << "StrokeShape(h=" << s.h << ", l=" << s.l << ", b=" << s.b << ")";
        return o.str();
      });

  py::class_<StrokeParams>(m, "Stroke")
      .def(py::init<>())
      .def_readwrite("shape", &StrokeParams::shape)
      .def_readwrite("x", &StrokeParams::x)
      .def_readwrite("y", &StrokeParams::y)
      .def_readwrite("theta", &StrokeParams::theta)
      .def_readwrite("color", &StrokeParams::color)
      .def(py::self == py::self);

  py::class_<CanvasGeometry>(m, "CanvasGeometry")
      .def(py::init(&CanvasGeometry::with_width), py::arg("width_px"), py::arg("height_px"), py::arg("width_m"))
      .def_readonly("width_px", &CanvasGeometry::width_px)
      .def_readonly("height_px", &CanvasGeometry::height_px)
      .def_readonly("width_m", &CanvasGeometry::width_m)
      .def_readonly("height_m", &CanvasGeometry::height_m);

  py::class_<Plan>(m, "Plan")
      .def(py::init<>())
      .def_readwrite("geometry", &Plan::geometry)
      .def_readwrite("strokes", &Plan::strokes)
      .def("__len__", &Plan::size)
      .def(py::self == py::self)
      .def("to_text",
           [](const Plan& p) {
             std::ostringstream o;
             write_plan(o, p);
             return o.str();
           })
      .def_static("from_text",
                  [](const std::string& s) {
                    std::istringstream in(s);
                    return read_plan(in);
                  })
      .def("save", [](const Plan& p, const std::filesystem::path& path) { write_plan(path, p); })
      .def_static("load", [](const std::filesystem::path& path) { return read_plan(path); });

  py::class_<StrokeDataset>(m, "StrokeDataset")
      .def("__len__", &StrokeDataset::size)
      .def_readonly("provenance", &StrokeDataset::provenance)
      .def("shapes",
           [](const StrokeDataset& d) {
             std::vector<StrokeShape> out;
             for (const auto& s : d.samples) out.push_back(s.shape);
             return out;
           })
      .def("stamp", [](const StrokeDataset& d, std::size_t i) { return to_numpy(d.samples.at(i).stamp); })
      .def("save", [](const StrokeDataset& d, const std::filesystem::path& dir) { save_dataset(d, dir); })
      .def_static("load", [](const std::filesystem::path& dir) { return load_dataset(dir); });
  m.def("generate_dataset", [](std::size_t n, std::uint64_t seed) { return generate_dataset(n, seed); },
        py::arg("n"), py::arg("seed") = 0, "Oracle-rendered shape/stamp pairs.");

  py::class_<StrokeShapeModel>(m, "StrokeModel")
      .def_static("untrained", [](std::uint64_t seed) { return StrokeShapeModel::initialized(seed); },
                  py::arg("seed") = 0)
      .def("stamp", [](const StrokeShapeModel& model, const StrokeShape& s) {
        return to_numpy(param2stroke_forward(model, s).magnitude);
      })
      .def("save", [](const StrokeShapeModel& model, const std::filesystem::path& path) { save_model(model, path); })
      .def_static("load", [](const std::filesystem::path& path) { return load_model(path); });

  m.def(
      "train",
      [](const StrokeDataset& d, std::size_t epochs, double lr, std::uint64_t seed) {
        TrainConfig c;
        c.epochs = epochs;
        c.learning_rate = lr;
        c.seed = seed;
        const auto r = [&] {
          py::gil_scoped_release release;
          return train_param2stroke(d, c);
        }();
        std::vector<std::pair<double, double>> history;
        for (const auto& e : r.history) history.emplace_back(e.train, e.validation);
        return py::make_tuple(r.model, r.best_epoch, history);
      },
      py::arg("dataset"), py::arg("epochs") = 200, py::arg("lr") = 3e-3, py::arg("seed") = 0,
      "Returns (model, best_epoch, [(train, validation) per epoch]).");
  m.def("evaluate", &evaluate_model, py::arg("model"), py::arg("test"), "Mean per-stamp absolute error.");

  m.def(
      "render",
      [](const Plan& plan, const StrokeShapeModel& model, std::optional<Array> base) {
        const Canvas b = base ? canvas_from(*base, plan.geometry.width_m) : Canvas::blank(plan.geometry);
        return to_numpy(render_plan(plan, b, model).rgb);
      },
      py::arg("plan"), py::arg("model"), py::arg("base") = py::none(), "Renders onto white or onto `base` [3,H,W].");

  m.def(
      "plan",
      [](const StrokeShapeModel& model, const Array& target, double width_m, py::dict objectives,
         std::optional<Array> style, std::optional<std::string> text, std::size_t strokes, std::size_t iters,
         std::size_t palette_k, std::uint64_t seed) {
        const auto t = canvas_from(target, width_m);
        std::optional<Canvas> s;
        if (style) s = canvas_from(*style, width_m);
        PlannerConfig c;
        c.n_strokes = strokes;
        c.init_iterations = iters;
        c.palette_k = palette_k;
        c.seed = seed;
        c.objectives = objectives_from(objectives, t, s, text);
        c.validate();
        const auto r = [&] {
          py::gil_scoped_release release;
          return plan_strokes(c, extractor(), model, Canvas::blank(t.geometry));
        }();
        return py::make_tuple(r.plan, r.best_history);
      },
      py::arg("model"), py::arg("target"), py::arg("width_m") = 0.1, py::arg("objectives") = py::dict("print"_a = 1.0),
      py::arg("style") = py::none(), py::arg("text") = py::none(), py::arg("strokes") = 100, py::arg("iters") = 300,
      py::arg("palette_k") = 12, py::arg("seed") = 0, "Optimizes a stroke plan; returns (plan, best loss per iteration).");

  m.def(
      "paint",
      [](const StrokeShapeModel& model, const Array& target, double width_m, std::size_t strokes, std::size_t batch,
         std::size_t iters, std::size_t replan_iters, double noise, bool replan, bool oracle, std::uint64_t seed) {
        const auto t = canvas_from(target, width_m);
        PlannerConfig c;
        c.n_strokes = strokes;
        c.batch_size = batch;
        c.init_iterations = iters;
        c.replan_iterations = replan_iters;
        c.replan = replan;
        c.seed = seed;
        c.objectives.weights.print = 1.0;
        c.objectives.target = t;
        c.validate();
        const NoiseModel n = noise == 0.0 ? NoiseModel::zero(seed) : NoiseModel::scaled(noise, seed);
        const auto r = [&] {
          py::gil_scoped_release release;
          Executor ex(Canvas::blank(t.geometry), n, oracle ? RenderMode::kOracle : RenderMode::kModel, model);
          return paint(c, extractor(), model, ex);
        }();
        py::dict out;
        out["final"] = to_numpy(r.final_canvas.rgb);
        out["simulated"] = to_numpy(r.trace.empty() ? r.initial_simulation.rgb : r.trace.back().simulated.rgb);
        out["initial_plan"] = r.initial_plan;
        out["deviations"] = r.deviations();
        out["loss"] = r.initial_optimization.best_history;
        return out;
      },
      py::arg("model"), py::arg("target"), py::arg("width_m") = 0.1, py::arg("strokes") = 100, py::arg("batch") = 30,
      py::arg("iters") = 300, py::arg("replan_iters") = 100, py::arg("noise") = 1.0, py::arg("replan") = true,
      py::arg("oracle") = true, py::arg("seed") = 0,
      "Plans, executes in batches with simulated noise and replans; print objective only.");

  m.def(
      "fit_homography",
      [](const std::vector<std::array<double, 4>>& rows) {
        std::vector<Correspondence> pairs;
        for (const auto& r : rows) pairs.push_back({{r[0], r[1]}, {r[2], r[3]}});
        const auto h = fit_homography(pairs);
        return to_numpy(ad::Tensor({3, 3}, std::vector<double>(h.m.begin(), h.m.end())));
      },
      py::arg("correspondences"), "Rows of (sx, sy, dx, dy); returns the 3x3 source-to-target map.");
  m.def(
      "fit_color_transform",
      [](const std::vector<Rgb>& measured, const std::vector<Rgb>& reference) {
        const auto t = fit_color_transform(measured, reference);
        return to_numpy(ad::Tensor({3, 4}, std::vector<double>(t.m.begin(), t.m.end())));
      },
      py::arg("measured"), py::arg("reference"), "Affine [A | offset] mapping measured colors to reference.");
}
