#include "brushplan/renderer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "brushplan/ad/ops.hpp"

namespace brushplan {

ad::Var stroke_affine(ad::Var pose, const StampGeometry& stamp, const CanvasGeometry& canvas) {
  if (pose.shape() != ad::Shape{3}) {
    throw std::invalid_argument("stroke_affine: pose must be [3], got " + ad::shape_string(pose.shape()));
  }
  const double s = stamp.meters_per_pixel;
  const double mx = canvas.meters_per_px_x(), my = canvas.meters_per_px_y();
  const double Wm = canvas.width_m, Hm = canvas.height_m;
  const double c0 = stamp.origin_col, r0 = stamp.origin_row;
  const auto& p = pose.value();
  const double x = p[0], y = p[1], th = p[2];
  const double c = std::cos(th), sn = std::sin(th);
  // Offsets of canvas pixel (0,0)'s centre from the stroke start, meters.
  const double ox = 0.5 * mx - x * Wm, oy = 0.5 * my - y * Hm;
  std::vector<double> a{c * mx / s,  sn * my / s, c0 + (c * ox + sn * oy) / s,
                        -sn * mx / s, c * my / s, r0 + (-sn * ox + c * oy) / s};
  return pose.graph().record(
      ad::Tensor({2, 3}, std::move(a)), {pose},
      [=](ad::BackwardContext& ctx) {
        const auto g = ctx.grad_out();
        auto gp = ctx.input_grad(0);
        // d/dx, d/dy touch only the offsets; d/dtheta rotates everything.
        gp[0] += (g[2] * (-c * Wm) + g[5] * (sn * Wm)) / s;
        gp[1] += (g[2] * (-sn * Hm) + g[5] * (-c * Hm)) / s;
        gp[2] += (g[0] * (-sn * mx) + g[1] * (c * my) + g[2] * (-sn * ox + c * oy) +
                  g[3] * (-c * mx) + g[4] * (-sn * my) + g[5] * (-c * ox - sn * oy)) / s;
      },
      "stroke_affine");
}

ad::Var place_stroke(ad::Var stamp, ad::Var pose, const StampGeometry& stamp_geometry,
                     const CanvasGeometry& canvas) {
  if (stamp.shape() != ad::Shape{stamp_geometry.rows, stamp_geometry.cols}) {
    throw std::invalid_argument("place_stroke: stamp shape " + ad::shape_string(stamp.shape()) +
                                " does not match its geometry");
  }
  return ad::affine_sample(stamp, stroke_affine(pose, stamp_geometry, canvas), canvas.height_px,
                           canvas.width_px);
}

ad::Var composite(ad::Var canvas, ad::Var alpha, ad::Var color) {
  const auto& cv = canvas.value();
  const auto& av = alpha.value();
  const auto& kv = color.value();
  if (cv.rank() != 3 || cv.dim(0) != 3 || av.shape() != ad::Shape{cv.dim(1), cv.dim(2)}) {
    throw std::invalid_argument("composite: incompatible shapes " + ad::shape_string(cv.shape()) +
                                " and " + ad::shape_string(av.shape()));
  }
  if (kv.shape() != ad::Shape{3}) {
    throw std::invalid_argument("composite: incompatible shapes " + ad::shape_string(cv.shape()) +
                                " and " + ad::shape_string(kv.shape()));
  }
  const std::size_t plane = av.size();
  std::vector<double> out(3 * plane);
  for (std::size_t ch = 0; ch < 3; ++ch) {
    const double k = kv[ch];
    for (std::size_t p = 0; p < plane; ++p) {
      const double a = av[p];
      out[ch * plane + p] = a * k + (1.0 - a) * cv[ch * plane + p];
    }
  }
  return canvas.graph().record(
      ad::Tensor(cv.shape(), std::move(out)), {canvas, alpha, color},
      [plane](ad::BackwardContext& ctx) {
        const auto g = ctx.grad_out();
        const auto c = ctx.input(0).data();
        const auto a = ctx.input(1).data();
        const auto k = ctx.input(2).data();
        auto gc = ctx.input_grad(0);
        auto ga = ctx.input_grad(1);
        auto gk = ctx.input_grad(2);
        for (std::size_t ch = 0; ch < 3; ++ch) {
          double acc = 0.0;
          for (std::size_t p = 0; p < plane; ++p) {
            const double gv = g[ch * plane + p];
            if (gv == 0.0) continue;
            if (!gc.empty()) gc[ch * plane + p] += gv * (1.0 - a[p]);
            if (!ga.empty()) ga[p] += gv * (k[ch] - c[ch * plane + p]);
            acc += gv * a[p];
          }
          if (!gk.empty()) gk[ch] += acc;
        }
      },
      "composite");
}

ad::Var render_strokes(const ModelBinding& model, std::span<const StrokeVars> strokes, ad::Var base,
                       const CanvasGeometry& canvas) {
  ad::Var out = base;
  for (const auto& s : strokes) {
    const ad::Var stamp = param2stroke_forward(model, s.shape);
    out = composite(out, place_stroke(stamp, s.pose, model.model().geometry, canvas), s.color);
  }
  return out;
}

StrokeVars constant_stroke(ad::Graph& graph, const StrokeParams& s) {
  return {graph.constant(ad::Tensor::vector({s.shape.h, s.shape.l, s.shape.b})),
          graph.constant(ad::Tensor::vector({s.x, s.y, s.theta})),
          graph.constant(ad::Tensor::vector({s.color[0], s.color[1], s.color[2]}))};
}

namespace {

void check_base(const Plan& plan, const Canvas& base) {
  if (!(plan.geometry == base.geometry)) {
    throw std::invalid_argument("render: plan and base canvas geometries differ");
  }
}

}  // namespace

Canvas render_plan(const Plan& plan, const Canvas& base, const StrokeShapeModel& model) {
  check_base(plan, base);
  ad::Graph g;
  const ModelBinding binding(g, model, false);
  std::vector<StrokeVars> vars;
  for (const auto& s : plan.strokes) vars.push_back(constant_stroke(g, s));
  const auto out = render_strokes(binding, vars, g.constant(base.rgb), plan.geometry);
  return {plan.geometry, out.value()};
}

Canvas render_with_stamps(const Plan& plan, std::span<const StrokeStamp> stamps, const Canvas& base) {
  check_base(plan, base);
  if (stamps.size() != plan.size()) {
    throw std::invalid_argument("render_with_stamps: " + std::to_string(stamps.size()) +
                                " stamps for " + std::to_string(plan.size()) + " strokes");
  }
  ad::Graph g;
  ad::Var out = g.constant(base.rgb);
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const auto v = constant_stroke(g, plan.strokes[i]);
    const auto alpha = place_stroke(g.constant(stamps[i].magnitude), v.pose, stamps[i].geometry,
                                    plan.geometry);
    out = composite(out, alpha, v.color);
  }
  return {plan.geometry, out.value()};
}

}  // namespace brushplan
