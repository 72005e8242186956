#pragma once

#include <span>

#include "brushplan/ad/graph.hpp"
#include "brushplan/canvas.hpp"
#include "brushplan/oracle.hpp"
#include "brushplan/plan.hpp"
#include "brushplan/stroke_model.hpp"

namespace brushplan {

/// Inverse map from canvas pixels to stamp pixels for a stroke starting at
/// canvas fractions (x, y) with heading theta. pose is [3] = (x, y, theta);
/// the result is the [2,3] matrix consumed by affine_sample. Rotation pivots
/// on the stroke's start point; scales convert through physical meters.
ad::Var stroke_affine(ad::Var pose, const StampGeometry& stamp, const CanvasGeometry& canvas);

/// Full-canvas alpha map [H,W] of a stamp [rows,cols] placed at `pose`.
ad::Var place_stroke(ad::Var stamp, ad::Var pose, const StampGeometry& stamp_geometry,
                     const CanvasGeometry& canvas);

/// alpha * color + (1 - alpha) * canvas, per channel. canvas [3,H,W],
/// alpha [H,W], color [3].
ad::Var composite(ad::Var canvas, ad::Var alpha, ad::Var color);

/// Graph handles of one stroke's parameters.
struct StrokeVars {
  ad::Var shape;  // [3] h, l, b
  ad::Var pose;   // [3] x, y, theta
  ad::Var color;  // [3] r, g, b
};

/// Folds place + composite over the strokes in order, starting from `base`.
ad::Var render_strokes(const ModelBinding& model, std::span<const StrokeVars> strokes, ad::Var base,
                       const CanvasGeometry& canvas);

/// Records a stroke as constants.
StrokeVars constant_stroke(ad::Graph& graph, const StrokeParams& stroke);

/// Renders `plan` on top of `base` with the learned stamps.
Canvas render_plan(const Plan& plan, const Canvas& base, const StrokeShapeModel& model);

/// Same compositing with caller-provided stamps (one per stroke), used for
/// oracle rendering.
Canvas render_with_stamps(const Plan& plan, std::span<const StrokeStamp> stamps, const Canvas& base);

}  // namespace brushplan
