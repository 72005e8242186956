#pragma once

#include <random>

#include "brushplan/ad/tensor.hpp"
#include "brushplan/canvas.hpp"
#include "brushplan/plan.hpp"
#include "brushplan/stroke_model.hpp"

namespace support {

brushplan::ad::Tensor random_tensor(brushplan::ad::Shape shape, std::mt19937_64& rng, double lo = -1.0,
                                    double hi = 1.0);

/// 64x64 gray ramp, white at the left edge to black at the right.
brushplan::Canvas ramp_target(const brushplan::CanvasGeometry& geometry);
/// Red and blue Gaussian blobs on white, 64x64.
brushplan::Canvas blob_target(const brushplan::CanvasGeometry& geometry);

/// 64x64 pixels on a 0.1 m wide canvas.
brushplan::CanvasGeometry small_canvas();

/// Model trained on 200 oracle strokes (seed 1); built once per process.
const brushplan::StrokeShapeModel& trained_model();

/// Random in-range stroke.
brushplan::StrokeParams random_stroke(std::mt19937_64& rng);

}  // namespace support
