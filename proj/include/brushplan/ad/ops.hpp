#pragma once

#include <span>
#include <vector>

#include "brushplan/ad/graph.hpp"

// Differentiable operations over Graph nodes. Shapes follow the usual
// conventions: images are channel-first [C,H,W], matrices are [rows,cols].
// Broadcasting is limited to a single-element operand against a tensor.
// Shape errors throw std::invalid_argument naming the op and both shapes.

namespace brushplan::ad {

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var shift(Var a, double offset);

/// min(max(x, lo), hi); gradient passes only where lo < x < hi.
Var clamp(Var a, double lo, double hi);
Var clamp01(Var a);
Var relu(Var a);
Var abs(Var a);

Var reshape(Var a, Shape shape);
/// Concatenation along the leading axis; trailing extents must agree.
Var concat(std::span<const Var> parts);
/// out[k] = x.flat[indices[k]], viewed as `out_shape`.
Var gather(Var x, std::vector<std::size_t> indices, Shape out_shape);

/// [n,k] x [k,m] -> [n,m]
Var matmul(Var a, Var b);
/// x[n,k] * w[k,m] + bias[m]
Var linear(Var x, Var w, Var bias);
/// x[C,H,W], w[O,C,kh,kw] (odd kernel), bias[O]; stride 1, zero "same" padding.
Var conv2d(Var x, Var w, Var bias);
/// x[C,H,W] -> [C,H*f,W*f], half-pixel-centre convention.
Var bilinear_upsample(Var x, std::size_t factor);
/// 2x2 mean pooling, x[C,H,W] -> [C,H/2,W/2].
Var avg_pool2(Var x);

/// Resamples x ([H,W] or [C,H,W]) onto an out_h x out_w grid. theta is the
/// 2x3 inverse map: output pixel (row i, col j) reads input at
/// (col, row) = theta * (j, i, 1), bilinearly, with zeros outside.
Var affine_sample(Var x, Var theta, std::size_t out_h, std::size_t out_w);

/// Mean of squared differences.
Var mse(Var a, Var b);
/// 1 - cos(a, b) over the flattened operands.
Var cosine_distance(Var a, Var b);
Var reduce_mean(Var a);
Var reduce_sum(Var a);
Var l2_normalize(Var a);
/// x[n,d] with each column's mean over the n rows removed.
Var center_columns(Var x);

/// Relaxed earth mover's distance between row sets a[n,d] and b[m,d]:
/// max(mean_i min_j C_ij, mean_j min_i C_ij), C = pairwise cosine distance.
Var remd(Var a, Var b);

/// Stabilizer inside vector norms used by cosine-based ops.
inline constexpr double kNormEpsilon = 1e-9;

}  // namespace brushplan::ad
