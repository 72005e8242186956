#include "brushplan/ad/ops.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace brushplan::ad {
namespace {

[[noreturn]] void shape_error(std::string_view op, const Shape& a, const Shape& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " + shape_string(a) +
                              " and " + shape_string(b));
}

[[noreturn]] void rank_error(std::string_view op, std::string_view expected, const Shape& a) {
  throw std::invalid_argument(std::string(op) + ": expected " + std::string(expected) +
                              ", got shape " + shape_string(a));
}

void same_graph(Var a, Var b, std::string_view op) {
  if (&a.graph() != &b.graph()) {
    throw std::invalid_argument(std::string(op) + ": operands live on different graphs");
  }
}

// Elementwise binary op with scalar broadcast. The output takes the shape of
// the larger operand.
enum class Broadcast { kNone, kLeftScalar, kRightScalar };

Broadcast broadcast_mode(std::string_view op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return Broadcast::kNone;
  if (b.size() == 1) return Broadcast::kRightScalar;
  if (a.size() == 1) return Broadcast::kLeftScalar;
  shape_error(op, a.shape(), b.shape());
}

double norm_of(std::span<const double> v) {
  double s = kNormEpsilon * kNormEpsilon;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

Var add(Var a, Var b) {
  same_graph(a, b, "add");
  const auto& av = a.value();
  const auto& bv = b.value();
  const auto mode = broadcast_mode("add", av, bv);
  const auto& big = mode == Broadcast::kLeftScalar ? bv : av;
  std::vector<double> out(big.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = av[mode == Broadcast::kLeftScalar ? 0 : i] +
             bv[mode == Broadcast::kRightScalar ? 0 : i];
  }
  return a.graph().record(
      Tensor(big.shape(), std::move(out)), {a, b},
      [mode](BackwardContext& ctx) {
        const auto g = ctx.grad_out();
        for (std::size_t k = 0; k < 2; ++k) {
          auto gi = ctx.input_grad(k);
          if (gi.empty()) continue;
          const bool reduce = (k == 0 && mode == Broadcast::kLeftScalar) ||
                              (k == 1 && mode == Broadcast::kRightScalar);
          for (std::size_t i = 0; i < g.size(); ++i) gi[reduce ? 0 : i] += g[i];
        }
      },
      "add");
}

Var sub(Var a, Var b) { return add(a, scale(b, -1.0)); }

Var mul(Var a, Var b) {
  same_graph(a, b, "mul");
  const auto& av = a.value();
  const auto& bv = b.value();
  const auto mode = broadcast_mode("mul", av, bv);
  const auto& big = mode == Broadcast::kLeftScalar ? bv : av;
  std::vector<double> out(big.size());
  const auto ia = [mode](std::size_t i) { return mode == Broadcast::kLeftScalar ? 0 : i; };
  const auto ib = [mode](std::size_t i) { return mode == Broadcast::kRightScalar ? 0 : i; };
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[ia(i)] * bv[ib(i)];
  return a.graph().record(
      Tensor(big.shape(), std::move(out)), {a, b},
      [ia, ib](BackwardContext& ctx) {
        const auto g = ctx.grad_out();
        const auto& av = ctx.input(0);
        const auto& bv = ctx.input(1);
        if (auto ga = ctx.input_grad(0); !ga.empty()) {
          for (std::size_t i = 0; i < g.size(); ++i) ga[ia(i)] += g[i] * bv[ib(i)];
        }
        if (auto gb = ctx.input_grad(1); !gb.empty()) {
          for (std::size_t i = 0; i < g.size(); ++i) gb[ib(i)] += g[i] * av[ia(i)];
        }
      },
      "mul");
}

Var scale(Var a, double factor) {
  const auto& av = a.value();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * factor;
  return a.graph().record(
      Tensor(av.shape(), std::move(out)), {a},
      [factor](BackwardContext& ctx) {
        const auto g = ctx.grad_out();
        auto ga = ctx.input_grad(0);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
      },
      "scale");
}

Var shift(Var a, double offset) {
  const auto& av = a.value();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + offset;
  return a.graph().record(
      Tensor(av.shape(), std::move(out)), {a},
      [](BackwardContext& ctx) {
        const auto g = ctx.grad_out();
        auto ga = ctx.input_grad(0);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      },
      "shift");
}

Var clamp(Var a, double lo, double hi) {
  const auto& av = a.value();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(std::max(av[i], lo), hi);
  return a.graph().record(
      Tensor(av.shape(), std::move(out)), {a},
      [lo, hi](BackwardContext& ctx) {
        const auto g = ctx.grad_out();
        const auto& x = ctx.input(0);
        auto ga = ctx.input_grad(0);
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (x[i] > lo && x[i] < hi) ga[i] += g[i];
        }
      },
      "clamp");
}

Var clamp01(Var a) { return clamp(a, 0.0, 1.0); }

Var relu(Var a) {
  const auto& av = a.value();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] > 0.0 ? av[i] : 0.0;
  return a.graph().record(
      Tensor(av.shape(), std::move(out)), {a},
      [](BackwardContext& ctx) {
        const auto g = ctx.grad_out();
        const auto& x = ctx.input(0);
        auto ga = ctx.input_grad(0);
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (x[i] > 0.0) ga[i] += g[i];
        }
      },
      "relu");
}

Var abs(Var a) {
  const auto& av = a.value();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::abs(av[i]);
  return a.graph().record(
      Tensor(av.shape(), std::move(out)), {a},
      [](BackwardContext& ctx) {
        const auto g = ctx.grad_out();
        const auto& x = ctx.input(0);
        auto ga = ctx.input_grad(0);
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (x[i] > 0.0) ga[i] += g[i];
          else if (x[i] < 0.0) ga[i] -= g[i];
        }
      },
      "abs");
}

Var reshape(Var a, Shape shape) {
  return a.graph().record(
      a.value().reshaped(std::move(shape)), {a},
      [](BackwardContext& ctx) {
        const auto g = ctx.grad_out();
        auto ga = ctx.input_grad(0);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      },
      "reshape");
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no operands");
  const Shape& first = parts[0].shape();
  if (first.empty()) rank_error("concat", "rank >= 1", first);
  Shape out_shape = first;
  out_shape[0] = 0;
  std::vector<double> out;
  std::vector<std::size_t> offsets;
  for (const Var& p : parts) {
    same_graph(parts[0], p, "concat");
    const Shape& s = p.shape();
    if (s.size() != first.size() || !std::equal(s.begin() + 1, s.end(), first.begin() + 1)) {
      shape_error("concat", first, s);
    }
    out_shape[0] += s[0];
    offsets.push_back(out.size());
    const auto d = p.value().data();
    out.insert(out.end(), d.begin(), d.end());
  }
  return parts[0].graph().record(
      Tensor(std::move(out_shape), std::move(out)), std::vector<Var>(parts.begin(), parts.end()),
      [offsets](BackwardContext& ctx) {
        const auto g = ctx.grad_out();
        for (std::size_t k = 0; k < offsets.size(); ++k) {
          auto gk = ctx.input_grad(k);
          for (std::size_t i = 0; i < gk.size(); ++i) gk[i] += g[offsets[k] + i];
        }
      },
      "concat");
}

Var gather(Var x, std::vector<std::size_t> indices, Shape out_shape) {
  if (shape_size(out_shape) != indices.size()) {
    throw std::invalid_argument("gather: " + std::to_string(indices.size()) +
                                " indices cannot fill shape " + shape_string(out_shape));
  }
  const auto& xv = x.value();
  std::vector<double> out(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= xv.size()) {
      throw std::out_of_range("gather: index " + std::to_string(indices[k]) +
                              " outside tensor of shape " + shape_string(xv.shape()));
    }
    out[k] = xv[indices[k]];
  }
  return x.graph().record(
      Tensor(std::move(out_shape), std::move(out)), {x},
      [indices = std::move(indices)](BackwardContext& ctx) {
        const auto g = ctx.grad_out();
        auto gx = ctx.input_grad(0);
        for (std::size_t k = 0; k < indices.size(); ++k) gx[indices[k]] += g[k];
      },
      "gather");
}

Var matmul(Var a, Var b) {
  same_graph(a, b, "matmul");
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) {
    shape_error("matmul", av.shape(), bv.shape());
  }
  const std::size_t n = av.dim(0), k = av.dim(1), m = bv.dim(1);
  std::vector<double> out(n * m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      for (std::size_t j = 0; j < m; ++j) out[i * m + j] += aip * bv[p * m + j];
    }
  }
  return a.graph().record(
      Tensor({n, m}, std::move(out)), {a, b},
      [n, k, m](BackwardContext& ctx) {
        const auto g = ctx.grad_out();
        const auto& av = ctx.input(0);
        const auto& bv = ctx.input(1);
        if (auto ga = ctx.input_grad(0); !ga.empty()) {
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              double s = 0.0;
              for (std::size_t j = 0; j < m; ++j) s += g[i * m + j] * bv[p * m + j];
              ga[i * k + p] += s;
            }
        }
        if (auto gb = ctx.input_grad(1); !gb.empty()) {
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              const double aip = av[i * k + p];
              if (aip == 0.0) continue;
              for (std::size_t j = 0; j < m; ++j) gb[p * m + j] += aip * g[i * m + j];
            }
        }
      },
      "matmul");
}

Var linear(Var x, Var w, Var bias) {
  same_graph(x, bias, "linear");
  const auto& bv = bias.value();
  if (w.value().rank() != 2 || bv.rank() != 1 || bv.dim(0) != w.value().dim(1)) {
    shape_error("linear", w.shape(), bv.shape());
  }
  const Var prod = matmul(x, w);
  const std::size_t n = prod.shape()[0], m = prod.shape()[1];
  const auto pv = prod.value().data();
  std::vector<double> out(pv.begin(), pv.end());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] += bv[j];
  return x.graph().record(
      Tensor({n, m}, std::move(out)), {prod, bias},
      [n, m](BackwardContext& ctx) {
        const auto g = ctx.grad_out();
        if (auto gp = ctx.input_grad(0); !gp.empty()) {
          for (std::size_t i = 0; i < g.size(); ++i) gp[i] += g[i];
        }
        if (auto gb = ctx.input_grad(1); !gb.empty()) {
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) gb[j] += g[i * m + j];
        }
      },
      "linear");
}

Var conv2d(Var x, Var w, Var bias) {
  same_graph(x, w, "conv2d");
  same_graph(x, bias, "conv2d");
  const auto& xv = x.value();
  const auto& wv = w.value();
  const auto& bv = bias.value();
  if (xv.rank() != 3) rank_error("conv2d", "input [C,H,W]", xv.shape());
  if (wv.rank() != 4 || wv.dim(1) != xv.dim(0) || wv.dim(2) % 2 == 0 || wv.dim(3) % 2 == 0) {
    shape_error("conv2d", xv.shape(), wv.shape());
  }
  if (bv.rank() != 1 || bv.dim(0) != wv.dim(0)) shape_error("conv2d", wv.shape(), bv.shape());

  const std::size_t C = xv.dim(0), H = xv.dim(1), W = xv.dim(2);
  const std::size_t O = wv.dim(0), KH = wv.dim(2), KW = wv.dim(3);
  const long ph = static_cast<long>(KH / 2), pw = static_cast<long>(KW / 2);

  // Visits every (o, c, y, x, ky, kx) tap that lands inside the input.
  const auto for_each_tap = [=](auto&& body) {
    for (std::size_t o = 0; o < O; ++o)
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t ky = 0; ky < KH; ++ky)
          for (std::size_t kx = 0; kx < KW; ++kx) {
            const std::size_t widx = ((o * C + c) * KH + ky) * KW + kx;
            const long dy = static_cast<long>(ky) - ph, dx = static_cast<long>(kx) - pw;
            const long y0 = std::max(0L, -dy), y1 = std::min<long>(H, static_cast<long>(H) - dy);
            const long x0 = std::max(0L, -dx), x1 = std::min<long>(W, static_cast<long>(W) - dx);
            for (long yy = y0; yy < y1; ++yy) {
              const std::size_t orow = (o * H + yy) * W;
              const std::size_t irow = (c * H + (yy + dy)) * W;
              body(widx, orow, irow, x0, x1, dx);
            }
          }
  };

  std::vector<double> out(O * H * W);
  for (std::size_t o = 0; o < O; ++o)
    std::fill(out.begin() + o * H * W, out.begin() + (o + 1) * H * W, bv[o]);
  const auto xd = xv.data();
  const auto wd = wv.data();
  for_each_tap([&](std::size_t widx, std::size_t orow, std::size_t irow, long x0, long x1,
                   long dx) {
    const double wt = wd[widx];
    for (long xx = x0; xx < x1; ++xx) out[orow + xx] += wt * xd[irow + xx + dx];
  });

  return x.graph().record(
      Tensor({O, H, W}, std::move(out)), {x, w, bias},
      [for_each_tap, O, H, W](BackwardContext& ctx) {
        const auto g = ctx.grad_out();
        const auto xd = ctx.input(0).data();
        const auto wd = ctx.input(1).data();
        auto gx = ctx.input_grad(0);
        auto gw = ctx.input_grad(1);
        auto gb = ctx.input_grad(2);
        if (!gx.empty() || !gw.empty()) {
          for_each_tap([&](std::size_t widx, std::size_t orow, std::size_t irow, long x0,
                           long x1, long dx) {
            if (!gx.empty()) {
              const double wt = wd[widx];
              for (long xx = x0; xx < x1; ++xx) gx[irow + xx + dx] += wt * g[orow + xx];
            }
            if (!gw.empty()) {
              double s = 0.0;
              for (long xx = x0; xx < x1; ++xx) s += g[orow + xx] * xd[irow + xx + dx];
              gw[widx] += s;
            }
          });
        }
        if (!gb.empty()) {
          for (std::size_t o = 0; o < O; ++o)
            for (std::size_t i = 0; i < H * W; ++i) gb[o] += g[o * H * W + i];
        }
      },
      "conv2d");
}

namespace {

struct AxisTaps {
  std::vector<std::size_t> lo, hi;
  std::vector<double> frac;
};

// Half-pixel-centre source taps for upsampling an axis of extent n by f.
AxisTaps upsample_taps(std::size_t n, std::size_t f) {
  AxisTaps t;
  const std::size_t m = n * f;
  t.lo.resize(m);
  t.hi.resize(m);
  t.frac.resize(m);
  for (std::size_t d = 0; d < m; ++d) {
    const double src = std::max((static_cast<double>(d) + 0.5) / static_cast<double>(f) - 0.5, 0.0);
    const auto i0 = std::min(static_cast<std::size_t>(src), n - 1);
    t.lo[d] = i0;
    t.hi[d] = std::min(i0 + 1, n - 1);
    t.frac[d] = src - static_cast<double>(i0);
  }
  return t;
}

}  // namespace

Var bilinear_upsample(Var x, std::size_t factor) {
  const auto& xv = x.value();
  if (xv.rank() != 3) rank_error("bilinear_upsample", "input [C,H,W]", xv.shape());
  if (factor == 0) throw std::invalid_argument("bilinear_upsample: factor must be >= 1");
  const std::size_t C = xv.dim(0), H = xv.dim(1), W = xv.dim(2);
  const std::size_t OH = H * factor, OW = W * factor;
  auto ty = upsample_taps(H, factor);
  auto tx = upsample_taps(W, factor);
  std::vector<double> out(C * OH * OW);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < OH; ++i) {
      const double wy = ty.frac[i];
      const std::size_t r0 = (c * H + ty.lo[i]) * W, r1 = (c * H + ty.hi[i]) * W;
      for (std::size_t j = 0; j < OW; ++j) {
        const double wx = tx.frac[j];
        const double top = (1 - wx) * xv[r0 + tx.lo[j]] + wx * xv[r0 + tx.hi[j]];
        const double bot = (1 - wx) * xv[r1 + tx.lo[j]] + wx * xv[r1 + tx.hi[j]];
        out[(c * OH + i) * OW + j] = (1 - wy) * top + wy * bot;
      }
    }
  return x.graph().record(
      Tensor({C, OH, OW}, std::move(out)), {x},
      [ty = std::move(ty), tx = std::move(tx), C, H, W, OH, OW](BackwardContext& ctx) {
        const auto g = ctx.grad_out();
        auto gx = ctx.input_grad(0);
        for (std::size_t c = 0; c < C; ++c)
          for (std::size_t i = 0; i < OH; ++i) {
            const double wy = ty.frac[i];
            const std::size_t r0 = (c * H + ty.lo[i]) * W, r1 = (c * H + ty.hi[i]) * W;
            for (std::size_t j = 0; j < OW; ++j) {
              const double wx = tx.frac[j];
              const double gv = g[(c * OH + i) * OW + j];
              gx[r0 + tx.lo[j]] += gv * (1 - wy) * (1 - wx);
              gx[r0 + tx.hi[j]] += gv * (1 - wy) * wx;
              gx[r1 + tx.lo[j]] += gv * wy * (1 - wx);
              gx[r1 + tx.hi[j]] += gv * wy * wx;
            }
          }
      },
      "bilinear_upsample");
}

Var avg_pool2(Var x) {
  const auto& xv = x.value();
  if (xv.rank() != 3) rank_error("avg_pool2", "input [C,H,W]", xv.shape());
  const std::size_t C = xv.dim(0), H = xv.dim(1), W = xv.dim(2);
  const std::size_t OH = H / 2, OW = W / 2;
  if (OH == 0 || OW == 0) rank_error("avg_pool2", "spatial extent >= 2", xv.shape());
  std::vector<double> out(C * OH * OW);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < OH; ++i)
      for (std::size_t j = 0; j < OW; ++j) {
        const std::size_t base = (c * H + 2 * i) * W + 2 * j;
        out[(c * OH + i) * OW + j] =
            0.25 * (xv[base] + xv[base + 1] + xv[base + W] + xv[base + W + 1]);
      }
  return x.graph().record(
      Tensor({C, OH, OW}, std::move(out)), {x},
      [C, H, W, OH, OW](BackwardContext& ctx) {
        const auto g = ctx.grad_out();
        auto gx = ctx.input_grad(0);
        for (std::size_t c = 0; c < C; ++c)
          for (std::size_t i = 0; i < OH; ++i)
            for (std::size_t j = 0; j < OW; ++j) {
              const double gv = 0.25 * g[(c * OH + i) * OW + j];
              const std::size_t base = (c * H + 2 * i) * W + 2 * j;
              gx[base] += gv;
              gx[base + 1] += gv;
              gx[base + W] += gv;
              gx[base + W + 1] += gv;
            }
      },
      "avg_pool2");
}

Var affine_sample(Var x, Var theta, std::size_t out_h, std::size_t out_w) {
  same_graph(x, theta, "affine_sample");
  const auto& xv = x.value();
  const auto& tv = theta.value();
  if (xv.rank() != 2 && xv.rank() != 3) rank_error("affine_sample", "[H,W] or [C,H,W]", xv.shape());
  if (tv.shape() != Shape{2, 3}) shape_error("affine_sample", xv.shape(), tv.shape());

  const bool planar = xv.rank() == 2;
  const std::size_t C = planar ? 1 : xv.dim(0);
  const std::size_t H = xv.dim(planar ? 0 : 1), W = xv.dim(planar ? 1 : 2);
  const double Hd = static_cast<double>(H), Wd = static_cast<double>(W);
  const std::array<double, 6> t{tv[0], tv[1], tv[2], tv[3], tv[4], tv[5]};

  // Calls body(out_index, x0, y0, wx, wy) for every output pixel whose
  // bilinear footprint touches the input.
  const auto for_each_hit = [=](auto&& body) {
    for (std::size_t i = 0; i < out_h; ++i) {
      const double di = static_cast<double>(i);
      for (std::size_t j = 0; j < out_w; ++j) {
        const double dj = static_cast<double>(j);
        const double sx = t[0] * dj + t[1] * di + t[2];
        const double sy = t[3] * dj + t[4] * di + t[5];
        if (!(sx > -1.0 && sx < Wd && sy > -1.0 && sy < Hd)) continue;
        const double fx = std::floor(sx), fy = std::floor(sy);
        body(i * out_w + j, static_cast<long>(fx), static_cast<long>(fy), sx - fx, sy - fy, dj, di);
      }
    }
  };
  const auto at = [=](std::span<const double> d, std::size_t c, long yy, long xx) {
    if (xx < 0 || yy < 0 || xx >= static_cast<long>(W) || yy >= static_cast<long>(H)) return 0.0;
    return d[(c * H + yy) * W + xx];
  };

  const std::size_t plane = out_h * out_w;
  std::vector<double> out(C * plane, 0.0);
  const auto xd = xv.data();
  for_each_hit([&](std::size_t o, long x0, long y0, double wx, double wy, double, double) {
    for (std::size_t c = 0; c < C; ++c) {
      const double top = (1 - wx) * at(xd, c, y0, x0) + wx * at(xd, c, y0, x0 + 1);
      const double bot = (1 - wx) * at(xd, c, y0 + 1, x0) + wx * at(xd, c, y0 + 1, x0 + 1);
      out[c * plane + o] = (1 - wy) * top + wy * bot;
    }
  });

  Shape out_shape = planar ? Shape{out_h, out_w} : Shape{C, out_h, out_w};
  return x.graph().record(
      Tensor(std::move(out_shape), std::move(out)), {x, theta},
      [for_each_hit, at, C, H, W, plane](BackwardContext& ctx) {
        const auto g = ctx.grad_out();
        const auto xd = ctx.input(0).data();
        auto gx = ctx.input_grad(0);
        auto gt = ctx.input_grad(1);
        const auto deposit = [&](std::size_t c, long yy, long xx, double v) {
          if (xx < 0 || yy < 0 || xx >= static_cast<long>(W) || yy >= static_cast<long>(H)) return;
          gx[(c * H + yy) * W + xx] += v;
        };
        for_each_hit([&](std::size_t o, long x0, long y0, double wx, double wy, double dj,
                         double di) {
          double gsx = 0.0, gsy = 0.0;
          for (std::size_t c = 0; c < C; ++c) {
            const double gv = g[c * plane + o];
            if (gv == 0.0) continue;
            if (!gx.empty()) {
              deposit(c, y0, x0, gv * (1 - wy) * (1 - wx));
              deposit(c, y0, x0 + 1, gv * (1 - wy) * wx);
              deposit(c, y0 + 1, x0, gv * wy * (1 - wx));
              deposit(c, y0 + 1, x0 + 1, gv * wy * wx);
            }
            if (!gt.empty()) {
              const double v00 = at(xd, c, y0, x0), v01 = at(xd, c, y0, x0 + 1);
              const double v10 = at(xd, c, y0 + 1, x0), v11 = at(xd, c, y0 + 1, x0 + 1);
              gsx += gv * ((1 - wy) * (v01 - v00) + wy * (v11 - v10));
              gsy += gv * ((1 - wx) * (v10 - v00) + wx * (v11 - v01));
            }
          }
          if (!gt.empty()) {
            gt[0] += gsx * dj;
            gt[1] += gsx * di;
            gt[2] += gsx;
            gt[3] += gsy * dj;
            gt[4] += gsy * di;
            gt[5] += gsy;
          }
        });
      },
      "affine_sample");
}

Var mse(Var a, Var b) {
  same_graph(a, b, "mse");
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.shape() != bv.shape()) shape_error("mse", av.shape(), bv.shape());
  if (av.size() == 0) throw std::invalid_argument("mse: empty operands");
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = av[i] - bv[i];
    s += d * d;
  }
  const double n = static_cast<double>(av.size());
  return a.graph().record(
      Tensor::scalar(s / n), {a, b},
      [n](BackwardContext& ctx) {
        const double g = ctx.grad_out()[0] * 2.0 / n;
        const auto& av = ctx.input(0);
        const auto& bv = ctx.input(1);
        auto ga = ctx.input_grad(0);
        auto gb = ctx.input_grad(1);
        for (std::size_t i = 0; i < av.size(); ++i) {
          const double d = g * (av[i] - bv[i]);
          if (!ga.empty()) ga[i] += d;
          if (!gb.empty()) gb[i] -= d;
        }
      },
      "mse");
}

Var cosine_distance(Var a, Var b) {
  same_graph(a, b, "cosine_distance");
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.size() != bv.size() || av.size() == 0) {
    shape_error("cosine_distance", av.shape(), bv.shape());
  }
  double dot = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) dot += av[i] * bv[i];
  const double na = norm_of(av.data()), nb = norm_of(bv.data());
  return a.graph().record(
      Tensor::scalar(1.0 - dot / (na * nb)), {a, b},
      [dot, na, nb](BackwardContext& ctx) {
        const double g = ctx.grad_out()[0];
        const auto& av = ctx.input(0);
        const auto& bv = ctx.input(1);
        const double cosv = dot / (na * nb);
        if (auto ga = ctx.input_grad(0); !ga.empty()) {
          for (std::size_t i = 0; i < av.size(); ++i)
            ga[i] -= g * (bv[i] / (na * nb) - cosv * av[i] / (na * na));
        }
        if (auto gb = ctx.input_grad(1); !gb.empty()) {
          for (std::size_t i = 0; i < bv.size(); ++i)
            gb[i] -= g * (av[i] / (na * nb) - cosv * bv[i] / (nb * nb));
        }
      },
      "cosine_distance");
}

Var reduce_sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return a.graph().record(
      Tensor::scalar(s), {a},
      [](BackwardContext& ctx) {
        const double g = ctx.grad_out()[0];
        for (double& gi : ctx.input_grad(0)) gi += g;
      },
      "reduce_sum");
}

Var reduce_mean(Var a) {
  if (a.size() == 0) throw std::invalid_argument("reduce_mean: empty operand");
  return scale(reduce_sum(a), 1.0 / static_cast<double>(a.size()));
}

Var l2_normalize(Var a) {
  const auto& av = a.value();
  const double n = norm_of(av.data());
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] / n;
  return a.graph().record(
      Tensor(av.shape(), std::move(out)), {a},
      [n](BackwardContext& ctx) {
        const auto g = ctx.grad_out();
        const auto& y = ctx.output();
        double gy = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) gy += g[i] * y[i];
        auto ga = ctx.input_grad(0);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += (g[i] - y[i] * gy) / n;
      },
      "l2_normalize");
}

Var center_columns(Var x) {
  const auto& xv = x.value();
  if (xv.rank() != 2 || xv.dim(0) == 0) rank_error("center_columns", "non-empty [n,d]", xv.shape());
  const std::size_t n = xv.dim(0), d = xv.dim(1);
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += xv[i * d + j];
  for (double& m : mean) m /= static_cast<double>(n);
  std::vector<double> out(n * d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = xv[i * d + j] - mean[j];
  return x.graph().record(
      Tensor({n, d}, std::move(out)), {x},
      [n, d](BackwardContext& ctx) {
        const auto g = ctx.grad_out();
        std::vector<double> gm(d, 0.0);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < d; ++j) gm[j] += g[i * d + j];
        auto gx = ctx.input_grad(0);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < d; ++j)
            gx[i * d + j] += g[i * d + j] - gm[j] / static_cast<double>(n);
      },
      "center_columns");
}

Var remd(Var a, Var b) {
  same_graph(a, b, "remd");
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(1)) {
    shape_error("remd", av.shape(), bv.shape());
  }
  const std::size_t n = av.dim(0), m = bv.dim(0), d = av.dim(1);
  if (n == 0 || m == 0) throw std::invalid_argument("remd: feature sets must be non-empty");

  // Unit rows and their (stabilized) norms.
  const auto unit_rows = [d](const Tensor& t, std::size_t rows, std::vector<double>& norms) {
    std::vector<double> u(rows * d);
    norms.resize(rows);
    for (std::size_t i = 0; i < rows; ++i) {
      norms[i] = norm_of(t.data().subspan(i * d, d));
      for (std::size_t k = 0; k < d; ++k) u[i * d + k] = t[i * d + k] / norms[i];
    }
    return u;
  };
  std::vector<double> na, nb;
  auto ua = unit_rows(av, n, na);
  auto ub = unit_rows(bv, m, nb);

  std::vector<double> row_min(n, std::numeric_limits<double>::infinity());
  std::vector<double> col_min(m, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> row_arg(n, 0), col_arg(m, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < d; ++k) dot += ua[i * d + k] * ub[j * d + k];
      const double c = 1.0 - dot;
      if (c < row_min[i]) row_min[i] = c, row_arg[i] = j;
      if (c < col_min[j]) col_min[j] = c, col_arg[j] = i;
    }
  double rmean = 0.0, cmean = 0.0;
  for (double v : row_min) rmean += v;
  for (double v : col_min) cmean += v;
  rmean /= static_cast<double>(n);
  cmean /= static_cast<double>(m);
  const bool rows_win = rmean >= cmean;

  return a.graph().record(
      Tensor::scalar(rows_win ? rmean : cmean), {a, b},
      [=, ua = std::move(ua), ub = std::move(ub), na = std::move(na), nb = std::move(nb),
       row_arg = std::move(row_arg), col_arg = std::move(col_arg)](BackwardContext& ctx) {
        auto ga = ctx.input_grad(0);
        auto gb = ctx.input_grad(1);
        // d(1 - u_i . v_j)/d a_i = -(v_j - u_i (u_i . v_j)) / |a_i|
        const auto push = [d](std::span<double> gout, const std::vector<double>& u,
                              const std::vector<double>& v, const std::vector<double>& norms,
                              std::size_t i, std::size_t j, double w) {
          if (gout.empty()) return;
          double dot = 0.0;
          for (std::size_t k = 0; k < d; ++k) dot += u[i * d + k] * v[j * d + k];
          for (std::size_t k = 0; k < d; ++k)
            gout[i * d + k] -= w * (v[j * d + k] - u[i * d + k] * dot) / norms[i];
        };
        const double g = ctx.grad_out()[0];
        if (rows_win) {
          const double w = g / static_cast<double>(n);
          for (std::size_t i = 0; i < n; ++i) {
            push(ga, ua, ub, na, i, row_arg[i], w);
            push(gb, ub, ua, nb, row_arg[i], i, w);
          }
        } else {
          const double w = g / static_cast<double>(m);
          for (std::size_t j = 0; j < m; ++j) {
            push(gb, ub, ua, nb, j, col_arg[j], w);
            push(ga, ua, ub, na, col_arg[j], j, w);
          }
        }
      },
      "remd");
}

}  // namespace brushplan::ad
