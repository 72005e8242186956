#include "support.hpp"

#include <cmath>

#include "brushplan/dataset.hpp"

using namespace brushplan;

namespace support {

ad::Tensor random_tensor(ad::Shape shape, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(ad::shape_size(shape));
  for (double& x : v) x = u(rng);
  return ad::Tensor(std::move(shape), std::move(v));
}

CanvasGeometry small_canvas() { return CanvasGeometry::with_width(64, 64, 0.1); }

Canvas ramp_target(const CanvasGeometry& g) {
  const std::size_t H = g.height_px, W = g.width_px;
  std::vector<double> v(3 * H * W);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < H; ++i)
      for (std::size_t j = 0; j < W; ++j) v[(c * H + i) * W + j] = 1.0 - double(j) / double(W - 1);
  return Canvas::from_tensor(g, ad::Tensor({3, H, W}, std::move(v)));
}

Canvas blob_target(const CanvasGeometry& g) {
  const std::size_t H = g.height_px, W = g.width_px;
  const double color[2][3] = {{0.8, 0.1, 0.1}, {0.1, 0.2, 0.7}};
  std::vector<double> v(3 * H * W);
  for (std::size_t i = 0; i < H; ++i)
    for (std::size_t j = 0; j < W; ++j) {
      const double di = double(i), dj = double(j);
      const double w1 = std::exp(-((di - 20) * (di - 20) + (dj - 22) * (dj - 22)) / (2 * 8.0 * 8.0));
      const double w2 = std::exp(-((di - 44) * (di - 44) + (dj - 42) * (dj - 42)) / (2 * 9.0 * 9.0));
      for (std::size_t c = 0; c < 3; ++c) {
        double x = 1.0;
        x = x * (1 - w1) + color[0][c] * w1;
        x = x * (1 - w2) + color[1][c] * w2;
        v[(c * H + i) * W + j] = x;
      }
    }
  return Canvas::from_tensor(g, ad::Tensor({3, H, W}, std::move(v)));
}

const StrokeShapeModel& trained_model() {
  static const StrokeShapeModel model = [] {
    TrainConfig tc;
    tc.seed = 1;
    return train_param2stroke(generate_dataset(200, 1), tc).model;
  }();
  return model;
}

StrokeParams random_stroke(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const ShapeLimits lim;
  StrokeParams s;
  s.shape.h = lim.h_min + (lim.h_max - lim.h_min) * u(rng);
  s.shape.l = lim.l_min + (lim.l_max - lim.l_min) * u(rng);
  s.shape.b = lim.b_max * (2 * u(rng) - 1);
  s.x = u(rng);
  s.y = u(rng);
  s.theta = wrap_angle(6.283185307179586 * u(rng) - 3.141592653589793);
  s.color = {u(rng), u(rng), u(rng)};
  return s;
}

}  // namespace support
