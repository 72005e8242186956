#include "brushplan/canvas.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "brushplan/image_io.hpp"

namespace brushplan {

CanvasGeometry CanvasGeometry::with_width(std::size_t width_px, std::size_t height_px,
                                          double width_m) {
  CanvasGeometry g{width_px, height_px, width_m,
                   width_m * static_cast<double>(height_px) / static_cast<double>(width_px)};
  g.validate();
  return g;
}

void CanvasGeometry::validate() const {
  if (width_px == 0 || height_px == 0 || !(width_m > 0.0) || !(height_m > 0.0)) {
    throw std::invalid_argument("canvas geometry: sizes must be positive");
  }
  const double ratio = meters_per_px_x() / meters_per_px_y();
  if (std::abs(ratio - 1.0) > 0.01) {
    throw std::invalid_argument("canvas geometry: " + std::to_string(width_px) + "x" +
                                std::to_string(height_px) + " px does not match the physical aspect");
  }
}

Canvas Canvas::blank(const CanvasGeometry& geometry, const Rgb& fill) {
  geometry.validate();
  const std::size_t plane = geometry.width_px * geometry.height_px;
  std::vector<double> v(3 * plane);
  for (std::size_t c = 0; c < 3; ++c)
    std::fill(v.begin() + static_cast<long>(c * plane), v.begin() + static_cast<long>((c + 1) * plane),
              std::clamp(fill[c], 0.0, 1.0));
  return {geometry, ad::Tensor({3, geometry.height_px, geometry.width_px}, std::move(v))};
}

Canvas Canvas::from_tensor(const CanvasGeometry& geometry, ad::Tensor rgb) {
  geometry.validate();
  const ad::Shape want{3, geometry.height_px, geometry.width_px};
  if (rgb.shape() != want) {
    throw std::invalid_argument("canvas: image shape " + ad::shape_string(rgb.shape()) +
                                " does not match geometry " + ad::shape_string(want));
  }
  for (double v : rgb.data()) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("canvas: value outside [0,1]");
  }
  return {geometry, std::move(rgb)};
}

Canvas read_canvas(const std::filesystem::path& path, double width_m) {
  auto img = read_ppm(path);
  const auto geom = CanvasGeometry::with_width(img.dim(2), img.dim(1), width_m);
  return Canvas::from_tensor(geom, std::move(img));
}

void write_canvas(const std::filesystem::path& path, const Canvas& canvas) {
  write_ppm(path, canvas.rgb);
}

namespace {

void check_same(const Canvas& a, const Canvas& b) {
  if (a.rgb.shape() != b.rgb.shape()) {
    throw std::invalid_argument("canvas comparison: incompatible shapes " +
                                ad::shape_string(a.rgb.shape()) + " and " +
                                ad::shape_string(b.rgb.shape()));
  }
}

}  // namespace

double mean_abs_difference(const Canvas& a, const Canvas& b) {
  check_same(a, b);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.rgb.size(); ++i) acc += std::abs(a.rgb[i] - b.rgb[i]);
  return acc / static_cast<double>(a.rgb.size());
}

double mean_sq_difference(const Canvas& a, const Canvas& b) {
  check_same(a, b);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.rgb.size(); ++i) {
    const double d = a.rgb[i] - b.rgb[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.rgb.size());
}

}  // namespace brushplan
