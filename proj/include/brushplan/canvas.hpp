#pragma once

#include <filesystem>

#include "brushplan/ad/tensor.hpp"
#include "brushplan/stroke.hpp"

namespace brushplan {

/// Pixel grid and physical extent of a canvas. x runs along the width
/// (columns), y along the height (rows, downwards).
struct CanvasGeometry {
  std::size_t width_px = 256;
  std::size_t height_px = 201;
  double width_m = 0.3556;   // 14 inches
  double height_m = 0.2794;  // 11 inches

  /// Height in meters follows from the pixel aspect ratio.
  static CanvasGeometry with_width(std::size_t width_px, std::size_t height_px, double width_m);

  double meters_per_px_x() const { return width_m / static_cast<double>(width_px); }
  double meters_per_px_y() const { return height_m / static_cast<double>(height_px); }
  /// Throws unless sizes are positive and pixels are square within 1%.
  void validate() const;

  bool operator==(const CanvasGeometry&) const = default;
};

/// RGB image [3, H, W] with values in [0,1].
struct Canvas {
  CanvasGeometry geometry;
  ad::Tensor rgb;

  static Canvas blank(const CanvasGeometry& geometry, const Rgb& fill = {1.0, 1.0, 1.0});
  /// Wraps an image tensor; throws on shape mismatch or values outside [0,1].
  static Canvas from_tensor(const CanvasGeometry& geometry, ad::Tensor rgb);

  std::size_t height() const { return geometry.height_px; }
  std::size_t width() const { return geometry.width_px; }
};

/// P6 import; the physical width is supplied, the height follows the pixels.
Canvas read_canvas(const std::filesystem::path& path, double width_m);
void write_canvas(const std::filesystem::path& path, const Canvas& canvas);

double mean_abs_difference(const Canvas& a, const Canvas& b);
double mean_sq_difference(const Canvas& a, const Canvas& b);

}  // namespace brushplan
