#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "brushplan/canvas.hpp"

namespace brushplan {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

struct Correspondence {
  Point2 source;
  Point2 target;
};

/// 3x3 projective map, row-major, scaled so the bottom-right entry is 1
/// whenever it is nonzero.
struct Homography {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  double operator()(int r, int c) const { return m[static_cast<std::size_t>(3 * r + c)]; }
  Homography inverse() const;
};

/// Normalized DLT (Hartley conditioning, smallest singular vector). Maps
/// each source point onto its target, so fitting dot positions as
/// intended -> observed gives the intended-to-actual map.
Homography fit_homography(const std::vector<Correspondence>& pairs);
/// Projective application; throws when |w| < 1e-12.
Point2 apply_homography(const Homography& h, Point2 p);

/// Warps the quadrilateral `corners` (top-left, top-right, bottom-right,
/// bottom-left, in image coordinates where pixel (i,j) covers
/// [j,j+1]x[i,i+1]) onto an output canvas of `output` geometry, bilinear
/// with edge replication.
Canvas rectify_canvas(const Canvas& image, const std::array<Point2, 4>& corners,
                      const CanvasGeometry& output);
Canvas rectify_canvas(const Canvas& image, const std::array<Point2, 4>& corners);

/// out = A * rgb + offset, clamped to [0,1]. Row-major 3x4 [A | offset].
struct ColorTransform {
  std::array<double, 12> m{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0};

  Rgb apply(const Rgb& c) const;
  static ColorTransform identity() { return {}; }
};

/// Least-squares affine fit of measured -> reference colors (>= 4 pairs).
ColorTransform fit_color_transform(const std::vector<Rgb>& measured, const std::vector<Rgb>& reference);
Canvas apply_color_transform(const ColorTransform& t, const Canvas& canvas);

/// `sx sy dx dy` per line.
std::vector<Correspondence> read_correspondences(const std::filesystem::path& path);
/// `mr mg mb rr rg rb` per line.
void read_color_pairs(const std::filesystem::path& path, std::vector<Rgb>& measured,
                      std::vector<Rgb>& reference);
/// Entries row-major on one line.
void write_homography(const std::filesystem::path& path, const Homography& h);
void write_color_transform(const std::filesystem::path& path, const ColorTransform& t);

}  // namespace brushplan
