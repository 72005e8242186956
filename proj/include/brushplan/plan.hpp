#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "brushplan/canvas.hpp"
#include "brushplan/stroke.hpp"

namespace brushplan {

/// Ordered strokes on a canvas.
struct Plan {
  CanvasGeometry geometry;
  std::vector<StrokeParams> strokes;

  std::size_t size() const { return strokes.size(); }
  bool empty() const { return strokes.empty(); }
  /// Strokes [first, first + count) with the same geometry.
  Plan slice(std::size_t first, std::size_t count) const;

  bool operator==(const Plan&) const = default;
};

/// Text plan file: `PLAN1 <width_px> <height_px> <width_m> <height_m> <n>`
/// then one `h l b x y theta r g b` line per stroke, shortest round-trip
/// decimals. An optional `# realized` section repeats the format with each
/// line prefixed by `# `, carrying executed (perturbed) parameters.
void write_plan(std::ostream& out, const Plan& plan, const std::vector<StrokeParams>* realized = nullptr);
Plan read_plan(std::istream& in, std::vector<StrokeParams>* realized = nullptr);
void write_plan(const std::filesystem::path& path, const Plan& plan,
                const std::vector<StrokeParams>* realized = nullptr);
Plan read_plan(const std::filesystem::path& path, std::vector<StrokeParams>* realized = nullptr);

}  // namespace brushplan
