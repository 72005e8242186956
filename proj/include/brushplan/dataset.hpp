#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "brushplan/oracle.hpp"
#include "brushplan/stroke.hpp"

namespace brushplan {

struct StrokeSample {
  StrokeShape shape;
  ad::Tensor stamp;  // [rows, cols]
};

/// Shape/appearance pairs sharing one stamp geometry.
struct StrokeDataset {
  std::vector<StrokeSample> samples;
  StampGeometry geometry;
  std::string provenance = "oracle";

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  StrokeDataset subset(const std::vector<std::size_t>& indices) const;
};

struct DatasetOptions {
  StampGeometry geometry;
  OracleNoise noise;
  OracleBrush brush;
  ShapeLimits limits;
};

/// Random strokes with shapes drawn uniformly in their ranges and rendered by
/// the oracle. Stroke i uses its own RNG stream derived from (seed, i).
StrokeDataset generate_dataset(std::size_t n_strokes, std::uint64_t seed,
                               const DatasetOptions& options = {});

/// Directory with `index.tsv` (h, l, b, stamp file) plus one 8-bit P5 file
/// per stamp. Values are quantized to 1/255 on write.
void save_dataset(const StrokeDataset& dataset, const std::filesystem::path& dir);
StrokeDataset load_dataset(const std::filesystem::path& dir);

}  // namespace brushplan
