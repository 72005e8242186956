#include "brushplan/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>

#include "brushplan/image_io.hpp"
#include "brushplan/numeric_text.hpp"

namespace brushplan {

StrokeDataset StrokeDataset::subset(const std::vector<std::size_t>& indices) const {
  StrokeDataset out;
  out.geometry = geometry;
  out.provenance = provenance;
  for (std::size_t i : indices) out.samples.push_back(samples.at(i));
  return out;
}

StrokeDataset generate_dataset(std::size_t n_strokes, std::uint64_t seed,
                               const DatasetOptions& options) {
  if (n_strokes == 0) throw std::invalid_argument("generate_dataset: need at least one stroke");
  const auto& lim = options.limits;
  StrokeDataset out;
  out.geometry = options.geometry;
  out.provenance = "oracle";
  out.samples.resize(n_strokes);
  for (std::size_t i = 0; i < n_strokes; ++i) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i >> 32)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> uh(lim.h_min, lim.h_max);
    std::uniform_real_distribution<double> ul(lim.l_min, lim.l_max);
    std::uniform_real_distribution<double> ub(-lim.b_max, lim.b_max);
    StrokeShape s;
    s.h = uh(rng);
    s.l = ul(rng);
    s.b = ub(rng);
    auto stamp = oracle_render_stroke(s, options.geometry, options.noise, rng, options.brush);
    out.samples[i] = {s, stamp.magnitude};
  }
  return out;
}

namespace {

std::string stamp_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "stamp_%05zu.pgm", i);
  return buf;
}

}  // namespace

void save_dataset(const StrokeDataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream idx(dir / "index.tsv", std::ios::binary | std::ios::trunc);
  if (!idx) throw std::runtime_error("cannot write " + (dir / "index.tsv").string());
  const auto& g = dataset.geometry;
  idx << "# provenance " << dataset.provenance << '\n';
  idx << "# stamp " << g.rows << ' ' << g.cols << ' ' << format_double(g.meters_per_pixel) << ' '
      << format_double(g.origin_col) << ' ' << format_double(g.origin_row) << '\n';
  idx << "h\tl\tb\tstamp\n";
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& s = dataset.samples[i];
    const auto name = stamp_name(i);
    idx << format_double(s.shape.h) << '\t' << format_double(s.shape.l) << '\t'
        << format_double(s.shape.b) << '\t' << name << '\n';
    write_pgm(dir / name, s.stamp);
  }
  if (!idx) throw std::runtime_error("write failed for " + (dir / "index.tsv").string());
}

StrokeDataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream idx(dir / "index.tsv", std::ios::binary);
  if (!idx) throw std::runtime_error("cannot read " + (dir / "index.tsv").string());
  StrokeDataset out;
  out.provenance = "imported";
  bool header_seen = false, geometry_seen = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(idx, line)) {
    ++lineno;
    const auto f = split_fields(line);
    if (f.empty()) continue;
    if (f[0] == "#") {
      if (f.size() >= 3 && f[1] == "provenance") out.provenance = std::string(f[2]);
      if (f.size() == 7 && f[1] == "stamp") {
        out.geometry.rows = static_cast<std::size_t>(parse_double(f[2], "stamp rows"));
        out.geometry.cols = static_cast<std::size_t>(parse_double(f[3], "stamp cols"));
        out.geometry.meters_per_pixel = parse_double(f[4], "meters per pixel");
        out.geometry.origin_col = parse_double(f[5], "origin column");
        out.geometry.origin_row = parse_double(f[6], "origin row");
        geometry_seen = true;
      }
      continue;
    }
    if (!header_seen) {
      if (f.size() != 4 || f[0] != "h" || f[1] != "l" || f[2] != "b" || f[3] != "stamp") {
        throw std::runtime_error("index.tsv: expected header 'h l b stamp'");
      }
      header_seen = true;
      continue;
    }
    if (f.size() != 4) {
      throw std::runtime_error("index.tsv line " + std::to_string(lineno) + ": expected 4 columns");
    }
    StrokeSample s;
    s.shape = {parse_double(f[0], "h"), parse_double(f[1], "l"), parse_double(f[2], "b")};
    s.stamp = read_pgm(dir / std::string(f[3]));
    if (!geometry_seen) {
      out.geometry.rows = s.stamp.dim(0);
      out.geometry.cols = s.stamp.dim(1);
      geometry_seen = true;
    }
    if (s.stamp.shape() != ad::Shape{out.geometry.rows, out.geometry.cols}) {
      throw std::runtime_error("index.tsv line " + std::to_string(lineno) + ": stamp " +
                               std::string(f[3]) + " has a different resolution");
    }
    out.samples.push_back(std::move(s));
  }
  if (!header_seen) throw std::runtime_error("index.tsv: missing header");
  return out;
}

}  // namespace brushplan
