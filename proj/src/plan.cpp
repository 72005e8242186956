#include "brushplan/plan.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "brushplan/numeric_text.hpp"

namespace brushplan {

Plan Plan::slice(std::size_t first, std::size_t count) const {
  Plan out;
  out.geometry = geometry;
  const std::size_t lo = std::min(first, strokes.size());
  const std::size_t hi = std::min(strokes.size(), lo + count);
  out.strokes.assign(strokes.begin() + static_cast<long>(lo), strokes.begin() + static_cast<long>(hi));
  return out;
}

namespace {

std::string stroke_line(const StrokeParams& s) {
  const double v[9] = {s.shape.h, s.shape.l, s.shape.b, s.x, s.y, s.theta,
                       s.color[0], s.color[1], s.color[2]};
  std::string line;
  for (int i = 0; i < 9; ++i) {
    if (i) line += ' ';
    line += format_double(v[i]);
  }
  return line;
}

StrokeParams parse_stroke(const std::vector<std::string_view>& f, std::size_t lineno) {
  if (f.size() != 9) {
    throw std::runtime_error("plan line " + std::to_string(lineno) + ": expected 9 fields, got " +
                             std::to_string(f.size()));
  }
  double v[9];
  for (int i = 0; i < 9; ++i) v[i] = parse_double(f[i], "stroke parameter");
  StrokeParams s;
  s.shape = {v[0], v[1], v[2]};
  s.x = v[3];
  s.y = v[4];
  s.theta = v[5];
  s.color = {v[6], v[7], v[8]};
  return s;
}

}  // namespace

void write_plan(std::ostream& out, const Plan& plan, const std::vector<StrokeParams>* realized) {
  const auto& g = plan.geometry;
  out << "PLAN1 " << g.width_px << ' ' << g.height_px << ' ' << format_double(g.width_m) << ' '
      << format_double(g.height_m) << ' ' << plan.size() << '\n';
  for (const auto& s : plan.strokes) out << stroke_line(s) << '\n';
  if (realized) {
    out << "# realized\n";
    for (const auto& s : *realized) out << "# " << stroke_line(s) << '\n';
  }
  if (!out) throw std::runtime_error("plan file: write failed");
}

Plan read_plan(std::istream& in, std::vector<StrokeParams>* realized) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("plan file: empty");
  const auto h = split_fields(line);
  if (h.size() != 6 || h[0] != "PLAN1") throw std::runtime_error("plan file: bad PLAN1 header");
  Plan plan;
  const auto count = [](std::string_view t, const char* what) {
    const double v = parse_double(t, what);
    if (!(v >= 0.0) || v != static_cast<double>(static_cast<std::size_t>(v))) {
      throw std::runtime_error(std::string("plan file: bad ") + what);
    }
    return static_cast<std::size_t>(v);
  };
  plan.geometry.width_px = count(h[1], "width_px");
  plan.geometry.height_px = count(h[2], "height_px");
  plan.geometry.width_m = parse_double(h[3], "width_m");
  plan.geometry.height_m = parse_double(h[4], "height_m");
  const std::size_t n = count(h[5], "stroke count");

  bool in_realized = false;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    auto f = split_fields(line);
    if (f.empty()) continue;
    if (f[0] == "#") {
      if (f.size() == 2 && f[1] == "realized") {
        in_realized = true;
      } else if (in_realized && f.size() == 10 && realized) {
        f.erase(f.begin());
        realized->push_back(parse_stroke(f, lineno));
      }
      continue;
    }
    if (in_realized) throw std::runtime_error("plan file: stroke line after the realized section");
    plan.strokes.push_back(parse_stroke(f, lineno));
  }
  if (plan.strokes.size() != n) {
    throw std::runtime_error("plan file: header declares " + std::to_string(n) + " strokes, found " +
                             std::to_string(plan.strokes.size()));
  }
  return plan;
}

void write_plan(const std::filesystem::path& path, const Plan& plan,
                const std::vector<StrokeParams>* realized) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  write_plan(f, plan, realized);
}

Plan read_plan(const std::filesystem::path& path, std::vector<StrokeParams>* realized) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  return read_plan(f, realized);
}

}  // namespace brushplan
