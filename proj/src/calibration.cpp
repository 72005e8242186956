#include "brushplan/calibration.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

#include "brushplan/numeric_text.hpp"

namespace brushplan {
namespace {

using Mat3 = Eigen::Matrix3d;

Mat3 to_eigen(const Homography& h) {
  Mat3 m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = h(r, c);
  return m;
}

Homography from_eigen(Mat3 m) {
  if (std::abs(m(2, 2)) > 1e-12 * m.cwiseAbs().maxCoeff()) {
    m /= m(2, 2);
  } else {
    m /= m.norm();
  }
  Homography h;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) h.m[static_cast<std::size_t>(3 * r + c)] = m(r, c);
  return h;
}

// Translate to the centroid and scale to mean distance sqrt(2).
Mat3 conditioning(const std::vector<Point2>& pts) {
  double cx = 0.0, cy = 0.0;
  for (const auto& p : pts) cx += p.x, cy += p.y;
  cx /= static_cast<double>(pts.size());
  cy /= static_cast<double>(pts.size());
  double mean = 0.0;
  for (const auto& p : pts) mean += std::hypot(p.x - cx, p.y - cy);
  mean /= static_cast<double>(pts.size());
  if (!(mean > 0.0)) throw std::invalid_argument("fit_homography: all points coincide");
  const double s = std::sqrt(2.0) / mean;
  Mat3 t;
  t << s, 0, -s * cx, 0, s, -s * cy, 0, 0, 1;
  return t;
}

double cross(const Point2& a, const Point2& b, const Point2& c) {
  return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

void check_no_collinear_triple(const std::vector<Point2>& p, const char* which) {
  double scale = 0.0;
  for (const auto& a : p)
    for (const auto& b : p) scale = std::max(scale, std::hypot(a.x - b.x, a.y - b.y));
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = i + 1; j < p.size(); ++j)
      for (std::size_t k = j + 1; k < p.size(); ++k)
        if (std::abs(cross(p[i], p[j], p[k])) <= 1e-10 * scale * scale) {
          throw std::invalid_argument(std::string("fit_homography: degenerate configuration, ") + which +
                                      " points " + std::to_string(i) + ", " + std::to_string(j) +
                                      ", " + std::to_string(k) + " are collinear");
        }
}

}  // namespace

Homography Homography::inverse() const {
  const Mat3 m = to_eigen(*this);
  const double det = m.determinant();
  if (!(std::abs(det) > 1e-300) || !std::isfinite(det)) {
    throw std::invalid_argument("homography is singular");
  }
  return from_eigen(m.inverse());
}

Homography fit_homography(const std::vector<Correspondence>& pairs) {
  if (pairs.size() < 4) {
    throw std::invalid_argument("fit_homography: need at least 4 point pairs, got " +
                                std::to_string(pairs.size()));
  }
  std::vector<Point2> src, dst;
  for (const auto& p : pairs) {
    src.push_back(p.source);
    dst.push_back(p.target);
  }
  if (pairs.size() == 4) {
    check_no_collinear_triple(src, "source");
    check_no_collinear_triple(dst, "target");
  }
  const Mat3 ts = conditioning(src), td = conditioning(dst);
  const std::size_t n = pairs.size();
  Eigen::MatrixXd a(2 * n, 9);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d s = ts * Eigen::Vector3d(src[i].x, src[i].y, 1.0);
    const Eigen::Vector3d d = td * Eigen::Vector3d(dst[i].x, dst[i].y, 1.0);
    const double x = s.x() / s.z(), y = s.y() / s.z(), u = d.x() / d.z(), v = d.y() / d.z();
    const auto r = static_cast<Eigen::Index>(2 * i);
    a.row(r) << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
    a.row(r + 1) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  // A 2-dimensional null space (or worse) means the points do not pin H.
  if (sv.size() >= 8 && sv(7) <= 1e-10 * sv(0)) {
    throw std::invalid_argument("fit_homography: degenerate configuration, correspondences do not determine a unique homography");
  }
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Mat3 hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  const Mat3 out = td.inverse() * hn * ts;
  const double det = out.determinant() / std::pow(out.norm(), 3);
  if (!(std::abs(det) > 1e-12)) {
    throw std::invalid_argument("fit_homography: degenerate configuration, fitted map is singular");
  }
  return from_eigen(out);
}

Point2 apply_homography(const Homography& h, Point2 p) {
  const double w = h(2, 0) * p.x + h(2, 1) * p.y + h(2, 2);
  if (!(std::abs(w) >= 1e-12)) {
    throw std::domain_error("apply_homography: point maps to infinity (|w| < 1e-12)");
  }
  return {(h(0, 0) * p.x + h(0, 1) * p.y + h(0, 2)) / w, (h(1, 0) * p.x + h(1, 1) * p.y + h(1, 2)) / w};
}

Canvas rectify_canvas(const Canvas& image, const std::array<Point2, 4>& corners,
                      const CanvasGeometry& output) {
  output.validate();
  const double W = static_cast<double>(output.width_px), H = static_cast<double>(output.height_px);
  const std::array<Point2, 4> rect{Point2{0, 0}, Point2{W, 0}, Point2{W, H}, Point2{0, H}};
  std::vector<Correspondence> pairs;
  for (int k = 0; k < 4; ++k) pairs.push_back({rect[static_cast<std::size_t>(k)], corners[static_cast<std::size_t>(k)]});
  const Homography h = fit_homography(pairs);

  const std::size_t iw = image.width(), ih = image.height();
  const std::size_t ow = output.width_px, oh = output.height_px;
  const std::size_t iplane = iw * ih, oplane = ow * oh;
  const auto src = image.rgb.data();
  std::vector<double> out(3 * oplane);
  const auto snap = [](double v) {
    const double r = std::round(v);
    return std::abs(v - r) < 1e-9 ? r : v;
  };
  const auto idx = [](long v, std::size_t n) {
    return static_cast<std::size_t>(std::clamp<long>(v, 0, static_cast<long>(n) - 1));
  };
  for (std::size_t i = 0; i < oh; ++i)
    for (std::size_t j = 0; j < ow; ++j) {
      const Point2 p = apply_homography(h, {static_cast<double>(j) + 0.5, static_cast<double>(i) + 0.5});
      const double sx = snap(p.x - 0.5), sy = snap(p.y - 0.5);
      const double fx = std::floor(sx), fy = std::floor(sy);
      const double wx = sx - fx, wy = sy - fy;
      const long x0 = static_cast<long>(fx), y0 = static_cast<long>(fy);
      const std::size_t c0 = idx(x0, iw), c1 = idx(x0 + 1, iw), r0 = idx(y0, ih), r1 = idx(y0 + 1, ih);
      for (std::size_t c = 0; c < 3; ++c) {
        const double* s = src.data() + c * iplane;
        double v = (1 - wy) * ((1 - wx) * s[r0 * iw + c0] + wx * s[r0 * iw + c1]) +
                   wy * ((1 - wx) * s[r1 * iw + c0] + wx * s[r1 * iw + c1]);
        // Exact sample positions reproduce the source value bit for bit.
        if (wx == 0.0 && wy == 0.0) v = s[r0 * iw + c0];
        out[c * oplane + i * ow + j] = std::clamp(v, 0.0, 1.0);
      }
    }
  return Canvas::from_tensor(output, ad::Tensor({3, oh, ow}, std::move(out)));
}

Canvas rectify_canvas(const Canvas& image, const std::array<Point2, 4>& corners) {
  return rectify_canvas(image, corners, image.geometry);
}

Rgb ColorTransform::apply(const Rgb& c) const {
  Rgb out;
  for (std::size_t r = 0; r < 3; ++r) {
    const double v = m[4 * r] * c[0] + m[4 * r + 1] * c[1] + m[4 * r + 2] * c[2] + m[4 * r + 3];
    out[r] = std::clamp(v, 0.0, 1.0);
  }
  return out;
}

ColorTransform fit_color_transform(const std::vector<Rgb>& measured, const std::vector<Rgb>& reference) {
  if (measured.size() != reference.size()) {
    throw std::invalid_argument("fit_color_transform: " + std::to_string(measured.size()) +
                                " measured colors but " + std::to_string(reference.size()) + " references");
  }
  if (measured.size() < 4) {
    throw std::invalid_argument("fit_color_transform: need at least 4 color pairs, got " +
                                std::to_string(measured.size()));
  }
  const auto n = static_cast<Eigen::Index>(measured.size());
  Eigen::MatrixXd a(n, 4), b(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& m = measured[static_cast<std::size_t>(i)];
    const auto& r = reference[static_cast<std::size_t>(i)];
    a.row(i) << m[0], m[1], m[2], 1.0;
    b.row(i) << r[0], r[1], r[2];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  if (qr.rank() < 4) {
    throw std::invalid_argument("fit_color_transform: measured colors are rank deficient (affinely dependent)");
  }
  const Eigen::MatrixXd x = qr.solve(b);  // 4x3
  ColorTransform t;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) t.m[static_cast<std::size_t>(4 * r + c)] = x(c, r);
  return t;
}

Canvas apply_color_transform(const ColorTransform& t, const Canvas& canvas) {
  const std::size_t plane = canvas.width() * canvas.height();
  const auto d = canvas.rgb.data();
  std::vector<double> out(3 * plane);
  for (std::size_t p = 0; p < plane; ++p) {
    const Rgb o = t.apply({d[p], d[plane + p], d[2 * plane + p]});
    for (std::size_t c = 0; c < 3; ++c) out[c * plane + p] = o[c];
  }
  return {canvas.geometry, ad::Tensor(canvas.rgb.shape(), std::move(out))};
}

namespace {

std::vector<std::vector<double>> read_rows(const std::filesystem::path& path, std::size_t width) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const auto fields = split_fields(line);
    if (fields.empty() || fields[0].front() == '#') continue;
    if (fields.size() != width) {
      throw std::runtime_error(path.string() + " line " + std::to_string(lineno) + ": expected " +
                               std::to_string(width) + " values");
    }
    std::vector<double> row;
    for (auto t : fields) row.push_back(parse_double(t, "value"));
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_row(const std::filesystem::path& path, const double* v, std::size_t n) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  for (std::size_t i = 0; i < n; ++i) f << (i ? " " : "") << format_double(v[i]);
  f << '\n';
  if (!f) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace

std::vector<Correspondence> read_correspondences(const std::filesystem::path& path) {
  std::vector<Correspondence> out;
  for (const auto& r : read_rows(path, 4)) out.push_back({{r[0], r[1]}, {r[2], r[3]}});
  return out;
}

void read_color_pairs(const std::filesystem::path& path, std::vector<Rgb>& measured,
                      std::vector<Rgb>& reference) {
  measured.clear();
  reference.clear();
  for (const auto& r : read_rows(path, 6)) {
    measured.push_back({r[0], r[1], r[2]});
    reference.push_back({r[3], r[4], r[5]});
  }
}

void write_homography(const std::filesystem::path& path, const Homography& h) {
  write_row(path, h.m.data(), h.m.size());
}

void write_color_transform(const std::filesystem::path& path, const ColorTransform& t) {
  write_row(path, t.m.data(), t.m.size());
}

}  // namespace brushplan
