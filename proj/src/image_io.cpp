#include "brushplan/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace brushplan {
namespace {

struct Header {
  std::size_t width = 0, height = 0, maxval = 0;
};

void skip_space_and_comments(std::istream& in) {
  for (;;) {
    const int c = in.peek();
    if (c == '#') {
      std::string discard;
      std::getline(in, discard);
    } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      in.get();
    } else {
      return;
    }
  }
}

std::size_t read_header_field(std::istream& in, const char* what) {
  skip_space_and_comments(in);
  long long v = -1;
  if (!(in >> v) || v <= 0) {
    throw std::runtime_error(std::string("netpbm: bad or missing ") + what);
  }
  return static_cast<std::size_t>(v);
}

Header read_header(std::istream& in, const char* magic) {
  char m[2] = {0, 0};
  in.read(m, 2);
  if (!in || m[0] != magic[0] || m[1] != magic[1]) {
    throw std::runtime_error(std::string("netpbm: expected magic ") + magic);
  }
  Header h;
  h.width = read_header_field(in, "width");
  h.height = read_header_field(in, "height");
  h.maxval = read_header_field(in, "maxval");
  if (h.maxval > 65535) throw std::runtime_error("netpbm: maxval above 65535");
  in.get();  // single whitespace before the raster
  return h;
}

std::vector<double> read_samples(std::istream& in, std::size_t count, std::size_t maxval) {
  const std::size_t bytes = maxval > 255 ? 2 : 1;
  std::string raw(count * bytes, '\0');
  in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
    throw std::runtime_error("netpbm: truncated raster");
  }
  std::vector<double> out(count);
  const auto u = [&](std::size_t i) { return static_cast<unsigned char>(raw[i]); };
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t v = bytes == 2 ? (u(2 * i) << 8) | u(2 * i + 1) : u(i);
    out[i] = static_cast<double>(v) / static_cast<double>(maxval);
  }
  return out;
}

unsigned char quantize(double v) {
  return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

template <typename Fn>
auto with_file(const std::filesystem::path& path, std::ios::openmode mode, Fn&& fn) {
  std::fstream f(path, mode | std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  return fn(f);
}

}  // namespace

void write_pgm(std::ostream& out, const ad::Tensor& plane) {
  if (plane.rank() != 2) throw std::invalid_argument("write_pgm: expected [H,W]");
  out << "P5\n" << plane.dim(1) << ' ' << plane.dim(0) << "\n255\n";
  std::string raw(plane.size(), '\0');
  for (std::size_t i = 0; i < plane.size(); ++i) raw[i] = static_cast<char>(quantize(plane[i]));
  out.write(raw.data(), static_cast<std::streamsize>(raw.size()));
}

ad::Tensor read_pgm(std::istream& in) {
  const Header h = read_header(in, "P5");
  return ad::Tensor({h.height, h.width}, read_samples(in, h.width * h.height, h.maxval));
}

void write_ppm(std::ostream& out, const ad::Tensor& rgb) {
  if (rgb.rank() != 3 || rgb.dim(0) != 3) throw std::invalid_argument("write_ppm: expected [3,H,W]");
  const std::size_t H = rgb.dim(1), W = rgb.dim(2), plane = H * W;
  out << "P6\n" << W << ' ' << H << "\n255\n";
  std::string raw(3 * plane, '\0');
  for (std::size_t p = 0; p < plane; ++p)
    for (std::size_t c = 0; c < 3; ++c) raw[3 * p + c] = static_cast<char>(quantize(rgb[c * plane + p]));
  out.write(raw.data(), static_cast<std::streamsize>(raw.size()));
}

ad::Tensor read_ppm(std::istream& in) {
  const Header h = read_header(in, "P6");
  const std::size_t plane = h.width * h.height;
  const auto interleaved = read_samples(in, 3 * plane, h.maxval);
  std::vector<double> out(3 * plane);
  for (std::size_t p = 0; p < plane; ++p)
    for (std::size_t c = 0; c < 3; ++c) out[c * plane + p] = interleaved[3 * p + c];
  return ad::Tensor({3, h.height, h.width}, std::move(out));
}

void write_pgm(const std::filesystem::path& path, const ad::Tensor& plane) {
  with_file(path, std::ios::out | std::ios::trunc, [&](std::fstream& f) { write_pgm(f, plane); });
}

ad::Tensor read_pgm(const std::filesystem::path& path) {
  return with_file(path, std::ios::in, [](std::fstream& f) { return read_pgm(f); });
}

void write_ppm(const std::filesystem::path& path, const ad::Tensor& rgb) {
  with_file(path, std::ios::out | std::ios::trunc, [&](std::fstream& f) { write_ppm(f, rgb); });
}

ad::Tensor read_ppm(const std::filesystem::path& path) {
  return with_file(path, std::ios::in, [](std::fstream& f) { return read_ppm(f); });
}

}  // namespace brushplan
