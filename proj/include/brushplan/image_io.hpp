#pragma once

#include <filesystem>
#include <iosfwd>

#include "brushplan/ad/tensor.hpp"

namespace brushplan {

// Portable graymap (P5) and pixmap (P6) images. Values map linearly between
// [0,1] and [0,maxval]; writing always uses 8 bits with rounding, reading
// accepts 8- and 16-bit files.

void write_pgm(std::ostream& out, const ad::Tensor& plane);  // [H,W]
ad::Tensor read_pgm(std::istream& in);                        // [H,W]
void write_ppm(std::ostream& out, const ad::Tensor& rgb);    // [3,H,W]
ad::Tensor read_ppm(std::istream& in);                        // [3,H,W]

void write_pgm(const std::filesystem::path& path, const ad::Tensor& plane);
ad::Tensor read_pgm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const ad::Tensor& rgb);
ad::Tensor read_ppm(const std::filesystem::path& path);

}  // namespace brushplan
