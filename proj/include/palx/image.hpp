#pragma once

#include <string>
#include <vector>

#include "palx/errors.hpp"

namespace palx {

// Single-channel image, pixels in [0,1], row-major.
struct Image {
  int h = 0;
  int w = 0;
  std::vector<double> pix;

  Image() = default;
  Image(int height, int width, double fill = 0.0);

  double& at(int y, int x) { return pix[static_cast<size_t>(y) * w + x]; }
  double at(int y, int x) const { return pix[static_cast<size_t>(y) * w + x]; }

  bool operator==(const Image& o) const { return h == o.h && w == o.w && pix == o.pix; }
};

// Shifts content right by dx and down by dy (either may be negative);
// vacated pixels become background (0).
Image translate(const Image& img, int dx, int dy);

// Binary PGM (P5), maxval 255, pixel byte = round(255 * value).
void write_pgm(const std::string& path, const Image& img);
Image read_pgm(const std::string& path);

}  // namespace palx
