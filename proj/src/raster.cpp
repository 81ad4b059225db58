#include "palx/raster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace palx {

namespace {

constexpr int kMargin = 4;

struct Bounds {
  double x0 = std::numeric_limits<double>::infinity();
  double y0 = std::numeric_limits<double>::infinity();
  double x1 = -std::numeric_limits<double>::infinity();
  double y1 = -std::numeric_limits<double>::infinity();

  void grow(const Point& p) {
    x0 = std::min(x0, p.x);
    y0 = std::min(y0, p.y);
    x1 = std::max(x1, p.x);
    y1 = std::max(y1, p.y);
  }
};

// Stamps a pen disc: pixels strictly inside the radius, with a nearest-pixel
// fallback so thin pens always leave ink.
void stamp(Image& img, double cx, double cy, double radius) {
  int px0 = static_cast<int>(std::ceil(cx - radius));
  int px1 = static_cast<int>(std::floor(cx + radius));
  int py0 = static_cast<int>(std::ceil(cy - radius));
  int py1 = static_cast<int>(std::floor(cy + radius));
  bool inked = false;
  for (int py = py0; py <= py1; ++py) {
    if (py < 0 || py >= img.h) continue;
    for (int px = px0; px <= px1; ++px) {
      if (px < 0 || px >= img.w) continue;
      double dx = px - cx, dy = py - cy;
      if (dx * dx + dy * dy < radius * radius) {
        img.at(py, px) = 1.0;
        inked = true;
      }
    }
  }
  if (!inked) {
    int px = static_cast<int>(std::lround(cx));
    int py = static_cast<int>(std::lround(cy));
    if (px >= 0 && px < img.w && py >= 0 && py < img.h) img.at(py, px) = 1.0;
  }
}

}  // namespace

Image rasterize(const std::vector<Stroke>& strokes, int target_h, int target_w, int pen_width) {
  if (strokes.empty()) throw ContractError("rasterize: empty stroke list");
  if (target_h < 8 || target_w < 8)
    throw ContractError("rasterize: target must be at least 8x8, got " +
                        std::to_string(target_h) + "x" + std::to_string(target_w));
  if (pen_width < 1) throw ContractError("rasterize: pen width must be >= 1");

  Bounds b;
  for (const Stroke& s : strokes) {
    if (s.points.empty()) throw ContractError("rasterize: stroke with no points");
    for (const Point& p : s.points) {
      if (!std::isfinite(p.x) || !std::isfinite(p.y))
        throw ContractError("rasterize: non-finite stroke coordinate");
      b.grow(p);
    }
  }

  double avail_w = target_w - 1 - 2 * kMargin;
  double avail_h = target_h - 1 - 2 * kMargin;
  double bw = b.x1 - b.x0, bh = b.y1 - b.y0;
  double sx = bw > 0 ? avail_w / bw : std::numeric_limits<double>::infinity();
  double sy = bh > 0 ? avail_h / bh : std::numeric_limits<double>::infinity();
  double s = std::min(sx, sy);
  if (!std::isfinite(s)) s = 1.0;  // single-point content: scale is arbitrary

  double cx = (b.x0 + b.x1) / 2.0, cy = (b.y0 + b.y1) / 2.0;
  double tx = (target_w - 1) / 2.0, ty = (target_h - 1) / 2.0;
  auto map = [&](const Point& p) {
    return Point{(p.x - cx) * s + tx, (p.y - cy) * s + ty};
  };

  Image img(target_h, target_w, 0.0);
  double radius = pen_width / 2.0;
  for (const Stroke& st : strokes) {
    Point prev = map(st.points[0]);
    stamp(img, prev.x, prev.y, radius);
    for (size_t i = 1; i < st.points.size(); ++i) {
      Point cur = map(st.points[i]);
      double len = std::hypot(cur.x - prev.x, cur.y - prev.y);
      int steps = std::max(1, static_cast<int>(std::ceil(len / 0.35)));
      for (int k = 1; k <= steps; ++k) {
        double t = static_cast<double>(k) / steps;
        stamp(img, prev.x + t * (cur.x - prev.x), prev.y + t * (cur.y - prev.y), radius);
      }
      prev = cur;
    }
  }
  return img;
}

}  // namespace palx
