#pragma once

#include "palx/image.hpp"
#include "palx/inkml.hpp"

namespace palx {

// Draws strokes into a target image: uniform scale (aspect preserved) into the
// target minus a 4-pixel margin, centered, polylines of the given pen width,
// ink = 1 on background = 0. Pure and deterministic.
Image rasterize(const std::vector<Stroke>& strokes, int target_h, int target_w, int pen_width);

}  // namespace palx
