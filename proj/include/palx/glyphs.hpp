#pragma once

#include <string>
#include <vector>

#include "palx/image.hpp"
#include "palx/inkml.hpp"

namespace palx {

// Built-in stroke font over a 16x16 design box (y down, baseline y=12).
bool has_glyph(const std::string& token);
const std::vector<Stroke>& glyph_strokes(const std::string& token);  // TokenError if absent
std::vector<std::string> atlas_tokens();

// One laid-out glyph: absolute design-space strokes. Fraction rules, radical
// signs and overbars appear as pseudo-glyphs named "\frac" / "\sqrt".
struct PlacedGlyph {
  std::string token;
  std::vector<Stroke> strokes;
};

struct Box {
  double x0, y0, x1, y1;
};

Box strokes_bounds(const std::vector<Stroke>& strokes);

// Typesets a token sequence: horizontal advance, superscript/subscript raised
// or lowered by 35% of the glyph height at scale 0.7, \frac stacked over a
// rule, \sqrt under a radical with an overbar. Structural tokens (^ _ { })
// shape the layout and place no glyph of their own.
std::vector<PlacedGlyph> layout_tokens(const std::vector<std::string>& tokens);

std::vector<Stroke> flatten_glyphs(const std::vector<PlacedGlyph>& glyphs);

// layout_tokens + rasterize at pen width 1.
Image render_printed(const std::vector<std::string>& tokens, int target_h, int target_w);
Image render_printed(const std::string& label, int target_h, int target_w);

}  // namespace palx
