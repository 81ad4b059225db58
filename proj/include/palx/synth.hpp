#pragma once

#include <cstdint>
#include <vector>

#include "palx/dataset.hpp"
#include "palx/glyphs.hpp"
#include "palx/random.hpp"

namespace palx {

// Samples one expression from the small LaTeX grammar (letters, digits,
// + - =, scripts, \frac, \sqrt) with nesting bounded by max_depth.
std::vector<std::string> sample_expression(int max_depth, Rng& rng);

// Fixed vocabulary covering every token the grammar can emit.
Vocabulary synth_vocabulary();

// Per-glyph affine distortion: rotation up to 8 degrees, shear up to 0.15,
// translation up to 2 design px, applied about each glyph's center.
std::vector<Stroke> jitter_glyphs(const std::vector<PlacedGlyph>& glyphs, Rng& rng);

// Deterministic paired corpus: printed = clean glyph rendering, handwritten =
// the same layout re-rendered with seeded jitter and varied pen width.
std::vector<PairedSample> synth_generate(int grammar_depth, int count, uint64_t seed,
                                         int target_h = 64, int target_w = 256);

}  // namespace palx
