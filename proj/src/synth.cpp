#include "palx/synth.hpp"

#include <cmath>
#include <string>

#include "palx/raster.hpp"

namespace palx {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

const std::vector<std::string>& atom_tokens() {
  static const std::vector<std::string> atoms = [] {
    std::vector<std::string> v;
    for (char c = 'a'; c <= 'z'; ++c) v.emplace_back(1, c);
    for (char c = '0'; c <= '9'; ++c) v.emplace_back(1, c);
    return v;
  }();
  return atoms;
}

void emit_expr(std::vector<std::string>& out, int depth, int terms, Rng& rng);

// atom | atom^{...} | atom_{...} | \frac{...}{...} | \sqrt{...}
void emit_term(std::vector<std::string>& out, int depth, Rng& rng) {
  int roll = rng.uniform_int(100);
  bool structured = depth > 0;
  if (structured && roll < 15) {
    out.push_back("\\frac");
    out.push_back("{");
    emit_expr(out, depth - 1, 1, rng);
    out.push_back("}");
    out.push_back("{");
    emit_expr(out, depth - 1, 1, rng);
    out.push_back("}");
    return;
  }
  if (structured && roll < 27) {
    out.push_back("\\sqrt");
    out.push_back("{");
    emit_expr(out, depth - 1, 1, rng);
    out.push_back("}");
    return;
  }
  out.push_back(atom_tokens()[rng.uniform_int(static_cast<int>(atom_tokens().size()))]);
  if (structured && roll >= 27 && roll < 42) {
    out.push_back(roll < 35 ? "^" : "_");
    out.push_back("{");
    emit_expr(out, depth - 1, 1, rng);
    out.push_back("}");
  }
}

void emit_expr(std::vector<std::string>& out, int depth, int min_terms, Rng& rng) {
  static const std::vector<std::string> ops{"+", "-", "="};
  int terms = min_terms + rng.uniform_int(3 - min_terms + 1);  // min_terms..3
  for (int t = 0; t < terms; ++t) {
    if (t > 0) out.push_back(ops[rng.uniform_int(3)]);
    emit_term(out, depth, rng);
  }
}

}  // namespace

std::vector<std::string> sample_expression(int max_depth, Rng& rng) {
  if (max_depth < 0) throw ContractError("grammar depth must be >= 0");
  std::vector<std::string> out;
  emit_expr(out, max_depth, 1, rng);
  return out;
}

Vocabulary synth_vocabulary() {
  std::vector<std::string> tokens = atom_tokens();
  for (const char* t : {"+", "-", "=", "^", "_", "{", "}", "\\frac", "\\sqrt"})
    tokens.emplace_back(t);
  return Vocabulary::from_tokens(std::move(tokens));
}

std::vector<Stroke> jitter_glyphs(const std::vector<PlacedGlyph>& glyphs, Rng& rng) {
  std::vector<Stroke> out;
  for (const PlacedGlyph& g : glyphs) {
    Box b = strokes_bounds(g.strokes);
    double cx = (b.x0 + b.x1) / 2.0, cy = (b.y0 + b.y1) / 2.0;
    double theta = rng.uniform(-8.0, 8.0) * kPi / 180.0;
    double shear = rng.uniform(-0.15, 0.15);
    double dx = rng.uniform(-2.0, 2.0);
    double dy = rng.uniform(-2.0, 2.0);
    double c = std::cos(theta), s = std::sin(theta);
    for (const Stroke& st : g.strokes) {
      Stroke js;
      js.points.reserve(st.points.size());
      for (const Point& p : st.points) {
        double px = p.x - cx, py = p.y - cy;
        px += shear * py;  // horizontal shear
        double rx = c * px - s * py;
        double ry = s * px + c * py;
        js.points.push_back({rx + cx + dx, ry + cy + dy});
      }
      out.push_back(std::move(js));
    }
  }
  return out;
}

std::vector<PairedSample> synth_generate(int grammar_depth, int count, uint64_t seed,
                                         int target_h, int target_w) {
  if (count < 1) throw ContractError("synth_generate: count must be >= 1");
  Vocabulary vocab = synth_vocabulary();
  std::vector<PairedSample> out;
  out.reserve(count);
  Rng rng(seed);
  for (int i = 0; i < count; ++i) {
    // Resample until the expression fits the token budget (keeps images legible).
    std::vector<std::string> tokens;
    do {
      tokens = sample_expression(grammar_depth, rng);
    } while (tokens.size() > 24);

    std::vector<PlacedGlyph> glyphs = layout_tokens(tokens);
    PairedSample ps;
    ps.printed = rasterize(flatten_glyphs(glyphs), target_h, target_w, 1);
    int pen = 1 + rng.uniform_int(2);
    ps.handwritten = rasterize(jitter_glyphs(glyphs, rng), target_h, target_w, pen);
    // The construction must yield visibly distinct domains; in the measure-zero
    // event the jitter collapses to identity, redraw it.
    while (ps.handwritten == ps.printed)
      ps.handwritten = rasterize(jitter_glyphs(glyphs, rng), target_h, target_w, pen);

    ps.ids = wrap_ids(vocab, tokens);
    std::string label;
    for (const std::string& t : tokens) {
      if (!label.empty()) label.push_back(' ');
      label += t;
    }
    ps.label = std::move(label);
    char buf[16];
    std::snprintf(buf, sizeof buf, "synth%05d", i);
    ps.id = buf;
    out.push_back(std::move(ps));
  }
  return out;
}

}  // namespace palx
