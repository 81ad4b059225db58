#include "palx/glyphs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "palx/raster.hpp"
#include "palx/vocab.hpp"

namespace palx {

namespace {

// Design box 16x16, y down. Baseline y=12, x-height 6..12, ascenders to 2,
// descenders to 16, digits 3..12. Nominal ink width 2..9, advance 12.
constexpr double kAdvance = 12.0;
constexpr double kScriptScale = 0.7;
constexpr double kScriptShift = 5.6;  // 35% of the 16-unit glyph height
constexpr double kBaseline = 12.0;

using Poly = std::vector<std::pair<double, double>>;

std::vector<Stroke> make_strokes(const std::vector<Poly>& polys) {
  std::vector<Stroke> out;
  for (const Poly& p : polys) {
    Stroke s;
    for (auto [x, y] : p) s.points.push_back({x, y});
    out.push_back(std::move(s));
  }
  return out;
}

const std::map<std::string, std::vector<Stroke>>& atlas() {
  static const std::map<std::string, std::vector<Stroke>> table = [] {
    std::map<std::string, std::vector<Poly>> g;
    g["a"] = {{{9, 6}, {4, 6}, {2, 8}, {2, 10}, {4, 12}, {9, 12}}, {{9, 6}, {9, 12}}};
    g["b"] = {{{2, 2}, {2, 12}}, {{2, 6}, {6, 6}, {8, 8}, {8, 10}, {6, 12}, {2, 12}}};
    g["c"] = {{{9, 7}, {7, 6}, {4, 6}, {2, 8}, {2, 10}, {4, 12}, {7, 12}, {9, 11}}};
    g["d"] = {{{9, 2}, {9, 12}}, {{9, 6}, {4, 6}, {2, 8}, {2, 10}, {4, 12}, {9, 12}}};
    g["e"] = {{{2, 9}, {9, 9}, {9, 7}, {7, 6}, {4, 6}, {2, 8}, {2, 10}, {4, 12}, {8, 12}}};
    g["f"] = {{{8, 3}, {6, 2}, {4, 4}, {4, 12}}, {{2, 7}, {7, 7}}};
    g["g"] = {{{9, 6}, {4, 6}, {2, 8}, {2, 10}, {4, 12}, {9, 12}},
              {{9, 6}, {9, 14}, {7, 16}, {3, 16}}};
    g["h"] = {{{2, 2}, {2, 12}}, {{2, 7}, {5, 6}, {8, 7}, {8, 12}}};
    g["i"] = {{{5, 6}, {5, 12}}, {{5, 3}}};
    g["j"] = {{{6, 6}, {6, 14}, {4, 16}, {2, 15}}, {{6, 3}}};
    g["k"] = {{{2, 2}, {2, 12}}, {{8, 6}, {2, 9}, {8, 12}}};
    g["l"] = {{{5, 2}, {5, 12}}};
    g["m"] = {{{2, 12}, {2, 6}}, {{2, 7}, {4, 6}, {6, 7}, {6, 12}},
              {{6, 7}, {8, 6}, {10, 7}, {10, 12}}};
    g["n"] = {{{2, 12}, {2, 6}}, {{2, 7}, {5, 6}, {8, 7}, {8, 12}}};
    g["o"] = {{{4, 6}, {2, 8}, {2, 10}, {4, 12}, {7, 12}, {9, 10}, {9, 8}, {7, 6}, {4, 6}}};
    g["p"] = {{{2, 6}, {2, 16}}, {{2, 6}, {6, 6}, {8, 8}, {8, 10}, {6, 12}, {2, 12}}};
    g["q"] = {{{9, 6}, {9, 16}}, {{9, 6}, {4, 6}, {2, 8}, {2, 10}, {4, 12}, {9, 12}}};
    g["r"] = {{{2, 6}, {2, 12}}, {{2, 8}, {4, 6}, {7, 6}, {9, 7}}};
    g["s"] = {{{9, 7}, {7, 6}, {4, 6}, {2, 7}, {2, 8}, {4, 9}, {7, 9}, {9, 10}, {9, 11},
               {7, 12}, {4, 12}, {2, 11}}};
    g["t"] = {{{5, 2}, {5, 10}, {6, 12}, {8, 12}}, {{2, 6}, {8, 6}}};
    g["u"] = {{{2, 6}, {2, 10}, {4, 12}, {7, 12}, {9, 11}}, {{9, 6}, {9, 12}}};
    g["v"] = {{{2, 6}, {5, 12}, {8, 6}}};
    g["w"] = {{{1, 6}, {3, 12}, {5, 8}, {7, 12}, {9, 6}}};
    g["x"] = {{{2, 6}, {9, 12}}, {{9, 6}, {2, 12}}};
    g["y"] = {{{2, 6}, {5, 12}}, {{9, 6}, {2, 16}}};
    g["z"] = {{{2, 6}, {9, 6}, {2, 12}, {9, 12}}};

    g["0"] = {{{4, 3}, {2, 5}, {2, 10}, {4, 12}, {7, 12}, {9, 10}, {9, 5}, {7, 3}, {4, 3}}};
    g["1"] = {{{3, 5}, {5, 3}, {5, 12}}};
    g["2"] = {{{2, 5}, {4, 3}, {7, 3}, {9, 5}, {9, 6}, {2, 12}, {9, 12}}};
    g["3"] = {{{2, 4}, {4, 3}, {7, 3}, {9, 5}, {7, 7}, {9, 9}, {9, 10}, {7, 12}, {4, 12},
               {2, 11}},
              {{5, 7}, {7, 7}}};
    g["4"] = {{{7, 12}, {7, 3}, {2, 9}, {9, 9}}};
    g["5"] = {{{9, 3}, {2, 3}, {2, 7}, {6, 7}, {9, 9}, {9, 10}, {7, 12}, {3, 12}, {2, 11}}};
    g["6"] = {{{8, 3}, {4, 3}, {2, 6}, {2, 10}, {4, 12}, {7, 12}, {9, 10}, {9, 9}, {7, 7},
               {2, 8}}};
    g["7"] = {{{2, 3}, {9, 3}, {4, 12}}};
    g["8"] = {{{4, 3}, {2, 5}, {4, 7}, {7, 7}, {9, 5}, {7, 3}, {4, 3}},
              {{4, 7}, {2, 9}, {2, 10}, {4, 12}, {7, 12}, {9, 10}, {9, 9}, {7, 7}}};
    g["9"] = {{{9, 8}, {4, 8}, {2, 6}, {2, 5}, {4, 3}, {7, 3}, {9, 5}, {9, 9}, {7, 12},
               {3, 12}}};

    g["+"] = {{{5, 5}, {5, 11}}, {{2, 8}, {8, 8}}};
    g["-"] = {{{2, 8}, {8, 8}}};
    g["="] = {{{2, 6}, {8, 6}}, {{2, 10}, {8, 10}}};
    g["("] = {{{7, 2}, {5, 5}, {5, 11}, {7, 14}}};
    g[")"] = {{{3, 2}, {5, 5}, {5, 11}, {3, 14}}};

    std::map<std::string, std::vector<Stroke>> out;
    for (auto& [tok, polys] : g) out[tok] = make_strokes(polys);
    return out;
  }();
  return table;
}

struct Pen {
  std::vector<PlacedGlyph>* out;
};

// Recursive-descent layout over the token stream. Scale multiplies design
// coordinates; (x, baseline) is the pen position in absolute design space.
struct LayoutCtx {
  const std::vector<std::string>& toks;
  size_t pos = 0;
  std::vector<PlacedGlyph> placed;

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError("label structure: " + msg);
  }

  bool done() const { return pos >= toks.size(); }
  const std::string& peek() const { return toks[pos]; }

  std::string next() {
    if (done()) fail("unexpected end of token sequence");
    return toks[pos++];
  }

  void expect(const std::string& t) {
    if (done() || toks[pos] != t) fail("expected '" + t + "'");
    ++pos;
  }
};

struct LaidBox {
  double width = 0.0;         // horizontal advance consumed
  Box ink{0, 0, 0, 0};        // absolute ink bounds (meaningless if empty)
  bool has_ink = false;
  std::vector<PlacedGlyph> glyphs;

  void merge(const LaidBox& o) {
    glyphs.insert(glyphs.end(), o.glyphs.begin(), o.glyphs.end());
    if (o.has_ink) {
      if (!has_ink) {
        ink = o.ink;
        has_ink = true;
      } else {
        ink.x0 = std::min(ink.x0, o.ink.x0);
        ink.y0 = std::min(ink.y0, o.ink.y0);
        ink.x1 = std::max(ink.x1, o.ink.x1);
        ink.y1 = std::max(ink.y1, o.ink.y1);
      }
    }
  }
};

std::vector<Stroke> transform(const std::vector<Stroke>& in, double scale, double dx, double dy) {
  std::vector<Stroke> out = in;
  for (Stroke& s : out)
    for (Point& p : s.points) {
      p.x = p.x * scale + dx;
      p.y = p.y * scale + dy;
    }
  return out;
}

LaidBox lay_symbol(const std::string& tok, double x, double baseline, double scale) {
  if (!has_glyph(tok)) throw TokenError("no glyph for token: '" + tok + "'");
  LaidBox box;
  PlacedGlyph pg;
  pg.token = tok;
  // Design baseline sits at y=12; shift so it lands on `baseline`.
  pg.strokes = transform(glyph_strokes(tok), scale, x, baseline - kBaseline * scale);
  Box b = strokes_bounds(pg.strokes);
  box.glyphs.push_back(std::move(pg));
  box.ink = b;
  box.has_ink = true;
  box.width = kAdvance * scale;
  return box;
}

LaidBox lay_sequence(LayoutCtx& ctx, double x, double baseline, double scale, bool in_group);

// One brace-delimited group (or a single token treated as a group of one).
LaidBox lay_group(LayoutCtx& ctx, double x, double baseline, double scale) {
  if (ctx.done()) ctx.fail("missing group");
  if (ctx.peek() == "{") {
    ctx.next();
    LaidBox b = lay_sequence(ctx, x, baseline, scale, true);
    ctx.expect("}");
    return b;
  }
  std::string tok = ctx.next();
  if (tok == "\\frac" || tok == "\\sqrt" || tok == "^" || tok == "_" || tok == "}")
    ctx.fail("token '" + tok + "' cannot stand alone as a group");
  return lay_symbol(tok, x, baseline, scale);
}

LaidBox lay_frac(LayoutCtx& ctx, double x, double baseline, double scale) {
  double rule_y = baseline - 4.0 * scale;  // math axis
  double gap = 1.5 * scale;

  // Measure both halves at origin, then center them over the rule.
  LayoutCtx probe{ctx.toks, ctx.pos, {}};
  LaidBox num0 = lay_group(probe, 0, 0, scale);
  LaidBox den0 = lay_group(probe, 0, 0, scale);

  double num_w = num0.width, den_w = den0.width;
  double rule_w = std::max(num_w, den_w) + 4.0 * scale;
  double num_x = x + (rule_w - num_w) / 2.0;
  double den_x = x + (rule_w - den_w) / 2.0;
  // Rest numerator so its ink bottom sits gap above the rule, denominator so
  // its ink top sits gap below; empty halves keep the plain baseline.
  double num_base = 0, den_base = 0;
  if (num0.has_ink) num_base = rule_y - gap - num0.ink.y1;
  if (den0.has_ink) den_base = rule_y + gap - den0.ink.y0;

  LaidBox out;
  LaidBox num = lay_group(ctx, num_x, num_base, scale);
  LaidBox den = lay_group(ctx, den_x, den_base, scale);
  out.merge(num);
  out.merge(den);

  PlacedGlyph rule;
  rule.token = "\\frac";
  rule.strokes = {Stroke{{{x, rule_y}, {x + rule_w, rule_y}}}};
  LaidBox rb;
  rb.glyphs.push_back(std::move(rule));
  rb.ink = {x, rule_y, x + rule_w, rule_y};
  rb.has_ink = true;
  out.merge(rb);
  out.width = rule_w + 2.0 * scale;
  return out;
}

LaidBox lay_sqrt(LayoutCtx& ctx, double x, double baseline, double scale) {
  double hook_w = 5.0 * scale;
  LaidBox body = lay_group(ctx, x + hook_w, baseline, scale);
  double top = (body.has_ink ? body.ink.y0 : baseline - 10.0 * scale) - 2.0 * scale;
  double bottom = body.has_ink ? body.ink.y1 : baseline;
  double right = (body.has_ink ? body.ink.x1 : x + hook_w) + 1.0 * scale;

  PlacedGlyph rad;
  rad.token = "\\sqrt";
  rad.strokes = {Stroke{{{x, bottom - 4.0 * scale},
                         {x + 2.0 * scale, bottom},
                         {x + hook_w - 1.0 * scale, top},
                         {right, top}}}};
  LaidBox out;
  out.merge(body);
  LaidBox rb;
  rb.ink = strokes_bounds(rad.strokes);
  rb.has_ink = true;
  rb.glyphs.push_back(std::move(rad));
  out.merge(rb);
  out.width = (right - x) + 2.0 * scale;
  return out;
}

LaidBox lay_sequence(LayoutCtx& ctx, double x, double baseline, double scale, bool in_group) {
  LaidBox out;
  double pen = x;
  LaidBox last_item;  // scripts attach to this
  bool have_item = false;

  auto flush = [&] {
    if (have_item) {
      out.merge(last_item);
      pen += last_item.width;
      last_item = LaidBox{};
      have_item = false;
    }
  };

  while (!ctx.done()) {
    const std::string& tok = ctx.peek();
    if (tok == "}") {
      if (!in_group) ctx.fail("unmatched '}'");
      break;
    }
    if (tok == "^" || tok == "_") {
      if (!have_item) ctx.fail("script '" + tok + "' with nothing to attach to");
      bool sup = tok == "^";
      ctx.next();
      double script_scale = scale * kScriptScale;
      double shift = kScriptShift * scale;
      double script_base = sup ? baseline - shift : baseline + shift;
      LaidBox script = lay_group(ctx, pen + last_item.width, script_base, script_scale);
      last_item.width += script.width;
      last_item.merge(script);
      continue;
    }
    if (tok == "\\frac") {
      flush();
      ctx.next();
      last_item = lay_frac(ctx, pen, baseline, scale);
      have_item = true;
      continue;
    }
    if (tok == "\\sqrt") {
      flush();
      ctx.next();
      last_item = lay_sqrt(ctx, pen, baseline, scale);
      have_item = true;
      continue;
    }
    if (tok == "{") {
      flush();
      ctx.next();
      last_item = lay_sequence(ctx, pen, baseline, scale, true);
      ctx.expect("}");
      have_item = true;
      continue;
    }
    flush();
    last_item = lay_symbol(ctx.next(), pen, baseline, scale);
    have_item = true;
  }
  flush();
  out.width = pen - x;
  return out;
}

}  // namespace

bool has_glyph(const std::string& token) { return atlas().count(token) > 0; }

const std::vector<Stroke>& glyph_strokes(const std::string& token) {
  auto it = atlas().find(token);
  if (it == atlas().end()) throw TokenError("no glyph for token: '" + token + "'");
  return it->second;
}

std::vector<std::string> atlas_tokens() {
  std::vector<std::string> out;
  for (const auto& [tok, _] : atlas()) out.push_back(tok);
  return out;
}

Box strokes_bounds(const std::vector<Stroke>& strokes) {
  Box b{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
        -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const Stroke& s : strokes)
    for (const Point& p : s.points) {
      b.x0 = std::min(b.x0, p.x);
      b.y0 = std::min(b.y0, p.y);
      b.x1 = std::max(b.x1, p.x);
      b.y1 = std::max(b.y1, p.y);
    }
  return b;
}

std::vector<PlacedGlyph> layout_tokens(const std::vector<std::string>& tokens) {
  if (tokens.empty()) throw ContractError("cannot lay out an empty token sequence");
  LayoutCtx ctx{tokens, 0, {}};
  LaidBox box = lay_sequence(ctx, 0.0, 0.0, 1.0, false);
  if (!ctx.done()) ctx.fail("trailing tokens after layout");
  if (box.glyphs.empty()) throw ContractError("token sequence places no glyphs");
  return box.glyphs;
}

std::vector<Stroke> flatten_glyphs(const std::vector<PlacedGlyph>& glyphs) {
  std::vector<Stroke> out;
  for (const PlacedGlyph& g : glyphs)
    out.insert(out.end(), g.strokes.begin(), g.strokes.end());
  return out;
}

Image render_printed(const std::vector<std::string>& tokens, int target_h, int target_w) {
  return rasterize(flatten_glyphs(layout_tokens(tokens)), target_h, target_w, 1);
}

Image render_printed(const std::string& label, int target_h, int target_w) {
  return render_printed(split_tokens(label), target_h, target_w);
}

}  // namespace palx
