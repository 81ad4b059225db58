#pragma once

#include <string>
#include <vector>

#include "palx/errors.hpp"

namespace palx {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct Stroke {
  std::vector<Point> points;
};

struct ExpressionRecord {
  std::vector<Stroke> strokes;
  std::string label;
  std::string id;
};

// Minimal InkML reader: one Stroke per <trace> in file order, label from the
// first <annotation type="truth"> element, id from <annotation type="UI"> if
// present. Malformed XML raises ParseError with a line number; a file without
// traces or without a truth annotation raises SchemaError.
ExpressionRecord parse_inkml(const std::string& xml_text);

ExpressionRecord load_inkml(const std::string& path);

}  // namespace palx
