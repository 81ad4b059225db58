#include "palx/inkml.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <utility>

namespace palx {

namespace {

// Hand-rolled scanner for the XML subset InkML actually uses: elements,
// attributes, character data, comments, processing instructions, CDATA-free.
struct XmlScanner {
  const std::string& text;
  size_t pos = 0;
  int line = 1;

  explicit XmlScanner(const std::string& t) : text(t) {}

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError("line " + std::to_string(line) + ": " + msg);
  }

  bool eof() const { return pos >= text.size(); }

  char peek() const { return text[pos]; }

  char get() {
    char c = text[pos++];
    if (c == '\n') ++line;
    return c;
  }

  void skip_ws() {
    while (!eof() && std::isspace(static_cast<unsigned char>(peek()))) get();
  }

  bool starts_with(const char* s) const { return text.compare(pos, strlen(s), s) == 0; }

  void expect(char c) {
    if (eof() || peek() != c) fail(std::string("expected '") + c + "'");
    get();
  }

  std::string name() {
    std::string out;
    while (!eof()) {
      char c = peek();
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == ':' ||
          c == '.') {
        out.push_back(get());
      } else {
        break;
      }
    }
    if (out.empty()) fail("expected a name");
    return out;
  }

  void skip_until(const char* terminator) {
    size_t n = strlen(terminator);
    while (!eof()) {
      if (text.compare(pos, n, terminator) == 0) {
        for (size_t i = 0; i < n; ++i) get();
        return;
      }
      get();
    }
    fail(std::string("unterminated construct, missing '") + terminator + "'");
  }
};

std::string decode_entities(const std::string& s, XmlScanner& sc) {
  if (s.find('&') == std::string::npos) return s;
  std::string out;
  out.reserve(s.size());
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '&') {
      out.push_back(s[i]);
      continue;
    }
    size_t semi = s.find(';', i);
    if (semi == std::string::npos) sc.fail("unterminated entity reference");
    std::string ent = s.substr(i + 1, semi - i - 1);
    if (ent == "lt")
      out.push_back('<');
    else if (ent == "gt")
      out.push_back('>');
    else if (ent == "amp")
      out.push_back('&');
    else if (ent == "quot")
      out.push_back('"');
    else if (ent == "apos")
      out.push_back('\'');
    else
      sc.fail("unknown entity '&" + ent + ";'");
    i = semi;
  }
  return out;
}

struct Element {
  std::string name;
  std::vector<std::pair<std::string, std::string>> attrs;
  std::string text;  // direct character data

  std::string attr(const std::string& key) const {
    for (const auto& [k, v] : attrs)
      if (k == key) return v;
    return {};
  }
};

// Strips a namespace prefix: "ns:trace" -> "trace".
std::string local_name(const std::string& n) {
  size_t colon = n.rfind(':');
  return colon == std::string::npos ? n : n.substr(colon + 1);
}

std::vector<Point> parse_trace_points(const std::string& body, int line) {
  std::vector<Point> points;
  std::stringstream groups(body);
  std::string group;
  while (std::getline(groups, group, ',')) {
    const char* p = group.c_str();
    char* end = nullptr;
    double x = std::strtod(p, &end);
    if (end == p) {
      // Allow a trailing empty chunk from a terminal comma, otherwise fail.
      bool blank = group.find_first_not_of(" \t\r\n") == std::string::npos;
      if (blank) continue;
      throw ParseError("line " + std::to_string(line) + ": bad trace coordinate in '" + group + "'");
    }
    p = end;
    double y = std::strtod(p, &end);
    if (end == p)
      throw ParseError("line " + std::to_string(line) + ": trace point missing y coordinate in '" +
                       group + "'");
    if (!std::isfinite(x) || !std::isfinite(y))
      throw ParseError("line " + std::to_string(line) + ": non-finite trace coordinate");
    points.push_back({x, y});  // extra per-point fields (time, pressure) ignored
  }
  return points;
}

}  // namespace

ExpressionRecord parse_inkml(const std::string& xml_text) {
  XmlScanner sc(xml_text);
  ExpressionRecord rec;
  bool have_truth = false;

  // Stack of open elements; each collects its direct text.
  std::vector<Element> stack;
  std::vector<int> open_lines;

  auto handle_close = [&](Element& el, int line) {
    std::string n = local_name(el.name);
    if (n == "trace") {
      Stroke s;
      s.points = parse_trace_points(el.text, line);
      if (s.points.empty())
        throw SchemaError("line " + std::to_string(line) + ": trace element with no points");
      rec.strokes.push_back(std::move(s));
    } else if (n == "annotation") {
      std::string type = el.attr("type");
      std::string body = decode_entities(el.text, sc);
      // Trim surrounding whitespace; labels inside are kept verbatim.
      size_t a = body.find_first_not_of(" \t\r\n");
      size_t b = body.find_last_not_of(" \t\r\n");
      body = a == std::string::npos ? std::string() : body.substr(a, b - a + 1);
      if (type == "truth" && !have_truth) {
        rec.label = body;
        have_truth = true;
      } else if (type == "UI" && rec.id.empty()) {
        rec.id = body;
      }
    }
  };

  while (true) {
    sc.skip_ws();
    if (sc.eof()) break;
    if (sc.peek() != '<') {
      // Character data belongs to the innermost open element.
      std::string chunk;
      while (!sc.eof() && sc.peek() != '<') chunk.push_back(sc.get());
      if (!stack.empty()) stack.back().text += chunk;
      continue;
    }
    sc.get();  // '<'
    if (sc.eof()) sc.fail("dangling '<' at end of input");
    if (sc.peek() == '?') {
      sc.skip_until("?>");
      continue;
    }
    if (sc.starts_with("!--")) {
      sc.skip_until("-->");
      continue;
    }
    if (sc.peek() == '!') {  // DOCTYPE and friends
      sc.skip_until(">");
      continue;
    }
    if (sc.peek() == '/') {
      sc.get();
      int line = sc.line;
      std::string n = sc.name();
      sc.skip_ws();
      sc.expect('>');
      if (stack.empty()) sc.fail("close tag </" + n + "> with no open element");
      if (stack.back().name != n)
        sc.fail("mismatched close tag </" + n + ">, expected </" + stack.back().name + "> from line " +
                std::to_string(open_lines.back()));
      handle_close(stack.back(), line);
      stack.pop_back();
      open_lines.pop_back();
      continue;
    }
    int line = sc.line;
    Element el;
    el.name = sc.name();
    // attributes
    while (true) {
      sc.skip_ws();
      if (sc.eof()) sc.fail("unterminated start tag <" + el.name + ">");
      if (sc.peek() == '>') {
        sc.get();
        stack.push_back(std::move(el));
        open_lines.push_back(line);
        break;
      }
      if (sc.peek() == '/') {
        sc.get();
        sc.expect('>');
        handle_close(el, line);
        break;
      }
      std::string key = sc.name();
      sc.skip_ws();
      sc.expect('=');
      sc.skip_ws();
      if (sc.eof() || (sc.peek() != '"' && sc.peek() != '\''))
        sc.fail("attribute value for '" + key + "' must be quoted");
      char quote = sc.get();
      std::string val;
      while (!sc.eof() && sc.peek() != quote) val.push_back(sc.get());
      if (sc.eof()) sc.fail("unterminated attribute value for '" + key + "'");
      sc.get();
      el.attrs.emplace_back(key, decode_entities(val, sc));
    }
  }
  if (!stack.empty())
    throw ParseError("line " + std::to_string(open_lines.back()) + ": unclosed element <" +
                     stack.back().name + ">");

  if (rec.strokes.empty()) throw SchemaError("InkML file contains no trace elements");
  if (!have_truth) throw SchemaError("InkML file has no annotation with type=\"truth\"");
  return rec;
}

ExpressionRecord load_inkml(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open InkML file: " + path);
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  try {
    ExpressionRecord rec = parse_inkml(text);
    if (rec.id.empty()) {
      size_t slash = path.find_last_of("/\\");
      std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
      size_t dot = base.rfind('.');
      rec.id = dot == std::string::npos ? base : base.substr(0, dot);
    }
    return rec;
  } catch (const SchemaError& e) {
    throw SchemaError(path + ": " + e.what());
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace palx
