#include "palx/image.hpp"

#include <cmath>
#include <fstream>

namespace palx {

Image::Image(int height, int width, double fill) : h(height), w(width) {
  if (height <= 0 || width <= 0)
    throw ContractError("image dimensions must be positive, got " + std::to_string(height) +
                        "x" + std::to_string(width));
  pix.assign(static_cast<size_t>(height) * width, fill);
}

void write_pgm(const std::string& path, const Image& img) {
  if (img.h <= 0 || img.w <= 0) throw ContractError("cannot write empty image: " + path);
  std::string out = "P5\n" + std::to_string(img.w) + " " + std::to_string(img.h) + "\n255\n";
  out.reserve(out.size() + img.pix.size());
  for (double v : img.pix) {
    if (v < 0.0 || v > 1.0 || !std::isfinite(v))
      throw ContractError("pixel value " + std::to_string(v) + " outside [0,1] writing " + path);
    out.push_back(static_cast<char>(static_cast<int>(std::lround(255.0 * v))));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open image for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw DataError("short write to image: " + path);
}

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string pgm_token(std::istream& in, const std::string& path) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  if (tok.empty()) throw ParseError(path + ": truncated PGM header");
  return tok;
}

int pgm_int(std::istream& in, const std::string& path) {
  std::string tok = pgm_token(in, path);
  try {
    size_t used = 0;
    int v = std::stoi(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ParseError(path + ": bad PGM header token '" + tok + "'");
  }
}

}  // namespace

Image read_pgm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open image: " + path);
  if (pgm_token(f, path) != "P5") throw ParseError(path + ": not a binary PGM (P5) file");
  int w = pgm_int(f, path);
  int h = pgm_int(f, path);
  int maxval = pgm_int(f, path);
  if (w <= 0 || h <= 0 || maxval != 255)
    throw ParseError(path + ": unsupported PGM geometry " + std::to_string(w) + "x" +
                     std::to_string(h) + " maxval " + std::to_string(maxval));
  // Exactly one whitespace byte separates the header from pixel data; the
  // token reader has already consumed it.
  Image img(h, w);
  std::vector<char> raw(static_cast<size_t>(h) * w);
  f.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (f.gcount() != static_cast<std::streamsize>(raw.size()))
    throw ParseError(path + ": truncated PGM pixel data");
  for (size_t i = 0; i < raw.size(); ++i)
    img.pix[i] = static_cast<double>(static_cast<unsigned char>(raw[i])) / 255.0;
  return img;
}

}  // namespace palx
