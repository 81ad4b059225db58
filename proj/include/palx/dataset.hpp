#pragma once

#include <string>
#include <vector>

#include "palx/image.hpp"
#include "palx/inkml.hpp"
#include "palx/vocab.hpp"

namespace palx {

// One training pair: the same expression in both domains plus its token ids
// wrapped in BOS/EOS.
struct PairedSample {
  Image handwritten;
  Image printed;
  std::vector<int> ids;  // BOS, tokens..., EOS
  std::string label;
  std::string id;
};

std::vector<int> wrap_ids(const Vocabulary& vocab, const std::vector<std::string>& tokens);

// Pairs up parsed ink records: handwritten = rasterized strokes, printed =
// glyph rendering of the label. Errors carry the offending record id.
std::vector<PairedSample> make_pairs(const std::vector<ExpressionRecord>& records,
                                     const Vocabulary& vocab, int target_h, int target_w,
                                     int pen_width = 2);

// On-disk layout: <id>_h.pgm, <id>_p.pgm and manifest.csv (id,label,split).
void write_dataset(const std::string& dir, const std::vector<PairedSample>& samples,
                   size_t train_count);

struct Dataset {
  std::vector<PairedSample> train;
  std::vector<PairedSample> val;
  std::vector<std::string> labels() const;
};

Dataset load_dataset(const std::string& dir, const Vocabulary& vocab);
// Reads just the manifest labels (used to build the vocabulary first).
std::vector<std::string> read_manifest_labels(const std::string& dir);

// Quotes a value for CSV output when it contains commas, quotes or newlines.
std::string csv_field(const std::string& s);

}  // namespace palx
