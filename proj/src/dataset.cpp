#include "palx/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "palx/glyphs.hpp"
#include "palx/raster.hpp"

namespace fs = std::filesystem;

namespace palx {

std::vector<int> wrap_ids(const Vocabulary& vocab, const std::vector<std::string>& tokens) {
  std::vector<int> ids;
  ids.reserve(tokens.size() + 2);
  ids.push_back(Vocabulary::kBos);
  for (const std::string& t : tokens) ids.push_back(vocab.id(t));
  ids.push_back(Vocabulary::kEos);
  return ids;
}

std::vector<PairedSample> make_pairs(const std::vector<ExpressionRecord>& records,
                                     const Vocabulary& vocab, int target_h, int target_w,
                                     int pen_width) {
  std::vector<PairedSample> out;
  out.reserve(records.size());
  for (const ExpressionRecord& rec : records) {
    try {
      std::vector<std::string> tokens = split_tokens(rec.label);
      PairedSample ps;
      ps.handwritten = rasterize(rec.strokes, target_h, target_w, pen_width);
      ps.printed = render_printed(tokens, target_h, target_w);
      ps.ids = wrap_ids(vocab, tokens);
      ps.label = rec.label;
      ps.id = rec.id;
      out.push_back(std::move(ps));
    } catch (const Error& e) {
      throw DataError("record '" + rec.id + "': " + e.what());
    }
  }
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out.push_back('"');
  return out;
}

namespace {

struct ManifestRow {
  std::string id, label, split;
};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::vector<ManifestRow> read_manifest(const std::string& dir) {
  std::string path = dir + "/manifest.csv";
  std::ifstream f(path);
  if (!f) throw DataError("cannot open dataset manifest: " + path);
  std::string line;
  if (!std::getline(f, line)) throw DataError(path + ": empty manifest");
  // Tolerate a trailing \r from foreign line endings.
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "id,label,split")
    throw SchemaError(path + ": expected header 'id,label,split', got '" + line + "'");
  std::vector<ManifestRow> rows;
  int lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != 3)
      throw SchemaError(path + ": line " + std::to_string(lineno) + ": expected 3 fields, got " +
                        std::to_string(fields.size()));
    if (fields[2] != "train" && fields[2] != "val")
      throw SchemaError(path + ": line " + std::to_string(lineno) + ": unknown split '" +
                        fields[2] + "'");
    rows.push_back({fields[0], fields[1], fields[2]});
  }
  if (rows.empty()) throw DataError(path + ": manifest lists no samples");
  return rows;
}

}  // namespace

void write_dataset(const std::string& dir, const std::vector<PairedSample>& samples,
                   size_t train_count) {
  if (samples.empty()) throw ContractError("write_dataset: no samples");
  if (train_count > samples.size())
    throw ContractError("write_dataset: train count exceeds sample count");
  fs::create_directories(dir);
  std::ofstream manifest(dir + "/manifest.csv", std::ios::binary | std::ios::trunc);
  if (!manifest) throw DataError("cannot write dataset manifest in " + dir);
  manifest << "id,label,split\n";
  for (size_t i = 0; i < samples.size(); ++i) {
    const PairedSample& ps = samples[i];
    write_pgm(dir + "/" + ps.id + "_h.pgm", ps.handwritten);
    write_pgm(dir + "/" + ps.id + "_p.pgm", ps.printed);
    manifest << csv_field(ps.id) << ',' << csv_field(ps.label) << ','
             << (i < train_count ? "train" : "val") << '\n';
  }
  if (!manifest) throw DataError("short write to dataset manifest in " + dir);
}

std::vector<std::string> read_manifest_labels(const std::string& dir) {
  std::vector<std::string> labels;
  for (const ManifestRow& row : read_manifest(dir)) labels.push_back(row.label);
  return labels;
}

std::vector<std::string> Dataset::labels() const {
  std::vector<std::string> out;
  for (const PairedSample& s : train) out.push_back(s.label);
  for (const PairedSample& s : val) out.push_back(s.label);
  return out;
}

Dataset load_dataset(const std::string& dir, const Vocabulary& vocab) {
  Dataset ds;
  for (const ManifestRow& row : read_manifest(dir)) {
    PairedSample ps;
    ps.id = row.id;
    ps.label = row.label;
    ps.handwritten = read_pgm(dir + "/" + row.id + "_h.pgm");
    ps.printed = read_pgm(dir + "/" + row.id + "_p.pgm");
    try {
      ps.ids = wrap_ids(vocab, split_tokens(row.label));
    } catch (const Error& e) {
      throw DataError("record '" + row.id + "': " + e.what());
    }
    (row.split == "train" ? ds.train : ds.val).push_back(std::move(ps));
  }
  return ds;
}

}  // namespace palx
