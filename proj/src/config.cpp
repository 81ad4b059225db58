#include "palx/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "palx/errors.hpp"

namespace palx {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

long long to_int(const std::string& key, const std::string& v) {
  char* end = nullptr;
  long long x = std::strtoll(v.c_str(), &end, 10);
  if (v.empty() || end != v.c_str() + v.size())
    throw ConfigError("config key '" + key + "' needs an integer, got '" + v + "'");
  return x;
}

double to_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  double x = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size())
    throw ConfigError("config key '" + key + "' needs a number, got '" + v + "'");
  return x;
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + " is not key=value: '" +
                        line + "'");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + " has no key");

    if (key == "in_h") cfg.model.encoder.in_h = static_cast<int>(to_int(key, val));
    else if (key == "in_w") cfg.model.encoder.in_w = static_cast<int>(to_int(key, val));
    else if (key == "stem_channels")
      cfg.model.encoder.stem_channels = static_cast<int>(to_int(key, val));
    else if (key == "num_blocks")
      cfg.model.encoder.num_blocks = static_cast<int>(to_int(key, val));
    else if (key == "block_layers")
      cfg.model.encoder.block_layers = static_cast<int>(to_int(key, val));
    else if (key == "growth") cfg.model.encoder.growth = static_cast<int>(to_int(key, val));
    else if (key == "d_model") {
      cfg.model.encoder.d_model = static_cast<int>(to_int(key, val));
      cfg.model.decoder.d_model = cfg.model.encoder.d_model;
      cfg.disc.in_dim = cfg.model.encoder.d_model;
    } else if (key == "num_layers")
      cfg.model.decoder.num_layers = static_cast<int>(to_int(key, val));
    else if (key == "num_heads")
      cfg.model.decoder.num_heads = static_cast<int>(to_int(key, val));
    else if (key == "d_ff") cfg.model.decoder.d_ff = static_cast<int>(to_int(key, val));
    else if (key == "dropout") cfg.model.decoder.dropout = to_double(key, val);
    else if (key == "disc_hidden") cfg.disc.hidden = static_cast<int>(to_int(key, val));
    else if (key == "disc_layers") cfg.disc.layers = static_cast<int>(to_int(key, val));
    else if (key == "delta") cfg.train.delta = to_double(key, val);
    else if (key == "batch") cfg.train.batch = static_cast<int>(to_int(key, val));
    else if (key == "disc_steps") cfg.train.disc_steps = static_cast<int>(to_int(key, val));
    else if (key == "epochs") cfg.train.epochs = static_cast<int>(to_int(key, val));
    else if (key == "max_iters") cfg.train.max_iters = to_int(key, val);
    else if (key == "lr_r") cfg.train.lr_r = to_double(key, val);
    else if (key == "lr_d") cfg.train.lr_d = to_double(key, val);
    else if (key == "seed") cfg.train.seed = static_cast<uint64_t>(to_int(key, val));
    else if (key == "patience") cfg.train.patience = static_cast<int>(to_int(key, val));
    else if (key == "val_max_len")
      cfg.train.val_max_len = static_cast<int>(to_int(key, val));
    else if (key == "log_every") cfg.train.log_every = static_cast<int>(to_int(key, val));
    else if (key == "synth_count") cfg.synth.count = static_cast<int>(to_int(key, val));
    else if (key == "synth_val_count")
      cfg.synth.val_count = static_cast<int>(to_int(key, val));
    else if (key == "synth_depth") cfg.synth.depth = static_cast<int>(to_int(key, val));
    else if (key == "synth_seed") cfg.synth.seed = static_cast<uint64_t>(to_int(key, val));
    else
      throw ConfigError("unknown config key '" + key + "' on line " + std::to_string(line_no));
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

}  // namespace palx
