#include "palx/model.hpp"

#include <cstdio>

#include "palx/errors.hpp"

namespace palx {

namespace {

Tensor scalar_record(double v) { return Tensor(Shape{1}, std::vector<double>{v}); }

int int_record(const NamedTensors& nt, const std::string& name) {
  const Tensor& t = nt.at(name);
  if (t.size() != 1) throw SchemaError("checkpoint field '" + name + "' is not a scalar");
  return static_cast<int>(t.data()[0]);
}

}  // namespace

Model::Model(const ModelConfig& c, Rng& rng)
    : cfg(c), encoder(c.encoder, rng), decoder(c.decoder, rng) {
  if (c.encoder.d_model != c.decoder.d_model)
    throw ConfigError("encoder and decoder d_model disagree: " +
                      std::to_string(c.encoder.d_model) + " vs " +
                      std::to_string(c.decoder.d_model));
}

std::vector<std::pair<std::string, Tensor>> Model::named_params() {
  std::vector<std::pair<std::string, Tensor>> out;
  for (auto& [name, t] : encoder.named_params()) out.emplace_back("enc/" + name, t);
  for (auto& [name, t] : decoder.named_params()) out.emplace_back("dec/" + name, t);
  return out;
}

void Model::save_state(NamedTensors& out, const std::string& prefix) const {
  encoder.save_state(out, prefix + "enc/");
  decoder.save_state(out, prefix + "dec/");
}

void Model::load_state(const NamedTensors& in, const std::string& prefix) {
  encoder.load_state(in, prefix + "enc/");
  decoder.load_state(in, prefix + "dec/");
}

TeacherBatch teacher_forcing(const std::vector<int>& wrapped_ids) {
  if (wrapped_ids.size() < 2 || wrapped_ids.front() != Vocabulary::kBos ||
      wrapped_ids.back() != Vocabulary::kEos)
    throw ContractError("teacher forcing needs a BOS ... EOS sequence");
  TeacherBatch tb;
  tb.inputs.assign(wrapped_ids.begin(), wrapped_ids.end() - 1);
  tb.targets.assign(wrapped_ids.begin() + 1, wrapped_ids.end());
  return tb;
}

void save_model(const std::string& path, const Model& model, const Vocabulary& vocab,
                const Discriminator* disc) {
  if (model.cfg.decoder.vocab != vocab.size())
    throw ContractError("decoder vocab size does not match the vocabulary");
  NamedTensors nt;
  const EncoderConfig& e = model.cfg.encoder;
  const DecoderConfig& d = model.cfg.decoder;
  nt.put("cfg/enc/in_h", scalar_record(e.in_h));
  nt.put("cfg/enc/in_w", scalar_record(e.in_w));
  nt.put("cfg/enc/stem_channels", scalar_record(e.stem_channels));
  nt.put("cfg/enc/num_blocks", scalar_record(e.num_blocks));
  nt.put("cfg/enc/block_layers", scalar_record(e.block_layers));
  nt.put("cfg/enc/growth", scalar_record(e.growth));
  nt.put("cfg/dec/d_model", scalar_record(d.d_model));
  nt.put("cfg/dec/num_layers", scalar_record(d.num_layers));
  nt.put("cfg/dec/num_heads", scalar_record(d.num_heads));
  nt.put("cfg/dec/d_ff", scalar_record(d.d_ff));
  nt.put("cfg/dec/dropout", scalar_record(d.dropout));
  std::vector<std::string> tokens = vocab.ordered_tokens();
  nt.put("vocab/count", scalar_record(static_cast<double>(tokens.size())));
  for (size_t i = 0; i < tokens.size(); ++i) {
    char key[32];
    std::snprintf(key, sizeof(key), "vocab/%05zu/", i);
    nt.put(key + tokens[i], scalar_record(static_cast<double>(i)));
  }
  if (disc) {
    const DiscriminatorConfig& dc = disc->config();
    nt.put("cfg/disc/hidden", scalar_record(dc.hidden));
    nt.put("cfg/disc/layers", scalar_record(dc.layers));
  }
  model.save_state(nt, "R/");
  if (disc) disc->save_state(nt, "D/");
  save_checkpoint(path, nt);
}

LoadedModel load_model(const std::string& path) {
  NamedTensors nt = load_checkpoint(path);
  LoadedModel lm;
  EncoderConfig& e = lm.cfg.encoder;
  DecoderConfig& d = lm.cfg.decoder;
  e.in_h = int_record(nt, "cfg/enc/in_h");
  e.in_w = int_record(nt, "cfg/enc/in_w");
  e.stem_channels = int_record(nt, "cfg/enc/stem_channels");
  e.num_blocks = int_record(nt, "cfg/enc/num_blocks");
  e.block_layers = int_record(nt, "cfg/enc/block_layers");
  e.growth = int_record(nt, "cfg/enc/growth");
  d.d_model = int_record(nt, "cfg/dec/d_model");
  e.d_model = d.d_model;
  d.num_layers = int_record(nt, "cfg/dec/num_layers");
  d.num_heads = int_record(nt, "cfg/dec/num_heads");
  d.d_ff = int_record(nt, "cfg/dec/d_ff");
  d.dropout = nt.at("cfg/dec/dropout").data()[0];

  size_t count = static_cast<size_t>(int_record(nt, "vocab/count"));
  std::vector<std::string> tokens(count);
  size_t found = 0;
  for (const auto& [name, t] : nt.items()) {
    if (name.rfind("vocab/count", 0) == 0 || name.rfind("vocab/", 0) != 0) continue;
    size_t slash = name.find('/', 6);
    if (slash == std::string::npos || slash + 1 >= name.size())
      throw SchemaError("malformed vocabulary record '" + name + "'");
    size_t idx = static_cast<size_t>(std::stoul(name.substr(6, slash - 6)));
    if (idx >= count) throw SchemaError("vocabulary index out of range in '" + name + "'");
    tokens[idx] = name.substr(slash + 1);
    ++found;
  }
  if (found != count) throw SchemaError("checkpoint vocabulary is incomplete");
  lm.vocab = Vocabulary::from_tokens(tokens);
  d.vocab = lm.vocab.size();

  Rng rng(0);  // shapes only; every value is overwritten by load_state
  lm.model = std::make_unique<Model>(lm.cfg, rng);
  lm.model->load_state(nt, "R/");
  if (nt.contains("cfg/disc/hidden")) {
    DiscriminatorConfig dc;
    dc.in_dim = d.d_model;
    dc.hidden = int_record(nt, "cfg/disc/hidden");
    dc.layers = int_record(nt, "cfg/disc/layers");
    lm.disc = std::make_unique<Discriminator>(dc, rng);
    lm.disc->load_state(nt, "D/");
  }
  return lm;
}

}  // namespace palx
