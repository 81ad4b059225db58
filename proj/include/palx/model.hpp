#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "palx/decoder.hpp"
#include "palx/discriminator.hpp"
#include "palx/encoder.hpp"
#include "palx/vocab.hpp"

namespace palx {

struct ModelConfig {
  EncoderConfig encoder;
  DecoderConfig decoder;  // decoder.vocab is set from the vocabulary
};

// The deployed recognizer: encoder + decoder sharing d_model.
struct Model {
  ModelConfig cfg;
  Encoder encoder;
  Decoder decoder;

  Model(const ModelConfig& c, Rng& rng);

  std::vector<std::pair<std::string, Tensor>> named_params();
  void save_state(NamedTensors& out, const std::string& prefix) const;
  void load_state(const NamedTensors& in, const std::string& prefix);
};

// Teacher forcing: wrapped = BOS + tokens + EOS; inputs drop the EOS,
// targets drop the BOS.
struct TeacherBatch {
  std::vector<int> inputs;
  std::vector<int> targets;
};
TeacherBatch teacher_forcing(const std::vector<int>& wrapped_ids);

// Self-describing checkpoint: model sizes, vocabulary, recognizer state and
// (optionally) discriminator state in one file.
void save_model(const std::string& path, const Model& model, const Vocabulary& vocab,
                const Discriminator* disc = nullptr);

struct LoadedModel {
  ModelConfig cfg;
  Vocabulary vocab;
  std::unique_ptr<Model> model;
  std::unique_ptr<Discriminator> disc;  // null when absent from the file
};
LoadedModel load_model(const std::string& path);

}  // namespace palx
