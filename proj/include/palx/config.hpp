#pragma once

#include <cstdint>
#include <string>

#include "palx/adversarial.hpp"
#include "palx/model.hpp"

namespace palx {

// In-memory corpus parameters for `train --synthetic`.
struct SynthSpec {
  int count = 300;
  int val_count = 60;
  int depth = 2;
  uint64_t seed = 7;
};

struct RunConfig {
  ModelConfig model;
  DiscriminatorConfig disc;
  TrainConfig train;
  SynthSpec synth;
};

// Flat key=value text, '#' comments; unknown keys are configuration errors.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

}  // namespace palx
