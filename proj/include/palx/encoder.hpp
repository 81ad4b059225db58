#pragma once

#include <string>
#include <utility>
#include <vector>

#include "palx/checkpoint.hpp"
#include "palx/image.hpp"
#include "palx/random.hpp"
#include "palx/tensor.hpp"

namespace palx {

struct EncoderConfig {
  int in_h = 64;
  int in_w = 256;
  int stem_channels = 16;
  int num_blocks = 3;   // one stem downsample + (num_blocks-1) transitions
  int block_layers = 4; // dense layers per block
  int growth = 12;      // channels contributed by each dense layer
  int d_model = 64;     // projection width, shared with the decoder
};

// Encoder output: projected features plus a content-independent positional
// encoding, both flattened row-major over grid cells.
struct FeatureGrid {
  Tensor features;  // [(gh*gw) x d_model]
  Tensor pos;       // [(gh*gw) x d_model]
  int gh = 0;
  int gw = 0;
};

// One densely connected unit: concat -> BN -> ReLU -> 3x3 conv (growth out).
struct DenseUnit {
  Tensor gamma, beta;
  BatchNormState bn;
  Tensor w;
};

// Concatenates the running feature list along channels and applies the unit.
Tensor dense_layer(const std::vector<Tensor>& inputs, DenseUnit& unit, bool training);

// Builds a fresh unit whose conv consumes c_in channels.
DenseUnit make_dense_unit(int c_in, int growth, Rng& rng);

class Encoder {
 public:
  Encoder(const EncoderConfig& cfg, Rng& rng);

  // x: [N,1,H,W] pixels in [0,1]. Returns [N, d_model, gh, gw].
  Tensor forward(const Tensor& x, bool training);

  FeatureGrid encode(const Image& im, bool training = false);

  const EncoderConfig& config() const { return cfg_; }
  int grid_h() const { return gh_; }
  int grid_w() const { return gw_; }

  std::vector<std::pair<std::string, Tensor>> named_params();       // trainable
  void save_state(NamedTensors& out, const std::string& prefix) const;
  void load_state(const NamedTensors& in, const std::string& prefix);

 private:
  struct Transition {
    Tensor w;  // 1x1 conv halving channels
  };

  EncoderConfig cfg_;
  int gh_ = 0, gw_ = 0;
  Tensor stem_w_;
  std::vector<std::vector<DenseUnit>> blocks_;
  std::vector<Transition> transitions_;
  Tensor proj_w_, proj_b_;
  Tensor pos_;  // [(gh*gw) x d_model], fixed at construction

  template <typename Fn>
  void visit_params(Fn&& fn);  // fn(name, Tensor&, trainable)
};

}  // namespace palx
