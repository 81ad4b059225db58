#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "palx/checkpoint.hpp"
#include "palx/encoder.hpp"
#include "palx/random.hpp"
#include "palx/tensor.hpp"

namespace palx {

struct DecoderConfig {
  int vocab = 0;  // required
  int d_model = 64;
  int num_layers = 2;
  int num_heads = 4;
  int d_ff = 256;
  double dropout = 0.1;
  // Probability of replacing a context token (not the first) with the pad id
  // during training, forcing predictions to lean on the image instead of
  // memorized token sequences.
  double word_dropout = 0.0;
};

// Row-major [L x L] boolean mask, 1 = attendable: mask[i][j] = (j <= i).
std::vector<uint8_t> causal_mask(int L);

// softmax(Q K^T / sqrt(d_k)) V with optional row-wise mask [L_q x L_k];
// masked positions receive exactly zero weight. weights_out, when given,
// receives the detached attention matrix.
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const std::vector<uint8_t>* mask = nullptr,
                            Tensor* weights_out = nullptr);

// Fused projections: heads are column slices of single d_model x d_model maps.
struct MultiHead {
  int heads = 1;
  Tensor wq, wk, wv, wo;
};

MultiHead make_multi_head(int d_model, int heads, Rng& rng);

Tensor multi_head_attention(const MultiHead& mh, const Tensor& q_in, const Tensor& k_in,
                            const Tensor& v_in, const std::vector<uint8_t>* mask = nullptr,
                            double drop_p = 0.0, Rng* rng = nullptr, bool training = false,
                            std::vector<Tensor>* weights_out = nullptr);

// Position-wise max(0, x W1 + b1) W2 + b2 with optional hidden dropout.
Tensor ffn(const Tensor& x, const Tensor& w1, const Tensor& b1, const Tensor& w2,
           const Tensor& b2, double drop_p = 0.0, Rng* rng = nullptr, bool training = false);

// Per-head attention matrices recorded during a forward pass, layer-major.
struct AttentionTrace {
  std::vector<Tensor> self_heads;   // num_layers * heads entries of [L x L]
  std::vector<Tensor> cross_heads;  // num_layers * heads entries of [L x T]
};

struct DecoderOut {
  Tensor logits;    // [L x V]
  Tensor features;  // [L x d_model], pre-classifier activations
};

class Decoder {
 public:
  Decoder(const DecoderConfig& cfg, Rng& rng);

  DecoderOut forward(const FeatureGrid& grid, const std::vector<int>& ids,
                     bool training = false, Rng* rng = nullptr,
                     AttentionTrace* trace = nullptr);

  const DecoderConfig& config() const { return cfg_; }
  std::vector<std::pair<std::string, Tensor>> named_params();
  void save_state(NamedTensors& out, const std::string& prefix) const;
  void load_state(const NamedTensors& in, const std::string& prefix);

 private:
  struct Layer {
    Tensor ln1_g, ln1_b, ln2_g, ln2_b, ln3_g, ln3_b;
    MultiHead self_attn, cross_attn;
    Tensor w1, b1, w2, b2;
  };

  DecoderConfig cfg_;
  Tensor embed_;  // [V x d_model]
  std::vector<Layer> layers_;
  Tensor lnf_g, lnf_b;
  Tensor cls_w, cls_b;

  template <typename Fn>
  void visit_params(Fn&& fn);
};

}  // namespace palx
