#include "palx/decoder.hpp"

#include <cmath>

#include "palx/errors.hpp"
#include "palx/positional.hpp"

namespace palx {

namespace {

Tensor linear_init(int rows, int cols, Rng& rng) {
  Tensor w = Tensor::randn({rows, cols}, rng, std::sqrt(2.0 / rows));
  w.set_requires_grad(true);
  return w;
}

}  // namespace

std::vector<uint8_t> causal_mask(int L) {
  if (L < 1) throw ContractError("causal mask needs L >= 1");
  std::vector<uint8_t> mask(static_cast<size_t>(L) * L, 0);
  for (int i = 0; i < L; ++i)
    for (int j = 0; j <= i; ++j) mask[static_cast<size_t>(i) * L + j] = 1;
  return mask;
}

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const std::vector<uint8_t>* mask, Tensor* weights_out) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2)
    throw DimensionError("attention operands must be rank-2");
  if (q.dim(1) != k.dim(1))
    throw DimensionError("query width " + std::to_string(q.dim(1)) + " != key width " +
                         std::to_string(k.dim(1)));
  if (k.dim(0) != v.dim(0))
    throw DimensionError("key rows " + std::to_string(k.dim(0)) + " != value rows " +
                         std::to_string(v.dim(0)));
  if (mask && mask->size() != static_cast<size_t>(q.dim(0)) * k.dim(0))
    throw DimensionError("attention mask size mismatch");
  Tensor scores = matmul(q, transpose(k)) * (1.0 / std::sqrt(static_cast<double>(q.dim(1))));
  Tensor attn = mask ? masked_softmax_rows(scores, *mask) : softmax(scores, 1);
  if (weights_out) *weights_out = attn.detach();
  return matmul(attn, v);
}

MultiHead make_multi_head(int d_model, int heads, Rng& rng) {
  if (heads < 1 || d_model % heads != 0)
    throw ConfigError("d_model " + std::to_string(d_model) + " not divisible by " +
                      std::to_string(heads) + " heads");
  MultiHead mh;
  mh.heads = heads;
  mh.wq = linear_init(d_model, d_model, rng);
  mh.wk = linear_init(d_model, d_model, rng);
  mh.wv = linear_init(d_model, d_model, rng);
  mh.wo = linear_init(d_model, d_model, rng);
  return mh;
}

Tensor multi_head_attention(const MultiHead& mh, const Tensor& q_in, const Tensor& k_in,
                            const Tensor& v_in, const std::vector<uint8_t>* mask,
                            double drop_p, Rng* rng, bool training,
                            std::vector<Tensor>* weights_out) {
  int d = mh.wq.dim(0);
  if (q_in.dim(1) != d || k_in.dim(1) != d || v_in.dim(1) != d)
    throw DimensionError("multi-head inputs must have width " + std::to_string(d));
  int dk = d / mh.heads;
  Tensor q = matmul(q_in, mh.wq);
  Tensor k = matmul(k_in, mh.wk);
  Tensor v = matmul(v_in, mh.wv);
  std::vector<Tensor> heads;
  heads.reserve(mh.heads);
  for (int i = 0; i < mh.heads; ++i) {
    Tensor qi = slice(q, 1, i * dk, dk);
    Tensor ki = slice(k, 1, i * dk, dk);
    Tensor vi = slice(v, 1, i * dk, dk);
    Tensor w;
    Tensor scores = matmul(qi, transpose(ki)) * (1.0 / std::sqrt(static_cast<double>(dk)));
    Tensor attn = mask ? masked_softmax_rows(scores, *mask) : softmax(scores, 1);
    if (weights_out) weights_out->push_back(attn.detach());
    if (training && drop_p > 0.0) {
      if (!rng) throw ContractError("attention dropout needs an RNG in training");
      attn = dropout(attn, drop_p, *rng, true);
    }
    heads.push_back(matmul(attn, vi));
  }
  return matmul(mh.heads == 1 ? heads[0] : concat(heads, 1), mh.wo);
}

Tensor ffn(const Tensor& x, const Tensor& w1, const Tensor& b1, const Tensor& w2,
           const Tensor& b2, double drop_p, Rng* rng, bool training) {
  Tensor h = relu(linear(x, w1, b1));
  if (training && drop_p > 0.0) {
    if (!rng) throw ContractError("ffn dropout needs an RNG in training");
    h = dropout(h, drop_p, *rng, true);
  }
  return linear(h, w2, b2);
}

Decoder::Decoder(const DecoderConfig& cfg, Rng& rng) : cfg_(cfg) {
  if (cfg.vocab < 1) throw ConfigError("decoder vocab size must be positive");
  if (cfg.d_model < 1 || cfg.num_layers < 1 || cfg.d_ff < 1)
    throw ConfigError("decoder sizes must be positive");
  if (cfg.num_heads < 1 || cfg.d_model % cfg.num_heads != 0)
    throw ConfigError("d_model " + std::to_string(cfg.d_model) + " not divisible by " +
                      std::to_string(cfg.num_heads) + " heads");
  if (cfg.dropout < 0.0 || cfg.dropout >= 1.0)
    throw ConfigError("dropout must lie in [0,1)");
  if (cfg.word_dropout < 0.0 || cfg.word_dropout >= 1.0)
    throw ConfigError("word_dropout must lie in [0,1)");

  embed_ = Tensor::randn({cfg.vocab, cfg.d_model}, rng,
                         1.0 / std::sqrt(static_cast<double>(cfg.d_model)));
  embed_.set_requires_grad(true);
  for (int l = 0; l < cfg.num_layers; ++l) {
    Layer layer;
    layer.ln1_g = Tensor(Shape{cfg.d_model}, 1.0, true);
    layer.ln1_b = Tensor(Shape{cfg.d_model}, 0.0, true);
    layer.ln2_g = Tensor(Shape{cfg.d_model}, 1.0, true);
    layer.ln2_b = Tensor(Shape{cfg.d_model}, 0.0, true);
    layer.ln3_g = Tensor(Shape{cfg.d_model}, 1.0, true);
    layer.ln3_b = Tensor(Shape{cfg.d_model}, 0.0, true);
    layer.self_attn = make_multi_head(cfg.d_model, cfg.num_heads, rng);
    layer.cross_attn = make_multi_head(cfg.d_model, cfg.num_heads, rng);
    layer.w1 = linear_init(cfg.d_model, cfg.d_ff, rng);
    layer.b1 = Tensor(Shape{cfg.d_ff}, 0.0, true);
    layer.w2 = linear_init(cfg.d_ff, cfg.d_model, rng);
    layer.b2 = Tensor(Shape{cfg.d_model}, 0.0, true);
    layers_.push_back(std::move(layer));
  }
  lnf_g = Tensor(Shape{cfg.d_model}, 1.0, true);
  lnf_b = Tensor(Shape{cfg.d_model}, 0.0, true);
  cls_w = linear_init(cfg.d_model, cfg.vocab, rng);
  cls_b = Tensor(Shape{cfg.vocab}, 0.0, true);
}

DecoderOut Decoder::forward(const FeatureGrid& grid, const std::vector<int>& ids,
                            bool training, Rng* rng, AttentionTrace* trace) {
  if (ids.empty()) throw ContractError("decoder needs at least one input token");
  if (grid.features.rank() != 2 || grid.features.dim(1) != cfg_.d_model)
    throw DimensionError("feature grid width != decoder d_model");
  int L = static_cast<int>(ids.size());
  double p = training ? cfg_.dropout : 0.0;

  std::vector<int> ctx = ids;
  if (training && cfg_.word_dropout > 0.0 && rng != nullptr)
    for (size_t i = 1; i < ctx.size(); ++i)
      if (rng->uniform(0.0, 1.0) < cfg_.word_dropout) ctx[i] = 0;  // pad id

  Tensor x = embedding(embed_, ctx) * std::sqrt(static_cast<double>(cfg_.d_model)) +
             word_pe_table(L, cfg_.d_model);
  Tensor src = grid.features + grid.pos;
  std::vector<uint8_t> mask = causal_mask(L);

  for (Layer& layer : layers_) {
    Tensor h1 = layer_norm(x, layer.ln1_g, layer.ln1_b);
    x = x + multi_head_attention(layer.self_attn, h1, h1, h1, &mask, p, rng, training,
                                 trace ? &trace->self_heads : nullptr);
    Tensor h2 = layer_norm(x, layer.ln2_g, layer.ln2_b);
    x = x + multi_head_attention(layer.cross_attn, h2, src, src, nullptr, p, rng, training,
                                 trace ? &trace->cross_heads : nullptr);
    Tensor h3 = layer_norm(x, layer.ln3_g, layer.ln3_b);
    x = x + ffn(h3, layer.w1, layer.b1, layer.w2, layer.b2, p, rng, training);
  }
  DecoderOut out;
  out.features = layer_norm(x, lnf_g, lnf_b);
  out.logits = linear(out.features, cls_w, cls_b);
  return out;
}

template <typename Fn>
void Decoder::visit_params(Fn&& fn) {
  fn("embed", embed_);
  for (size_t l = 0; l < layers_.size(); ++l) {
    std::string base = "l" + std::to_string(l) + "/";
    Layer& y = layers_[l];
    fn(base + "ln1_g", y.ln1_g);
    fn(base + "ln1_b", y.ln1_b);
    fn(base + "ln2_g", y.ln2_g);
    fn(base + "ln2_b", y.ln2_b);
    fn(base + "ln3_g", y.ln3_g);
    fn(base + "ln3_b", y.ln3_b);
    fn(base + "self/wq", y.self_attn.wq);
    fn(base + "self/wk", y.self_attn.wk);
    fn(base + "self/wv", y.self_attn.wv);
    fn(base + "self/wo", y.self_attn.wo);
    fn(base + "cross/wq", y.cross_attn.wq);
    fn(base + "cross/wk", y.cross_attn.wk);
    fn(base + "cross/wv", y.cross_attn.wv);
    fn(base + "cross/wo", y.cross_attn.wo);
    fn(base + "ffn/w1", y.w1);
    fn(base + "ffn/b1", y.b1);
    fn(base + "ffn/w2", y.w2);
    fn(base + "ffn/b2", y.b2);
  }
  fn("lnf_g", lnf_g);
  fn("lnf_b", lnf_b);
  fn("cls/w", cls_w);
  fn("cls/b", cls_b);
}

std::vector<std::pair<std::string, Tensor>> Decoder::named_params() {
  std::vector<std::pair<std::string, Tensor>> out;
  visit_params([&](const std::string& name, Tensor& t) { out.emplace_back(name, t); });
  return out;
}

void Decoder::save_state(NamedTensors& out, const std::string& prefix) const {
  const_cast<Decoder*>(this)->visit_params(
      [&](const std::string& name, Tensor& t) { out.put(prefix + name, t.clone()); });
}

void Decoder::load_state(const NamedTensors& in, const std::string& prefix) {
  visit_params([&](const std::string& name, Tensor& t) { t.copy_from_(in.at(prefix + name)); });
}

}  // namespace palx
