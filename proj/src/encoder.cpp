#include "palx/encoder.hpp"

#include <cmath>

#include "palx/errors.hpp"
#include "palx/positional.hpp"

namespace palx {

namespace {

Tensor conv_init(int c_out, int c_in, int k, Rng& rng) {
  double stddev = std::sqrt(2.0 / (static_cast<double>(c_in) * k * k));
  Tensor w = Tensor::randn({c_out, c_in, k, k}, rng, stddev);
  w.set_requires_grad(true);
  return w;
}

}  // namespace

DenseUnit make_dense_unit(int c_in, int growth, Rng& rng) {
  DenseUnit u;
  u.gamma = Tensor(Shape{c_in}, 1.0, true);
  u.beta = Tensor(Shape{c_in}, 0.0, true);
  u.bn.running_mean = Tensor(Shape{c_in}, 0.0);
  u.bn.running_var = Tensor(Shape{c_in}, 1.0);
  u.w = conv_init(growth, c_in, 3, rng);
  return u;
}

Tensor dense_layer(const std::vector<Tensor>& inputs, DenseUnit& unit, bool training) {
  if (inputs.empty()) throw ContractError("dense_layer needs at least one input map");
  Tensor x = inputs.size() == 1 ? inputs[0] : concat(inputs, 1);
  if (x.dim(1) != unit.w.dim(1))
    throw DimensionError("dense_layer: " + std::to_string(x.dim(1)) +
                         " input channels, unit expects " + std::to_string(unit.w.dim(1)));
  Tensor h = batch_norm(x, unit.gamma, unit.beta, unit.bn, training);
  return conv2d(relu(h), unit.w, Tensor(), 1, 1);
}

Encoder::Encoder(const EncoderConfig& cfg, Rng& rng) : cfg_(cfg) {
  if (cfg.num_blocks < 1 || cfg.block_layers < 1 || cfg.growth < 1 || cfg.stem_channels < 1)
    throw ConfigError("encoder sizes must be positive");
  int factor = 1 << cfg.num_blocks;
  if (cfg.in_h % factor != 0 || cfg.in_w % factor != 0 || cfg.in_h < factor || cfg.in_w < factor)
    throw ConfigError("input " + std::to_string(cfg.in_h) + "x" + std::to_string(cfg.in_w) +
                      " not divisible by downsampling factor " + std::to_string(factor));
  gh_ = cfg.in_h / factor;
  gw_ = cfg.in_w / factor;

  stem_w_ = conv_init(cfg.stem_channels, 1, 3, rng);
  int c = cfg.stem_channels;
  for (int b = 0; b < cfg.num_blocks; ++b) {
    std::vector<DenseUnit> units;
    for (int l = 0; l < cfg.block_layers; ++l) {
      units.push_back(make_dense_unit(c + l * cfg.growth, cfg.growth, rng));
    }
    blocks_.push_back(std::move(units));
    c += cfg.block_layers * cfg.growth;
    if (b + 1 < cfg.num_blocks) {
      int c_out = c / 2;
      Transition t;
      t.w = conv_init(c_out, c, 1, rng);
      transitions_.push_back(std::move(t));
      c = c_out;
    }
  }
  proj_w_ = conv_init(cfg.d_model, c, 1, rng);
  proj_b_ = Tensor(Shape{cfg.d_model}, 0.0, true);

  pos_ = reshape(image_positional_encoding(gh_, gw_, cfg.d_model), {gh_ * gw_, cfg.d_model});
}

Tensor Encoder::forward(const Tensor& x, bool training) {
  if (x.rank() != 4 || x.dim(1) != 1 || x.dim(2) != cfg_.in_h || x.dim(3) != cfg_.in_w)
    throw DimensionError("encoder expects [N,1," + std::to_string(cfg_.in_h) + "," +
                         std::to_string(cfg_.in_w) + "], got " + shape_str(x.shape()));
  Tensor h = conv2d(x, stem_w_, Tensor(), 2, 1);
  for (size_t b = 0; b < blocks_.size(); ++b) {
    std::vector<Tensor> feats{h};
    for (DenseUnit& unit : blocks_[b]) feats.push_back(dense_layer(feats, unit, training));
    h = concat(feats, 1);
    if (b < transitions_.size()) {
      h = conv2d(h, transitions_[b].w, Tensor(), 1, 0);
      h = avg_pool2x2(h);
    }
  }
  return conv2d(h, proj_w_, proj_b_, 1, 0);
}

FeatureGrid Encoder::encode(const Image& im, bool training) {
  if (im.h != cfg_.in_h || im.w != cfg_.in_w)
    throw DimensionError("encoder expects a " + std::to_string(cfg_.in_h) + "x" +
                         std::to_string(cfg_.in_w) + " image, got " + std::to_string(im.h) +
                         "x" + std::to_string(im.w));
  Tensor x(Shape{1, 1, im.h, im.w}, im.pix);
  Tensor maps = forward(x, training);  // [1, d_model, gh, gw]
  Tensor flat = transpose(reshape(maps, {cfg_.d_model, gh_ * gw_}));
  FeatureGrid grid;
  grid.features = flat;
  grid.pos = pos_;
  grid.gh = gh_;
  grid.gw = gw_;
  return grid;
}

template <typename Fn>
void Encoder::visit_params(Fn&& fn) {
  fn("stem/w", stem_w_, true);
  for (size_t b = 0; b < blocks_.size(); ++b) {
    for (size_t l = 0; l < blocks_[b].size(); ++l) {
      std::string base = "b" + std::to_string(b) + "/u" + std::to_string(l) + "/";
      DenseUnit& u = blocks_[b][l];
      fn(base + "gamma", u.gamma, true);
      fn(base + "beta", u.beta, true);
      fn(base + "w", u.w, true);
      fn(base + "bn_mean", u.bn.running_mean, false);
      fn(base + "bn_var", u.bn.running_var, false);
    }
    if (b < transitions_.size())
      fn("t" + std::to_string(b) + "/w", transitions_[b].w, true);
  }
  fn("proj/w", proj_w_, true);
  fn("proj/b", proj_b_, true);
}

std::vector<std::pair<std::string, Tensor>> Encoder::named_params() {
  std::vector<std::pair<std::string, Tensor>> out;
  visit_params([&](const std::string& name, Tensor& t, bool trainable) {
    if (trainable) out.emplace_back(name, t);
  });
  return out;
}

void Encoder::save_state(NamedTensors& out, const std::string& prefix) const {
  const_cast<Encoder*>(this)->visit_params(
      [&](const std::string& name, Tensor& t, bool) { out.put(prefix + name, t.clone()); });
}

void Encoder::load_state(const NamedTensors& in, const std::string& prefix) {
  visit_params([&](const std::string& name, Tensor& t, bool) {
    t.copy_from_(in.at(prefix + name));
  });
}

}  // namespace palx
