#include "palx/discriminator.hpp"

#include <cmath>

#include "palx/errors.hpp"

namespace palx {

Discriminator::Discriminator(const DiscriminatorConfig& cfg, Rng& rng) : cfg_(cfg) {
  if (cfg.in_dim < 1 || cfg.hidden < 1) throw ConfigError("discriminator widths must be positive");
  if (cfg.layers < 2) throw ConfigError("discriminator needs at least 2 linear layers");
  int in = cfg.in_dim;
  for (int l = 0; l < cfg.layers; ++l) {
    int out = l + 1 == cfg.layers ? 1 : cfg.hidden;
    Tensor w = Tensor::randn({in, out}, rng, std::sqrt(2.0 / in));
    w.set_requires_grad(true);
    ws_.push_back(w);
    bs_.push_back(Tensor(Shape{out}, 0.0, true));
    in = out;
  }
}

Tensor Discriminator::score_rows(const Tensor& rows) {
  if (rows.rank() != 2 || rows.dim(1) != cfg_.in_dim)
    throw DimensionError("discriminator expects [L x " + std::to_string(cfg_.in_dim) +
                         "] features, got " + shape_str(rows.shape()));
  Tensor h = rows;
  for (size_t l = 0; l < ws_.size(); ++l) {
    h = linear(h, ws_[l], bs_[l]);
    if (l + 1 < ws_.size()) h = relu(h);
  }
  return h;
}

double Discriminator::discriminate(const Tensor& d_l) {
  if (d_l.rank() != 1 || d_l.dim(0) != cfg_.in_dim)
    throw DimensionError("discriminate expects a length-" + std::to_string(cfg_.in_dim) +
                         " feature vector, got " + shape_str(d_l.shape()));
  autograd::NoGradGuard guard;
  Tensor score = score_rows(reshape(d_l, {1, cfg_.in_dim}));
  return 1.0 / (1.0 + std::exp(-score.item()));
}

template <typename Fn>
void Discriminator::visit_params(Fn&& fn) {
  for (size_t l = 0; l < ws_.size(); ++l) {
    fn("l" + std::to_string(l) + "/w", ws_[l]);
    fn("l" + std::to_string(l) + "/b", bs_[l]);
  }
}

std::vector<std::pair<std::string, Tensor>> Discriminator::named_params() {
  std::vector<std::pair<std::string, Tensor>> out;
  visit_params([&](const std::string& name, Tensor& t) { out.emplace_back(name, t); });
  return out;
}

void Discriminator::save_state(NamedTensors& out, const std::string& prefix) const {
  const_cast<Discriminator*>(this)->visit_params(
      [&](const std::string& name, Tensor& t) { out.put(prefix + name, t.clone()); });
}

void Discriminator::load_state(const NamedTensors& in, const std::string& prefix) {
  visit_params([&](const std::string& name, Tensor& t) { t.copy_from_(in.at(prefix + name)); });
}

}  // namespace palx
