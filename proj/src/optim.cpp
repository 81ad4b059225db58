#include "palx/optim.hpp"

#include <cmath>

namespace palx {

Adam::Adam(double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (lr <= 0.0) throw ConfigError("learning rate must be positive");
}

void Adam::add_param(const Tensor& p) {
  if (!p.defined() || !p.is_leaf() || !p.requires_grad())
    throw ContractError("optimizer parameters must be leaf tensors requiring grad");
  Slot s;
  s.param = p;
  s.m.assign(p.size(), 0.0);
  s.v.assign(p.size(), 0.0);
  slots_.push_back(std::move(s));
}

void Adam::add_params(const std::vector<Tensor>& ps) {
  for (const auto& p : ps) add_param(p);
}

void Adam::step() {
  ++t_;
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (Slot& s : slots_) {
    if (!s.param.has_grad())
      throw ContractError("optimizer step with unpopulated gradient; run backward first");
    const std::vector<double>& g = s.param.grad_ref();
    double* p = s.param.data();
    for (size_t i = 0; i < g.size(); ++i) {
      s.m[i] = beta1_ * s.m[i] + (1.0 - beta1_) * g[i];
      s.v[i] = beta2_ * s.v[i] + (1.0 - beta2_) * g[i] * g[i];
      double mhat = s.m[i] / bc1;
      double vhat = s.v[i] / bc2;
      p[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

void Adam::zero_grad() {
  for (Slot& s : slots_) s.param.zero_grad();
}

}  // namespace palx
