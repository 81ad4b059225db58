#pragma once

#include <string>
#include <utility>
#include <vector>

#include "palx/checkpoint.hpp"
#include "palx/random.hpp"
#include "palx/tensor.hpp"

namespace palx {

struct DiscriminatorConfig {
  int in_dim = 64;  // decoder feature width
  int hidden = 64;
  int layers = 2;  // total linear layers; >= 2 enables the deeper variant
};

// MLP over per-step decoder features; sigmoid output is the probability the
// feature vector came from a printed template.
class Discriminator {
 public:
  Discriminator(const DiscriminatorConfig& cfg, Rng& rng);

  // rows: [L x in_dim] -> pre-sigmoid scores [L x 1]
  Tensor score_rows(const Tensor& rows);

  // single feature vector [in_dim] -> P(printed), no gradient recorded
  double discriminate(const Tensor& d_l);

  const DiscriminatorConfig& config() const { return cfg_; }
  std::vector<std::pair<std::string, Tensor>> named_params();
  void save_state(NamedTensors& out, const std::string& prefix) const;
  void load_state(const NamedTensors& in, const std::string& prefix);

 private:
  DiscriminatorConfig cfg_;
  std::vector<Tensor> ws_, bs_;

  template <typename Fn>
  void visit_params(Fn&& fn);
};

}  // namespace palx
