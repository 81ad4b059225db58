#pragma once

#include <cstdint>
#include <vector>

#include "palx/tensor.hpp"

namespace palx {

// Adaptive-moment gradient descent over registered leaf parameters.
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void add_param(const Tensor& p);
  void add_params(const std::vector<Tensor>& ps);

  // Applies one update from each parameter's populated gradient.
  void step();
  void zero_grad();

  int64_t step_count() const { return t_; }
  double learning_rate() const { return lr_; }
  size_t param_count() const { return slots_.size(); }

 private:
  struct Slot {
    Tensor param;
    std::vector<double> m, v;
  };
  std::vector<Slot> slots_;
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
};

}  // namespace palx
