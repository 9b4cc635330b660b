#pragma once

#include <vector>

#include "malforge/nn/layers.hpp"

namespace malforge::nn {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <class T>
class Adam {
 public:
  Adam(std::vector<Param<T>*> params, AdamOptions options);

  void step();
  void zero_grad() { nn::zero_grad(params_); }
  long steps() const noexcept { return t_; }
  const std::vector<Param<T>*>& params() const noexcept { return params_; }

  /// First/second moment estimates, parallel to params(). Exposed for checkpointing.
  std::vector<Tensor<T>>& first_moments() noexcept { return m_; }
  std::vector<Tensor<T>>& second_moments() noexcept { return v_; }
  void set_steps(long t) noexcept { t_ = t; }

 private:
  std::vector<Param<T>*> params_;
  AdamOptions opt_;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
  long t_ = 0;
};

}  // namespace malforge::nn
