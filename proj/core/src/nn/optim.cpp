#include "malforge/nn/optim.hpp"

#include <cmath>

namespace malforge::nn {

template <class T>
Adam<T>::Adam(std::vector<Param<T>*> params, AdamOptions options) : params_(std::move(params)), opt_(options) {
  for (auto* p : params_) {
    m_.emplace_back(p->value.shape());
    v_.emplace_back(p->value.shape());
  }
}

template <class T>
void Adam<T>::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
  const T b1 = static_cast<T>(opt_.beta1), b2 = static_cast<T>(opt_.beta2);
  const T step = static_cast<T>(opt_.learning_rate / c1);
  const T inv_c2 = static_cast<T>(1.0 / c2);
  const T eps = static_cast<T>(opt_.eps);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& p = *params_[k];
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const T g = p.grad[i];
      m[i] = b1 * m[i] + (T{1} - b1) * g;
      v[i] = b2 * v[i] + (T{1} - b2) * g * g;
      p.value[i] -= step * m[i] / (std::sqrt(v[i] * inv_c2) + eps);
    }
  }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace malforge::nn
