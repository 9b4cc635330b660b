#include "malforge/nn/losses.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace malforge::nn {

double sigmoid(double z) noexcept {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double z) noexcept { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

namespace {

template <class T>
void check_labels(const Tensor<T>& logits, std::span<const int> labels, const char* who) {
  if (logits.rank() != 2 || static_cast<std::size_t>(logits.dim(0)) != labels.size()) {
    throw DataError(std::string(who) + ": logits " + shape_string(logits.shape()) + " do not match " +
                    std::to_string(labels.size()) + " labels");
  }
  for (int y : labels) {
    if (y < 0 || y >= logits.dim(1)) throw DataError(std::string(who) + ": label out of range");
  }
}

}  // namespace

template <class T>
LossGrad<T> bce_with_logits(const Tensor<T>& logits, double target) {
  const std::size_t n = logits.size();
  if (n == 0) throw DataError("bce_with_logits: empty batch");
  LossGrad<T> out{0.0, Tensor<T>(logits.shape())};
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = logits[i];
    total += softplus(z) - target * z;
    out.grad[i] = static_cast<T>((sigmoid(z) - target) / static_cast<double>(n));
  }
  out.loss = total / static_cast<double>(n);
  return out;
}

template <class T>
LossGrad<T> renormalized_sigmoid_ce(const Tensor<T>& logits, std::span<const int> labels) {
  check_labels(logits, labels, "renormalized_sigmoid_ce");
  const int batch = logits.dim(0), k = logits.dim(1);
  LossGrad<T> out{0.0, Tensor<T>(logits.shape())};
  std::vector<double> log_s(static_cast<std::size_t>(k));
  double total = 0.0;
  for (int b = 0; b < batch; ++b) {
    const T* z = logits.data() + static_cast<std::size_t>(b) * k;
    double top = -1e300;
    for (int j = 0; j < k; ++j) {
      log_s[j] = -softplus(-static_cast<double>(z[j]));
      top = std::max(top, log_s[j]);
    }
    double sum = 0.0;
    for (int j = 0; j < k; ++j) sum += std::exp(log_s[j] - top);
    const double log_total = top + std::log(sum);
    const int y = labels[b];
    total += log_total - log_s[y];
    T* g = out.grad.data() + static_cast<std::size_t>(b) * k;
    for (int j = 0; j < k; ++j) {
      const double one_minus_s = sigmoid(-static_cast<double>(z[j]));
      const double share = std::exp(log_s[j] - log_total);
      double d = share * one_minus_s;
      if (j == y) d -= one_minus_s;
      g[j] = static_cast<T>(d / batch);
    }
  }
  out.loss = total / batch;
  return out;
}

template <class T>
Tensor<T> softmax(const Tensor<T>& logits) {
  const int batch = logits.dim(0), k = logits.dim(1);
  Tensor<T> p(logits.shape());
  for (int b = 0; b < batch; ++b) {
    const T* z = logits.data() + static_cast<std::size_t>(b) * k;
    T* out = p.data() + static_cast<std::size_t>(b) * k;
    const double top = *std::max_element(z, z + k);
    double sum = 0.0;
    for (int j = 0; j < k; ++j) sum += std::exp(z[j] - top);
    for (int j = 0; j < k; ++j) out[j] = static_cast<T>(std::exp(z[j] - top) / sum);
  }
  return p;
}

template <class T>
LossGrad<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels) {
  check_labels(logits, labels, "softmax_cross_entropy");
  const int batch = logits.dim(0), k = logits.dim(1);
  LossGrad<T> out{0.0, Tensor<T>(logits.shape())};
  double total = 0.0;
  for (int b = 0; b < batch; ++b) {
    const T* z = logits.data() + static_cast<std::size_t>(b) * k;
    const double top = *std::max_element(z, z + k);
    double sum = 0.0;
    for (int j = 0; j < k; ++j) sum += std::exp(z[j] - top);
    const double log_sum = top + std::log(sum);
    total += log_sum - z[labels[b]];
    T* g = out.grad.data() + static_cast<std::size_t>(b) * k;
    for (int j = 0; j < k; ++j) {
      const double p = std::exp(z[j] - log_sum);
      g[j] = static_cast<T>((p - (j == labels[b] ? 1.0 : 0.0)) / batch);
    }
  }
  out.loss = total / batch;
  return out;
}

template LossGrad<float> bce_with_logits(const Tensor<float>&, double);
template LossGrad<double> bce_with_logits(const Tensor<double>&, double);
template LossGrad<float> renormalized_sigmoid_ce(const Tensor<float>&, std::span<const int>);
template LossGrad<double> renormalized_sigmoid_ce(const Tensor<double>&, std::span<const int>);
template LossGrad<float> softmax_cross_entropy(const Tensor<float>&, std::span<const int>);
template LossGrad<double> softmax_cross_entropy(const Tensor<double>&, std::span<const int>);
template Tensor<float> softmax(const Tensor<float>&);
template Tensor<double> softmax(const Tensor<double>&);

}  // namespace malforge::nn
