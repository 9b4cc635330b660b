#pragma once

#include <span>

#include "malforge/nn/tensor.hpp"

namespace malforge::nn {

/// Mean loss over the batch and its gradient with respect to the logits.
template <class T>
struct LossGrad {
  double loss = 0.0;
  Tensor<T> grad;
};

double sigmoid(double z) noexcept;
double softplus(double z) noexcept;

/// Binary cross-entropy of sigmoid(logits) against a constant target.
template <class T>
LossGrad<T> bce_with_logits(const Tensor<T>& logits, double target);

/// Cross-entropy over per-class sigmoid scores renormalized to sum to one:
/// loss = -log(s_y / sum_j s_j) with s = sigmoid(logits). Logits are (B, K).
template <class T>
LossGrad<T> renormalized_sigmoid_ce(const Tensor<T>& logits, std::span<const int> labels);

/// Softmax cross-entropy. Logits are (B, K).
template <class T>
LossGrad<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels);

/// Row-wise softmax of (B, K) logits.
template <class T>
Tensor<T> softmax(const Tensor<T>& logits);

}  // namespace malforge::nn
