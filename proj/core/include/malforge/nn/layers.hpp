#pragma once

#include <memory>
#include <string>
#include <vector>

#include "malforge/nn/tensor.hpp"
#include "malforge/random.hpp"

namespace malforge::nn {

enum class Mode { train, eval };

enum class Init {
  torch_default,   // U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and bias
  normal_002,      // N(0, 0.02) weights, zero bias
  glorot_uniform,  // U(-sqrt(6/(fan_in+fan_out)), ...) weights, zero bias
};

template <class T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Param() = default;
  Param(std::string n, Shape shape) : name(std::move(n)), value(shape), grad(shape) {}
};

/// Non-trainable state that still belongs in a checkpoint.
template <class T>
struct Buffer {
  std::string name;
  Tensor<T>* tensor;
};

/// A differentiable stage. forward() caches what backward() needs; backward()
/// accumulates parameter gradients and returns the input gradient.
template <class T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor<T> forward(const Tensor<T>& x, Mode mode, Rng& rng) = 0;
  virtual Tensor<T> backward(const Tensor<T>& dy) = 0;
  virtual std::vector<Param<T>*> params() { return {}; }
  virtual std::vector<Buffer<T>> buffers() { return {}; }
  virtual std::string kind() const = 0;
  virtual std::unique_ptr<Layer<T>> clone() const = 0;
};

template <class T>
class Linear final : public Layer<T> {
 public:
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Linear>(*this); }
  Linear(int in_features, int out_features, Init init, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, Mode mode, Rng& rng) override;
  Tensor<T> backward(const Tensor<T>& dy) override;
  std::vector<Param<T>*> params() override { return {&weight_, &bias_}; }
  std::string kind() const override { return "linear"; }
  int in_features() const noexcept { return in_; }
  int out_features() const noexcept { return out_; }

 private:
  int in_;
  int out_;
  Param<T> weight_;  // out x in
  Param<T> bias_;
  Tensor<T> input_;
};

template <class T>
class Conv2d final : public Layer<T> {
 public:
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Conv2d>(*this); }
  Conv2d(int in_channels, int out_channels, int kernel, int stride, int padding, Init init, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, Mode mode, Rng& rng) override;
  Tensor<T> backward(const Tensor<T>& dy) override;
  std::vector<Param<T>*> params() override { return {&weight_, &bias_}; }
  std::string kind() const override { return "conv2d"; }
  int in_channels() const noexcept { return cin_; }
  int out_channels() const noexcept { return cout_; }
  int output_extent(int input_extent) const noexcept { return (input_extent + 2 * pad_ - k_) / stride_ + 1; }

 private:
  void im2col(const T* x, int h, int w, T* cols) const;
  void col2im(const T* cols, int h, int w, T* dx) const;

  int cin_, cout_, k_, stride_, pad_;
  Param<T> weight_;  // cout x cin x k x k
  Param<T> bias_;
  Tensor<T> input_;
  AlignedVector<T> cols_;
};

template <class T>
class BatchNorm2d final : public Layer<T> {
 public:
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<BatchNorm2d>(*this); }
  explicit BatchNorm2d(int channels, double momentum = 0.1, double eps = 1e-5, Init init = Init::torch_default,
                       Rng* rng = nullptr);
  Tensor<T> forward(const Tensor<T>& x, Mode mode, Rng& rng) override;
  Tensor<T> backward(const Tensor<T>& dy) override;
  std::vector<Param<T>*> params() override { return {&gamma_, &beta_}; }
  std::vector<Buffer<T>> buffers() override { return {{"running_mean", &running_mean_}, {"running_var", &running_var_}}; }
  std::string kind() const override { return "batchnorm2d"; }

 private:
  int channels_;
  double momentum_;
  double eps_;
  Param<T> gamma_;
  Param<T> beta_;
  Tensor<T> running_mean_;
  Tensor<T> running_var_;
  Tensor<T> xhat_;
  std::vector<T> inv_std_;
  Mode mode_ = Mode::train;
};

/// Element dropout, or whole-channel dropout when `channelwise`.
template <class T>
class Dropout final : public Layer<T> {
 public:
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Dropout>(*this); }
  Dropout(double rate, bool channelwise) : rate_(rate), channelwise_(channelwise) {}
  Tensor<T> forward(const Tensor<T>& x, Mode mode, Rng& rng) override;
  Tensor<T> backward(const Tensor<T>& dy) override;
  std::string kind() const override { return channelwise_ ? "dropout2d" : "dropout"; }

 private:
  double rate_;
  bool channelwise_;
  std::vector<T> mask_;
};

template <class T>
class LeakyReLU final : public Layer<T> {
 public:
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<LeakyReLU>(*this); }
  explicit LeakyReLU(double slope) : slope_(static_cast<T>(slope)) {}
  Tensor<T> forward(const Tensor<T>& x, Mode mode, Rng& rng) override;
  Tensor<T> backward(const Tensor<T>& dy) override;
  std::string kind() const override { return slope_ == T{0} ? "relu" : "leaky_relu"; }

 private:
  T slope_;
  Tensor<T> input_;
};

template <class T>
class Tanh final : public Layer<T> {
 public:
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Tanh>(*this); }
  Tensor<T> forward(const Tensor<T>& x, Mode mode, Rng& rng) override;
  Tensor<T> backward(const Tensor<T>& dy) override;
  std::string kind() const override { return "tanh"; }

 private:
  Tensor<T> output_;
};

/// Nearest-neighbour 2x upsampling.
template <class T>
class Upsample2x final : public Layer<T> {
 public:
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Upsample2x>(*this); }
  Tensor<T> forward(const Tensor<T>& x, Mode mode, Rng& rng) override;
  Tensor<T> backward(const Tensor<T>& dy) override;
  std::string kind() const override { return "upsample"; }

 private:
  Shape in_shape_;
};

/// 2x2 max pooling, stride 2, floor semantics.
template <class T>
class MaxPool2x2 final : public Layer<T> {
 public:
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<MaxPool2x2>(*this); }
  Tensor<T> forward(const Tensor<T>& x, Mode mode, Rng& rng) override;
  Tensor<T> backward(const Tensor<T>& dy) override;
  std::string kind() const override { return "maxpool"; }

 private:
  Shape in_shape_;
  std::vector<std::size_t> argmax_;
};

/// Reshapes (B, ...) to (B, target...).
template <class T>
class Reshape final : public Layer<T> {
 public:
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Reshape>(*this); }
  explicit Reshape(Shape per_sample) : per_sample_(std::move(per_sample)) {}
  Tensor<T> forward(const Tensor<T>& x, Mode mode, Rng& rng) override;
  Tensor<T> backward(const Tensor<T>& dy) override;
  std::string kind() const override { return "reshape"; }

 private:
  Shape per_sample_;
  Shape in_shape_;
};

template <class T>
class Sequential {
 public:
  Sequential() = default;
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;
  Sequential(const Sequential& other) {
    for (const auto& l : other.layers_) layers_.push_back(l->clone());
  }
  Sequential& operator=(const Sequential& other) {
    if (this != &other) *this = Sequential(other);
    return *this;
  }

  template <class L, class... Args>
  L& add(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode, Rng& rng);
  Tensor<T> backward(const Tensor<T>& dy);
  /// Renames every parameter to "<prefix><index>.<kind>.<param>". Call once after building.
  void assign_names(const std::string& prefix);
  std::vector<Param<T>*> params();
  std::vector<Buffer<T>> buffers(const std::string& prefix = "");
  std::size_t size() const noexcept { return layers_.size(); }
  Layer<T>& layer(std::size_t i) { return *layers_.at(i); }

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

template <class T>
void zero_grad(const std::vector<Param<T>*>& params) {
  for (auto* p : params) p->grad.fill(T{0});
}

template <class T>
std::size_t parameter_count(const std::vector<Param<T>*>& params) {
  std::size_t n = 0;
  for (auto* p : params) n += p->value.size();
  return n;
}

}  // namespace malforge::nn
