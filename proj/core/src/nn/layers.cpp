#include "malforge/nn/layers.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>

namespace malforge::nn {

std::string shape_string(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<RowMat<T>>;
template <class T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

template <class T>
void init_weights(Tensor<T>& w, Tensor<T>& b, int fan_in, int fan_out, Init init, Rng& rng) {
  switch (init) {
    case Init::torch_default: {
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (auto& v : w.values()) v = static_cast<T>(u(rng));
      for (auto& v : b.values()) v = static_cast<T>(u(rng));
      break;
    }
    case Init::normal_002: {
      std::normal_distribution<double> n(0.0, 0.02);
      for (auto& v : w.values()) v = static_cast<T>(n(rng));
      b.fill(T{0});
      break;
    }
    case Init::glorot_uniform: {
      const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      std::uniform_real_distribution<double> u(-limit, limit);
      for (auto& v : w.values()) v = static_cast<T>(u(rng));
      b.fill(T{0});
      break;
    }
  }
}

template <class T>
void require_rank(const Tensor<T>& x, int rank, const char* who) {
  if (x.rank() != rank) {
    throw DataError(std::string(who) + ": expected rank-" + std::to_string(rank) + " input, got " +
                    shape_string(x.shape()));
  }
}

}  // namespace

// ---------------------------------------------------------------- Linear

template <class T>
Linear<T>::Linear(int in_features, int out_features, Init init, Rng& rng)
    : in_(in_features), out_(out_features), weight_("weight", {out_features, in_features}), bias_("bias", {out_features}) {
  init_weights(weight_.value, bias_.value, in_, out_, init, rng);
}

template <class T>
Tensor<T> Linear<T>::forward(const Tensor<T>& x, Mode, Rng&) {
  const int batch = x.dim(0);
  if (x.stride0() != static_cast<std::size_t>(in_)) {
    throw DataError("linear: expected " + std::to_string(in_) + " features, got " + shape_string(x.shape()));
  }
  input_ = x;
  Tensor<T> y({batch, out_});
  ConstMatMap<T> X(x.data(), batch, in_);
  ConstMatMap<T> W(weight_.value.data(), out_, in_);
  MatMap<T> Y(y.data(), batch, out_);
  Y.noalias() = X * W.transpose();
  Y.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias_.value.data(), out_);
  return y;
}

template <class T>
Tensor<T> Linear<T>::backward(const Tensor<T>& dy) {
  const int batch = input_.dim(0);
  ConstMatMap<T> dY(dy.data(), batch, out_);
  ConstMatMap<T> X(input_.data(), batch, in_);
  ConstMatMap<T> W(weight_.value.data(), out_, in_);
  MatMap<T>(weight_.grad.data(), out_, in_).noalias() += dY.transpose() * X;
  Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias_.grad.data(), out_) += dY.colwise().sum();
  Tensor<T> dx(input_.shape());
  MatMap<T>(dx.data(), batch, in_).noalias() = dY * W;
  return dx;
}

// ---------------------------------------------------------------- Conv2d

template <class T>
Conv2d<T>::Conv2d(int in_channels, int out_channels, int kernel, int stride, int padding, Init init, Rng& rng)
    : cin_(in_channels),
      cout_(out_channels),
      k_(kernel),
      stride_(stride),
      pad_(padding),
      weight_("weight", {out_channels, in_channels, kernel, kernel}),
      bias_("bias", {out_channels}) {
  init_weights(weight_.value, bias_.value, cin_ * k_ * k_, cout_ * k_ * k_, init, rng);
}

template <class T>
void Conv2d<T>::im2col(const T* x, int h, int w, T* cols) const {
  const int ho = output_extent(h);
  const int wo = output_extent(w);
  const std::size_t plane = static_cast<std::size_t>(ho) * wo;
  for (int c = 0; c < cin_; ++c) {
    const T* xc = x + static_cast<std::size_t>(c) * h * w;
    for (int ki = 0; ki < k_; ++ki) {
      for (int kj = 0; kj < k_; ++kj) {
        T* row = cols + (static_cast<std::size_t>(c * k_ + ki) * k_ + kj) * plane;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride_ - pad_ + ki;
          T* out = row + static_cast<std::size_t>(oy) * wo;
          if (iy < 0 || iy >= h) {
            std::fill(out, out + wo, T{0});
            continue;
          }
          const T* in = xc + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride_ - pad_ + kj;
            out[ox] = (ix >= 0 && ix < w) ? in[ix] : T{0};
          }
        }
      }
    }
  }
}

template <class T>
void Conv2d<T>::col2im(const T* cols, int h, int w, T* dx) const {
  const int ho = output_extent(h);
  const int wo = output_extent(w);
  const std::size_t plane = static_cast<std::size_t>(ho) * wo;
  for (int c = 0; c < cin_; ++c) {
    T* dxc = dx + static_cast<std::size_t>(c) * h * w;
    for (int ki = 0; ki < k_; ++ki) {
      for (int kj = 0; kj < k_; ++kj) {
        const T* row = cols + (static_cast<std::size_t>(c * k_ + ki) * k_ + kj) * plane;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride_ - pad_ + ki;
          if (iy < 0 || iy >= h) continue;
          const T* in = row + static_cast<std::size_t>(oy) * wo;
          T* out = dxc + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride_ - pad_ + kj;
            if (ix >= 0 && ix < w) out[ix] += in[ox];
          }
        }
      }
    }
  }
}

template <class T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x, Mode, Rng&) {
  require_rank(x, 4, "conv2d");
  if (x.dim(1) != cin_) {
    throw DataError("conv2d: expected " + std::to_string(cin_) + " channels, got " + shape_string(x.shape()));
  }
  const int batch = x.dim(0), h = x.dim(2), w = x.dim(3);
  const int ho = output_extent(h), wo = output_extent(w);
  if (ho <= 0 || wo <= 0) throw DataError("conv2d: input " + shape_string(x.shape()) + " too small");
  input_ = x;
  const int ckk = cin_ * k_ * k_;
  const int plane = ho * wo;
  cols_.resize(static_cast<std::size_t>(ckk) * plane);
  Tensor<T> y({batch, cout_, ho, wo});
  ConstMatMap<T> W(weight_.value.data(), cout_, ckk);
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bias(bias_.value.data(), cout_);
  for (int b = 0; b < batch; ++b) {
    im2col(x.data() + static_cast<std::size_t>(b) * x.stride0(), h, w, cols_.data());
    MatMap<T> Y(y.data() + static_cast<std::size_t>(b) * cout_ * plane, cout_, plane);
    Y.noalias() = W * ConstMatMap<T>(cols_.data(), ckk, plane);
    Y.colwise() += bias;
  }
  return y;
}

template <class T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& dy) {
  const int batch = input_.dim(0), h = input_.dim(2), w = input_.dim(3);
  const int ho = output_extent(h), wo = output_extent(w);
  const int ckk = cin_ * k_ * k_;
  const int plane = ho * wo;
  Tensor<T> dx(input_.shape());
  ConstMatMap<T> W(weight_.value.data(), cout_, ckk);
  MatMap<T> dW(weight_.grad.data(), cout_, ckk);
  Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> db(bias_.grad.data(), cout_);
  std::vector<T> dcols(static_cast<std::size_t>(ckk) * plane);
  for (int b = 0; b < batch; ++b) {
    ConstMatMap<T> dY(dy.data() + static_cast<std::size_t>(b) * cout_ * plane, cout_, plane);
    im2col(input_.data() + static_cast<std::size_t>(b) * input_.stride0(), h, w, cols_.data());
    dW.noalias() += dY * ConstMatMap<T>(cols_.data(), ckk, plane).transpose();
    db += dY.rowwise().sum();
    MatMap<T>(dcols.data(), ckk, plane).noalias() = W.transpose() * dY;
    col2im(dcols.data(), h, w, dx.data() + static_cast<std::size_t>(b) * dx.stride0());
  }
  return dx;
}

// ---------------------------------------------------------------- BatchNorm2d

template <class T>
BatchNorm2d<T>::BatchNorm2d(int channels, double momentum, double eps, Init init, Rng* rng)
    : channels_(channels),
      momentum_(momentum),
      eps_(eps),
      gamma_("weight", {channels}),
      beta_("bias", {channels}),
      running_mean_({channels}, T{0}),
      running_var_({channels}, T{1}) {
  gamma_.value.fill(T{1});
  if (init == Init::normal_002 && rng) {
    std::normal_distribution<double> n(1.0, 0.02);
    for (auto& v : gamma_.value.values()) v = static_cast<T>(n(*rng));
  }
}

template <class T>
Tensor<T> BatchNorm2d<T>::forward(const Tensor<T>& x, Mode mode, Rng&) {
  require_rank(x, 4, "batchnorm2d");
  if (x.dim(1) != channels_) throw DataError("batchnorm2d: channel mismatch " + shape_string(x.shape()));
  const int batch = x.dim(0);
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  const std::size_t count = plane * batch;
  mode_ = mode;
  xhat_ = Tensor<T>(x.shape());
  inv_std_.assign(channels_, T{0});
  Tensor<T> y(x.shape());
  for (int c = 0; c < channels_; ++c) {
    double mean, var;
    if (mode == Mode::train) {
      double sum = 0.0;
      for (int b = 0; b < batch; ++b) {
        const T* p = x.data() + (static_cast<std::size_t>(b) * channels_ + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) sum += p[i];
      }
      mean = sum / static_cast<double>(count);
      double sq = 0.0;
      for (int b = 0; b < batch; ++b) {
        const T* p = x.data() + (static_cast<std::size_t>(b) * channels_ + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) sq += (p[i] - mean) * (p[i] - mean);
      }
      var = sq / static_cast<double>(count);
      const double unbiased = count > 1 ? sq / static_cast<double>(count - 1) : var;
      running_mean_[c] = static_cast<T>((1 - momentum_) * running_mean_[c] + momentum_ * mean);
      running_var_[c] = static_cast<T>((1 - momentum_) * running_var_[c] + momentum_ * unbiased);
    } else {
      mean = running_mean_[c];
      var = running_var_[c];
    }
    const T inv = static_cast<T>(1.0 / std::sqrt(var + eps_));
    inv_std_[c] = inv;
    const T g = gamma_.value[c], be = beta_.value[c], m = static_cast<T>(mean);
    for (int b = 0; b < batch; ++b) {
      const std::size_t off = (static_cast<std::size_t>(b) * channels_ + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const T xh = (x[off + i] - m) * inv;
        xhat_[off + i] = xh;
        y[off + i] = g * xh + be;
      }
    }
  }
  return y;
}

template <class T>
Tensor<T> BatchNorm2d<T>::backward(const Tensor<T>& dy) {
  const int batch = xhat_.dim(0);
  const std::size_t plane = static_cast<std::size_t>(xhat_.dim(2)) * xhat_.dim(3);
  const double count = static_cast<double>(plane * batch);
  Tensor<T> dx(xhat_.shape());
  for (int c = 0; c < channels_; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int b = 0; b < batch; ++b) {
      const std::size_t off = (static_cast<std::size_t>(b) * channels_ + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        sum_dy += dy[off + i];
        sum_dy_xhat += dy[off + i] * xhat_[off + i];
      }
    }
    gamma_.grad[c] += static_cast<T>(sum_dy_xhat);
    beta_.grad[c] += static_cast<T>(sum_dy);
    const double g_inv = static_cast<double>(gamma_.value[c]) * inv_std_[c];
    for (int b = 0; b < batch; ++b) {
      const std::size_t off = (static_cast<std::size_t>(b) * channels_ + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        if (mode_ == Mode::train) {
          dx[off + i] = static_cast<T>(g_inv * (dy[off + i] - sum_dy / count - xhat_[off + i] * sum_dy_xhat / count));
        } else {
          dx[off + i] = static_cast<T>(g_inv * dy[off + i]);
        }
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------- Dropout

template <class T>
Tensor<T> Dropout<T>::forward(const Tensor<T>& x, Mode mode, Rng& rng) {
  if (mode == Mode::eval || rate_ <= 0.0) {
    mask_.clear();
    return x;
  }
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate_));
  std::bernoulli_distribution drop(rate_);
  mask_.assign(x.size(), T{0});
  if (channelwise_) {
    require_rank(x, 4, "dropout2d");
    const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
    const std::size_t maps = x.size() / std::max<std::size_t>(plane, 1);
    for (std::size_t m = 0; m < maps; ++m) {
      const T v = drop(rng) ? T{0} : keep_scale;
      std::fill(mask_.begin() + static_cast<std::ptrdiff_t>(m * plane),
                mask_.begin() + static_cast<std::ptrdiff_t>((m + 1) * plane), v);
    }
  } else {
    for (auto& v : mask_) v = drop(rng) ? T{0} : keep_scale;
  }
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * mask_[i];
  return y;
}

template <class T>
Tensor<T> Dropout<T>::backward(const Tensor<T>& dy) {
  if (mask_.empty()) return dy;
  Tensor<T> dx(dy.shape());
  for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = dy[i] * mask_[i];
  return dx;
}

// ---------------------------------------------------------------- activations

template <class T>
Tensor<T> LeakyReLU<T>::forward(const Tensor<T>& x, Mode, Rng&) {
  input_ = x;
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T{0} ? x[i] : slope_ * x[i];
  return y;
}

template <class T>
Tensor<T> LeakyReLU<T>::backward(const Tensor<T>& dy) {
  Tensor<T> dx(dy.shape());
  for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = input_[i] > T{0} ? dy[i] : slope_ * dy[i];
  return dx;
}

template <class T>
Tensor<T> Tanh<T>::forward(const Tensor<T>& x, Mode, Rng&) {
  output_ = Tensor<T>(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) output_[i] = std::tanh(x[i]);
  return output_;
}

template <class T>
Tensor<T> Tanh<T>::backward(const Tensor<T>& dy) {
  Tensor<T> dx(dy.shape());
  for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = dy[i] * (T{1} - output_[i] * output_[i]);
  return dx;
}

// ---------------------------------------------------------------- resampling

template <class T>
Tensor<T> Upsample2x<T>::forward(const Tensor<T>& x, Mode, Rng&) {
  require_rank(x, 4, "upsample");
  in_shape_ = x.shape();
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor<T> y({n, c, 2 * h, 2 * w});
  for (std::size_t m = 0; m < static_cast<std::size_t>(n) * c; ++m) {
    const T* in = x.data() + m * h * w;
    T* out = y.data() + m * 4 * h * w;
    for (int r = 0; r < 2 * h; ++r) {
      const T* src = in + static_cast<std::size_t>(r / 2) * w;
      T* dst = out + static_cast<std::size_t>(r) * 2 * w;
      for (int col = 0; col < 2 * w; ++col) dst[col] = src[col / 2];
    }
  }
  return y;
}

template <class T>
Tensor<T> Upsample2x<T>::backward(const Tensor<T>& dy) {
  const int n = in_shape_[0], c = in_shape_[1], h = in_shape_[2], w = in_shape_[3];
  Tensor<T> dx(in_shape_);
  for (std::size_t m = 0; m < static_cast<std::size_t>(n) * c; ++m) {
    const T* g = dy.data() + m * 4 * h * w;
    T* out = dx.data() + m * h * w;
    for (int r = 0; r < 2 * h; ++r) {
      for (int col = 0; col < 2 * w; ++col) {
        out[static_cast<std::size_t>(r / 2) * w + col / 2] += g[static_cast<std::size_t>(r) * 2 * w + col];
      }
    }
  }
  return dx;
}

template <class T>
Tensor<T> MaxPool2x2<T>::forward(const Tensor<T>& x, Mode, Rng&) {
  require_rank(x, 4, "maxpool");
  in_shape_ = x.shape();
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int ho = h / 2, wo = w / 2;
  if (ho <= 0 || wo <= 0) throw DataError("maxpool: input " + shape_string(x.shape()) + " too small");
  Tensor<T> y({n, c, ho, wo});
  argmax_.assign(y.size(), 0);
  std::size_t o = 0;
  for (std::size_t m = 0; m < static_cast<std::size_t>(n) * c; ++m) {
    const std::size_t base = m * h * w;
    for (int r = 0; r < ho; ++r) {
      for (int col = 0; col < wo; ++col, ++o) {
        std::size_t best = base + static_cast<std::size_t>(2 * r) * w + 2 * col;
        for (int dr = 0; dr < 2; ++dr) {
          for (int dc = 0; dc < 2; ++dc) {
            const std::size_t idx = base + static_cast<std::size_t>(2 * r + dr) * w + 2 * col + dc;
            if (x[idx] > x[best]) best = idx;
          }
        }
        y[o] = x[best];
        argmax_[o] = best;
      }
    }
  }
  return y;
}

template <class T>
Tensor<T> MaxPool2x2<T>::backward(const Tensor<T>& dy) {
  Tensor<T> dx(in_shape_);
  for (std::size_t o = 0; o < dy.size(); ++o) dx[argmax_[o]] += dy[o];
  return dx;
}

template <class T>
Tensor<T> Reshape<T>::forward(const Tensor<T>& x, Mode, Rng&) {
  in_shape_ = x.shape();
  Shape target{x.dim(0)};
  target.insert(target.end(), per_sample_.begin(), per_sample_.end());
  Tensor<T> y = x;
  y.reshape(target);
  return y;
}

template <class T>
Tensor<T> Reshape<T>::backward(const Tensor<T>& dy) {
  Tensor<T> dx = dy;
  dx.reshape(in_shape_);
  return dx;
}

// ---------------------------------------------------------------- Sequential

template <class T>
Tensor<T> Sequential<T>::forward(const Tensor<T>& x, Mode mode, Rng& rng) {
  Tensor<T> h = x;
  for (auto& layer : layers_) h = layer->forward(h, mode, rng);
  return h;
}

template <class T>
Tensor<T> Sequential<T>::backward(const Tensor<T>& dy) {
  Tensor<T> g = dy;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

template <class T>
void Sequential<T>::assign_names(const std::string& prefix) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    for (auto* p : layers_[i]->params()) {
      const auto dot = p->name.rfind('.');
      const std::string base = dot == std::string::npos ? p->name : p->name.substr(dot + 1);
      p->name = prefix + std::to_string(i) + "." + layers_[i]->kind() + "." + base;
    }
  }
}

template <class T>
std::vector<Param<T>*> Sequential<T>::params() {
  std::vector<Param<T>*> out;
  for (auto& layer : layers_) {
    for (auto* p : layer->params()) out.push_back(p);
  }
  return out;
}

template <class T>
std::vector<Buffer<T>> Sequential<T>::buffers(const std::string& prefix) {
  std::vector<Buffer<T>> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    for (auto b : layers_[i]->buffers()) {
      out.push_back({prefix + std::to_string(i) + "." + layers_[i]->kind() + "." + b.name, b.tensor});
    }
  }
  return out;
}

#define MALFORGE_INSTANTIATE(T)     \
  template class Linear<T>;         \
  template class Conv2d<T>;         \
  template class BatchNorm2d<T>;    \
  template class Dropout<T>;        \
  template class LeakyReLU<T>;      \
  template class Tanh<T>;           \
  template class Upsample2x<T>;     \
  template class MaxPool2x2<T>;     \
  template class Reshape<T>;        \
  template class Sequential<T>;

MALFORGE_INSTANTIATE(float)
MALFORGE_INSTANTIATE(double)

}  // namespace malforge::nn
