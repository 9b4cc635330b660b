#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "malforge/error.hpp"
#include "malforge/nn/layers.hpp"
#include "malforge/nn/losses.hpp"
#include "malforge/nn/optim.hpp"
#include "malforge/nn/serialize.hpp"
#include "test_support.hpp"

using namespace malforge;
using namespace malforge::nn;

namespace {

Tensor<double> random_tensor(const Shape& shape, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist(0.0, scale);
  Tensor<double> t(shape);
  for (auto& v : t.values()) v = dist(gen);
  return t;
}

double dot(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double rel_error(double a, double b) { return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-8}); }

// Checks input and parameter gradients of a layer against central
// differences of the scalar sum(w * layer(x)). The rng is reseeded before each
// forward so stochastic layers see the same mask every time.
void check_layer(Layer<double>& layer, Tensor<double> x, Mode mode = Mode::train, double tol = 1e-6) {
  auto run = [&](const Tensor<double>& in) {
    Rng rng(99);
    return layer.forward(in, mode, rng);
  };
  const auto y0 = run(x);
  const auto w = random_tensor(y0.shape(), 1234);
  zero_grad(layer.params());
  run(x);
  const auto dx = layer.backward(w);
  constexpr double h = 1e-6;

  for (std::size_t i = 0; i < x.size(); i += std::max<std::size_t>(1, x.size() / 40)) {
    const double orig = x[i];
    x[i] = orig + h;
    const double up = dot(w, run(x));
    x[i] = orig - h;
    const double down = dot(w, run(x));
    x[i] = orig;
    CHECK(rel_error(dx[i], (up - down) / (2 * h)) < tol);
  }
  for (auto* p : layer.params()) {
    for (std::size_t i = 0; i < p->value.size(); i += std::max<std::size_t>(1, p->value.size() / 20)) {
      const double orig = p->value[i];
      p->value[i] = orig + h;
      const double up = dot(w, run(x));
      p->value[i] = orig - h;
      const double down = dot(w, run(x));
      p->value[i] = orig;
      INFO(p->name, " index ", i);
      CHECK(rel_error(p->grad[i], (up - down) / (2 * h)) < tol);
    }
  }
}

}  // namespace

TEST_SUITE("nn") {
  TEST_CASE("linear gradients") {
    Rng rng(1);
    Linear<double> layer(7, 5, Init::torch_default, rng);
    check_layer(layer, random_tensor({3, 7}, 2));
  }

  TEST_CASE("linear matches a hand-computed affine map") {
    Rng rng(1);
    Linear<double> layer(2, 1, Init::torch_default, rng);
    auto ps = layer.params();
    ps[0]->value[0] = 2.0;
    ps[0]->value[1] = -3.0;
    ps[1]->value[0] = 0.5;
    const auto y = layer.forward(Tensor<double>({1, 2}, {1.0, 4.0}), Mode::eval, rng);
    CHECK(y[0] == doctest::Approx(2.0 - 12.0 + 0.5));
  }

  TEST_CASE("conv2d gradients, strided and padded") {
    Rng rng(3);
    Conv2d<double> a(2, 3, 3, 1, 0, Init::normal_002, rng);
    check_layer(a, random_tensor({2, 2, 6, 6}, 4));
    Conv2d<double> b(2, 4, 3, 2, 1, Init::torch_default, rng);
    check_layer(b, random_tensor({2, 2, 8, 8}, 5));
  }

  TEST_CASE("conv2d matches a direct convolution loop") {
    Rng rng(7);
    Conv2d<double> conv(2, 3, 3, 2, 1, Init::torch_default, rng);
    const auto x = random_tensor({1, 2, 7, 7}, 8);
    const auto y = conv.forward(x, Mode::eval, rng);
    const auto& wt = conv.params()[0]->value;
    const auto& bias = conv.params()[1]->value;
    const int out = conv.output_extent(7);
    REQUIRE(y.shape() == Shape{1, 3, out, out});
    for (int o = 0; o < 3; ++o) {
      for (int r = 0; r < out; ++r) {
        for (int c = 0; c < out; ++c) {
          double acc = bias[static_cast<std::size_t>(o)];
          for (int i = 0; i < 2; ++i) {
            for (int kr = 0; kr < 3; ++kr) {
              for (int kc = 0; kc < 3; ++kc) {
                const int rr = r * 2 - 1 + kr, cc = c * 2 - 1 + kc;
                if (rr < 0 || cc < 0 || rr >= 7 || cc >= 7) continue;
                acc += wt[static_cast<std::size_t>(((o * 2 + i) * 3 + kr) * 3 + kc)] *
                       x[static_cast<std::size_t>((i * 7 + rr) * 7 + cc)];
              }
            }
          }
          CHECK(y[static_cast<std::size_t>((o * out + r) * out + c)] == doctest::Approx(acc));
        }
      }
    }
  }

  TEST_CASE("batchnorm gradients in training mode") {
    Rng rng(5);
    BatchNorm2d<double> bn(3, 0.1, 1e-5, Init::normal_002, &rng);
    check_layer(bn, random_tensor({4, 3, 3, 3}, 6, 2.0));
  }

  TEST_CASE("batchnorm normalizes per channel and tracks running stats") {
    BatchNorm2d<double> bn(2);
    Rng rng(1);
    auto x = random_tensor({8, 2, 4, 4}, 10, 3.0);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += 5.0;
    const auto y = bn.forward(x, Mode::train, rng);
    for (int c = 0; c < 2; ++c) {
      double sum = 0, sq = 0;
      int count = 0;
      for (int b = 0; b < 8; ++b) {
        for (int k = 0; k < 16; ++k) {
          const double v = y[static_cast<std::size_t>((b * 2 + c) * 16 + k)];
          sum += v;
          sq += v * v;
          ++count;
        }
      }
      CHECK(sum / count == doctest::Approx(0.0).epsilon(1e-9));
      CHECK(sq / count == doctest::Approx(1.0).epsilon(1e-3));
    }
    auto bufs = bn.buffers();
    CHECK((*bufs[0].tensor)[0] == doctest::Approx(0.5).epsilon(0.15));  // 0.1 * ~5
  }

  TEST_CASE("elementwise layers") {
    Rng rng(1);
    LeakyReLU<double> lrelu(0.2);
    check_layer(lrelu, random_tensor({2, 10}, 11));
    Tanh<double> tanh_layer;
    check_layer(tanh_layer, random_tensor({2, 10}, 12));
    Upsample2x<double> up;
    check_layer(up, random_tensor({2, 3, 3, 3}, 13));
    MaxPool2x2<double> pool;
    check_layer(pool, random_tensor({2, 2, 5, 5}, 14));
    Reshape<double> reshape({4, 2});
    check_layer(reshape, random_tensor({3, 8}, 15));
  }

  TEST_CASE("dropout gradients use the same mask") {
    Dropout<double> d(0.5, false);
    check_layer(d, random_tensor({4, 20}, 16));
    Dropout<double> d2(0.25, true);
    check_layer(d2, random_tensor({4, 3, 2, 2}, 17));
  }

  TEST_CASE("dropout is identity in eval mode and unbiased in train mode") {
    Dropout<double> d(0.25, true);
    Rng rng(3);
    const auto x = Tensor<double>({64, 16, 2, 2}, 1.0);
    CHECK(d.forward(x, Mode::eval, rng) == x);
    const auto y = d.forward(x, Mode::train, rng);
    double sum = 0;
    int zero_channels = 0;
    for (int c = 0; c < 64 * 16; ++c) {
      const double v = y[static_cast<std::size_t>(c) * 4];
      for (int k = 1; k < 4; ++k) REQUIRE(y[static_cast<std::size_t>(c) * 4 + k] == v);
      zero_channels += v == 0.0;
      sum += v;
    }
    CHECK(sum / (64 * 16) == doctest::Approx(1.0).epsilon(0.08));
    CHECK(zero_channels > 0);
  }

  TEST_CASE("bce with logits matches the definition") {
    const Tensor<double> logits({3, 1}, {-2.0, 0.0, 3.0});
    for (double target : {0.0, 1.0}) {
      const auto lg = bce_with_logits(logits, target);
      double expected = 0;
      for (double z : {-2.0, 0.0, 3.0}) {
        const double p = 1.0 / (1.0 + std::exp(-z));
        expected += -(target * std::log(p) + (1 - target) * std::log(1 - p));
      }
      CHECK(lg.loss == doctest::Approx(expected / 3));
      for (int i = 0; i < 3; ++i) {
        const double z = logits[static_cast<std::size_t>(i)];
        CHECK(lg.grad[static_cast<std::size_t>(i)] == doctest::Approx((1 / (1 + std::exp(-z)) - target) / 3));
      }
    }
    CHECK(std::isfinite(bce_with_logits(Tensor<double>({1, 1}, {-800.0}), 1.0).loss));
  }

  TEST_CASE("renormalized sigmoid cross-entropy and its gradient") {
    const auto logits = random_tensor({4, 5}, 21, 2.0);
    const std::vector<int> labels = {0, 4, 2, 2};
    auto loss_of = [&](const Tensor<double>& z) {
      double total = 0;
      for (int b = 0; b < 4; ++b) {
        double denom = 0;
        for (int k = 0; k < 5; ++k) denom += 1 / (1 + std::exp(-z[static_cast<std::size_t>(b * 5 + k)]));
        const double sy = 1 / (1 + std::exp(-z[static_cast<std::size_t>(b * 5 + labels[b])]));
        total += -std::log(sy / denom);
      }
      return total / 4;
    };
    const auto lg = renormalized_sigmoid_ce(logits, labels);
    CHECK(lg.loss == doctest::Approx(loss_of(logits)));
    auto z = logits;
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double orig = z[i];
      z[i] = orig + 1e-6;
      const double up = loss_of(z);
      z[i] = orig - 1e-6;
      const double down = loss_of(z);
      z[i] = orig;
      CHECK(lg.grad[i] == doctest::Approx((up - down) / 2e-6).epsilon(1e-6));
    }
  }

  TEST_CASE("softmax cross-entropy and softmax rows") {
    const auto logits = random_tensor({3, 4}, 31, 3.0);
    const std::vector<int> labels = {1, 3, 0};
    const auto p = softmax(logits);
    for (int b = 0; b < 3; ++b) {
      double s = 0;
      for (int k = 0; k < 4; ++k) s += p[static_cast<std::size_t>(b * 4 + k)];
      CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
    const auto lg = softmax_cross_entropy(logits, labels);
    double expected = 0;
    for (int b = 0; b < 3; ++b) expected -= std::log(p[static_cast<std::size_t>(b * 4 + labels[b])]);
    CHECK(lg.loss == doctest::Approx(expected / 3));
    for (int b = 0; b < 3; ++b) {
      for (int k = 0; k < 4; ++k) {
        const auto i = static_cast<std::size_t>(b * 4 + k);
        CHECK(lg.grad[i] == doctest::Approx((p[i] - (k == labels[b] ? 1.0 : 0.0)) / 3));
      }
    }
    const std::vector<int> bad = {0, 9, 1};
    CHECK_THROWS_AS(softmax_cross_entropy(logits, bad), DataError);
  }

  TEST_CASE("adam follows the bias-corrected update") {
    Param<double> p("w", {2});
    p.value[0] = 1.0;
    p.value[1] = -1.0;
    Adam<double> opt({&p}, {0.1, 0.9, 0.999, 1e-8});
    double m[2] = {0, 0}, v[2] = {0, 0}, w[2] = {1.0, -1.0};
    for (int t = 1; t <= 3; ++t) {
      const double g[2] = {2.0 * w[0], 0.5};
      p.grad[0] = g[0];
      p.grad[1] = g[1];
      opt.step();
      for (int i = 0; i < 2; ++i) {
        m[i] = 0.9 * m[i] + 0.1 * g[i];
        v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
        const double mh = m[i] / (1 - std::pow(0.9, t));
        const double vh = v[i] / (1 - std::pow(0.999, t));
        w[i] -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
        CHECK(p.value[static_cast<std::size_t>(i)] == doctest::Approx(w[i]).epsilon(1e-12));
      }
    }
    CHECK(opt.steps() == 3);
  }

  TEST_CASE("sequential copies are independent and names are stable") {
    Rng rng(4);
    Sequential<double> net;
    net.add<Linear<double>>(3, 4, Init::glorot_uniform, rng);
    net.add<LeakyReLU<double>>(0.0);
    net.add<Linear<double>>(4, 2, Init::glorot_uniform, rng);
    net.assign_names("net.");
    CHECK(net.params()[0]->name == "net.0.linear.weight");
    CHECK(net.params()[3]->name == "net.2.linear.bias");
    Sequential<double> copy = net;
    copy.params()[0]->value[0] += 1.0;
    CHECK(copy.params()[0]->value[0] != net.params()[0]->value[0]);
    CHECK(copy.params()[0]->name == "net.0.linear.weight");
  }

  TEST_CASE("named arrays round trip in both precisions") {
    malforge::testing::TempDir dir("arrays");
    std::vector<NamedArray> arrays = {{"a", {2, 3}, {1, 2, 3, 4, 5, 6.5}}, {"b.c", {1}, {-1e-3}}, {"empty", {0}, {}}};
    save_arrays(dir / "x.bin", arrays, Precision::f64);
    const auto back = load_arrays(dir / "x.bin");
    REQUIRE(back.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(back[i].name == arrays[i].name);
      CHECK(back[i].shape == arrays[i].shape);
      CHECK(back[i].values == arrays[i].values);
    }
    save_arrays(dir / "y.bin", arrays, Precision::f32);
    CHECK(find_array(load_arrays(dir / "y.bin"), "b.c").values[0] == doctest::Approx(-1e-3));
    CHECK_THROWS_AS(find_array(back, "zzz"), DataError);
    malforge::testing::write_bytes(dir / "bad.bin", {1, 2, 3});
    CHECK_THROWS(load_arrays(dir / "bad.bin"));
  }
}
