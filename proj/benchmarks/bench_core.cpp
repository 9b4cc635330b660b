#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include <Eigen/Dense>

#include "malforge/acgan.hpp"
#include "malforge/convert.hpp"
#include "malforge/elm.hpp"
#include "malforge/nn/layers.hpp"

namespace {

using namespace malforge;

std::vector<std::uint8_t> random_bytes(std::size_t n) {
  std::mt19937 gen(1);
  std::vector<std::uint8_t> v(n);
  for (auto& b : v) b = static_cast<std::uint8_t>(gen());
  return v;
}

void BM_BytesToImage(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto bytes = random_bytes(static_cast<std::size_t>(n) * n);
  for (auto _ : state) benchmark::DoNotOptimize(bytes_to_image(bytes, n));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(bytes.size()));
}
BENCHMARK(BM_BytesToImage)->Arg(32)->Arg(64)->Arg(128)->Arg(512);

void BM_ScalePixels(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const GrayImage img = bytes_to_image(random_bytes(static_cast<std::size_t>(n) * n), n);
  for (auto _ : state) benchmark::DoNotOptimize(scale_pixels(img));
}
BENCHMARK(BM_ScalePixels)->Arg(32)->Arg(128);

void BM_ConvForward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(3);
  nn::Conv2d<float> conv(64, 64, 3, 1, 1, nn::Init::normal_002, rng);
  nn::Tensor<float> x({16, 64, n, n});
  std::normal_distribution<float> d(0.0f, 1.0f);
  for (auto& v : x.values()) v = d(rng);
  for (auto _ : state) benchmark::DoNotOptimize(conv.forward(x, nn::Mode::train, rng));
}
BENCHMARK(BM_ConvForward)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_GanIteration(benchmark::State& state) {
  GanConfig c;
  c.image_size = 32;
  c.num_classes = 4;
  auto model = build_gan_t<float>(c, 1);
  Rng rng(2);
  const int batch = static_cast<int>(state.range(0));
  nn::Tensor<float> real({batch, 1, 32, 32});
  nn::Tensor<float> noise({batch, c.latent_dim});
  std::normal_distribution<float> d(0.0f, 1.0f);
  for (auto& v : real.values()) v = std::tanh(d(rng));
  for (auto& v : noise.values()) v = d(rng);
  std::vector<int> labels(static_cast<std::size_t>(batch));
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 4);
  for (auto _ : state) {
    const auto fake = model.generator.forward(noise, labels, nn::Mode::train, rng);
    benchmark::DoNotOptimize(discriminator_loss_and_grad(model, real, labels, fake, labels, rng));
    benchmark::DoNotOptimize(generator_loss_and_grad(model, fake, labels, rng));
  }
}
BENCHMARK(BM_GanIteration)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_ElmTrain(benchmark::State& state) {
  const int hidden = static_cast<int>(state.range(0));
  std::mt19937 gen(4);
  std::normal_distribution<double> d(0.0, 1.0);
  Eigen::MatrixXd x(800, 1024);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = d(gen);
  std::vector<int> y(800);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<int>(i % 8);
  for (auto _ : state) benchmark::DoNotOptimize(elm_train(x, y, hidden, 5));
}
BENCHMARK(BM_ElmTrain)->Arg(256)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
