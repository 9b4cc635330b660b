#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "malforge/corpus.hpp"
#include "malforge/dataset.hpp"
#include "malforge/image.hpp"
#include "malforge/nn/layers.hpp"

namespace malforge {

struct GanConfig {
  int image_size = 32;
  int num_classes = 2;
  int latent_dim = 100;
  int epochs = 1;
  int num_batches = 1;  // batches per epoch
  std::uint64_t seed = 0;
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  /// Divides every channel width; 1 is the full architecture.
  int width_divisor = 1;
  /// Persist a checkpoint every this many epochs (0 disables).
  int checkpoint_every = 0;
  std::filesystem::path checkpoint_dir;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  /// ceil(n / num_batches).
  std::size_t batch_size(std::size_t n) const;
  /// 128 * (n/4)^2 at full width.
  int projection_features() const;
  /// 128 * (n/16)^2 at full width.
  int discriminator_features() const;
};

struct LatentBatch {
  int latent_dim = 0;
  std::vector<float> noise;  // size() x latent_dim
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
};

/// Label-conditioned generator: the class embedding multiplies the noise
/// elementwise, then projection -> BN -> up -> conv -> BN/lrelu -> up -> conv
/// -> BN/lrelu -> conv -> tanh.
template <class T>
class Generator {
 public:
  Generator(const GanConfig& config, Rng& rng);

  /// noise is (B, latent_dim). Returns (B, 1, n, n) in [-1, 1].
  nn::Tensor<T> forward(const nn::Tensor<T>& noise, std::span<const int> labels, nn::Mode mode, Rng& rng);
  void backward(const nn::Tensor<T>& d_images);

  std::vector<nn::Param<T>*> params();
  std::vector<nn::Buffer<T>> buffers() { return body_.buffers("generator."); }
  int projection_features() const noexcept { return projection_features_; }
  int num_classes() const noexcept { return num_classes_; }

 private:
  int num_classes_;
  int latent_dim_;
  int projection_features_;
  nn::Param<T> embedding_;  // num_classes x latent_dim
  nn::Sequential<T> body_;
  nn::Tensor<T> noise_;
  std::vector<int> labels_;
};

template <class T>
struct DiscriminatorLogits {
  nn::Tensor<T> validity;  // (B, 1)
  nn::Tensor<T> classes;   // (B, K)
};

/// Stride-2 conv stack 1->16->32->64->128 with leaky ReLU, channel dropout and
/// batch norm, followed by an adversarial head (1) and an auxiliary head (K).
template <class T>
class Discriminator {
 public:
  Discriminator(const GanConfig& config, Rng& rng);

  DiscriminatorLogits<T> forward(const nn::Tensor<T>& images, nn::Mode mode, Rng& rng);
  /// Returns the gradient with respect to the images.
  nn::Tensor<T> backward(const nn::Tensor<T>& d_validity, const nn::Tensor<T>& d_classes);

  std::vector<nn::Param<T>*> params();
  std::vector<nn::Buffer<T>> buffers() { return body_.buffers("discriminator."); }
  int flat_features() const noexcept { return flat_features_; }
  int image_size() const noexcept { return image_size_; }

 private:
  int image_size_;
  int flat_features_;
  nn::Sequential<T> body_;
  nn::Sequential<T> adversarial_;
  nn::Sequential<T> auxiliary_;
};

template <class T>
struct GanModelT {
  GanConfig config;
  std::vector<std::string> class_names;
  Generator<T> generator;
  Discriminator<T> discriminator;
};

using GanModel = GanModelT<float>;

/// Discriminator objective 0.5*(L_real + L_fake), each half being
/// 0.5*(BCE(validity) + auxiliary class loss). Accumulates discriminator
/// gradients (fakes are treated as constants) and returns the loss.
template <class T>
double discriminator_loss_and_grad(GanModelT<T>& model, const nn::Tensor<T>& real, std::span<const int> real_labels,
                                   const nn::Tensor<T>& fake, std::span<const int> fake_labels, Rng& rng);

/// Generator objective 0.5*(BCE(validity, 1) + auxiliary class loss) on
/// already-generated fakes. Backpropagates through the discriminator into the
/// generator (whose forward cache must belong to `fake`) and returns the loss.
template <class T>
double generator_loss_and_grad(GanModelT<T>& model, const nn::Tensor<T>& fake, std::span<const int> fake_labels,
                               Rng& rng);

template <class T>
GanModelT<T> build_gan_t(const GanConfig& config, std::uint64_t seed);

/// Validates the configuration (image size divisible by 16) and initializes
/// both networks deterministically from `seed`.
GanModel build_gan(const GanConfig& config, std::uint64_t seed);

/// Standard-normal noise and uniform labels in [0, num_classes).
LatentBatch sample_latent(int batch, const GanConfig& config, std::uint64_t seed);

/// Generator output in inference mode. Throws DataError on a label >= K.
std::vector<ScaledImage> generate(const GanModel& model, const LatentBatch& latent);

struct Discrimination {
  std::vector<double> validity;      // B, in [0,1]
  std::vector<double> class_scores;  // B x K, per-class sigmoid
  int num_classes = 0;

  /// argmax of each row of class_scores.
  std::vector<int> predicted_classes() const;
};

/// Both heads in one inference-mode forward pass.
Discrimination discriminate(const GanModel& model, std::span<const ScaledImage> images);
Discrimination discriminate(const GanModel& model, const ImageSet& images);

struct LossPoint {
  long iteration = 0;
  double g_loss = 0.0;
  double d_loss = 0.0;
};

struct AccuracyPoint {
  int epoch = 0;
  double balanced_accuracy = 0.0;
};

struct TrainingTrace {
  std::vector<LossPoint> losses;
  std::vector<AccuracyPoint> accuracy;

  void write_csv(const std::filesystem::path& path) const;
};

struct TrainingResult {
  GanModel model;
  TrainingTrace trace;
};

struct TrainOptions {
  /// Real images scored by the auxiliary head after every epoch. Optional.
  const ImageSet* holdout = nullptr;
  /// Called after every epoch with (epoch, mean g_loss, mean d_loss).
  std::function<void(int, double, double)> on_epoch;
};

/// Alternating AC-GAN updates: a discriminator step on a real batch and a
/// generated batch, then a generator step. Throws TrainingError on a
/// non-finite loss.
TrainingResult train_acgan(const ImageSet& train, const GanConfig& config, const TrainOptions& options = {});
TrainingResult train_acgan(const DatasetManifest& train, const GanConfig& config, const TrainOptions& options = {});

/// Balanced accuracy of the auxiliary head's argmax over labelled images.
double discriminator_accuracy(const GanModel& model, const ImageSet& test);
double discriminator_accuracy(const GanModel& model, const DatasetManifest& test);

/// Writes per_class images per family to `out_dir/<family>/fake_NNNN.png`,
/// plus `out_dir/manifest.csv`. Records are marked fake.
DatasetManifest sample_fake_dataset(const GanModel& model, std::size_t per_class,
                                    const std::filesystem::path& out_dir, std::uint64_t seed);

/// `dir/model.bin` (named float32 arrays, including optimizer-free buffers)
/// and `dir/config.json`.
void save_gan(const GanModel& model, const std::filesystem::path& dir);
GanModel load_gan(const std::filesystem::path& dir);

}  // namespace malforge
