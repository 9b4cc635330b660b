#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "malforge/corpus.hpp"
#include "malforge/dataset.hpp"
#include "malforge/metrics.hpp"
#include "malforge/nn/layers.hpp"

namespace malforge {

struct CnnConfig {
  int image_size = 32;
  int num_classes = 2;
  int epochs = 10;
  int batch_size = 32;
  std::uint64_t seed = 0;
  double learning_rate = 1e-3;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

struct LayerSummary {
  std::string name;
  nn::Shape output_shape;  // per sample
  std::size_t parameters = 0;
};

/// conv(30, 3x3, relu) -> maxpool -> conv(15, 3x3, relu) -> maxpool ->
/// dropout 0.25 -> flatten -> dense 128 relu -> dropout 0.5 -> dense 50 relu
/// -> dense K softmax. Convolutions are unpadded.
class Cnn {
 public:
  explicit Cnn(const CnnConfig& config);

  const CnnConfig& config() const noexcept { return config_; }
  const std::vector<std::string>& class_names() const noexcept { return class_names_; }
  void set_class_names(std::vector<std::string> names);
  int flat_features() const noexcept { return flat_features_; }

  /// Row-major (N x K) class probabilities.
  std::vector<double> predict_proba(const ImageSet& images) const;
  std::vector<int> predict(const ImageSet& images) const;

  /// Per-layer output shape and parameter count.
  std::vector<LayerSummary> summary() const;

  nn::Sequential<float>& network() noexcept { return net_; }

  void save(const std::filesystem::path& dir) const;
  static Cnn load(const std::filesystem::path& dir);

 private:
  CnnConfig config_;
  std::vector<std::string> class_names_;
  int flat_features_ = 0;
  nn::Sequential<float> net_;
};

/// Throws ConfigError when the image is too small for two pooling stages.
Cnn build_cnn(const CnnConfig& config);

struct CnnTrainResult {
  EvalReport test;
  double train_accuracy = 0.0;
  std::vector<double> epoch_loss;
};

/// Adam on categorical cross-entropy for config.epochs epochs, then a report on
/// `test`. Throws DataError when a class has no training sample or fewer than
/// two classes are present.
CnnTrainResult train_cnn(Cnn& classifier, const ImageSet& train, const ImageSet& test, const CnnConfig& config,
                         const std::function<void(int, double)>& on_epoch = {});
CnnTrainResult train_cnn(Cnn& classifier, const Split& split, const CnnConfig& config);

/// Test labels are matched to the classifier's classes by name.
EvalReport evaluate(const Cnn& classifier, const ImageSet& test);
EvalReport evaluate(const Cnn& classifier, const DatasetManifest& test);

/// Maps each test label to the index of the same class name in `classes`.
/// Throws DataError for a name missing from `classes`.
std::vector<int> align_labels(const ImageSet& test, const std::vector<std::string>& classes);

}  // namespace malforge
