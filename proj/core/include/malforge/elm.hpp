#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "malforge/corpus.hpp"
#include "malforge/dataset.hpp"
#include "malforge/metrics.hpp"

namespace malforge {

/// Single-hidden-layer network whose hidden weights are random and fixed; only
/// the output weights are fit, by the Moore-Penrose pseudoinverse.
struct ElmModel {
  Eigen::MatrixXd hidden_weights;  // d x H, U[-1,1]
  Eigen::VectorXd hidden_bias;     // H, U[-1,1]
  Eigen::MatrixXd output_weights;  // H x K
  std::string activation = "sigmoid";
  std::vector<std::string> class_names;

  int hidden_units() const noexcept { return static_cast<int>(hidden_bias.size()); }
  int num_classes() const noexcept { return static_cast<int>(output_weights.cols()); }
};

/// Pseudoinverse through a thin SVD; singular values at or below
/// rcond * sigma_max are treated as zero.
Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& a, double rcond = 1e-10);

/// Hidden units used when none are configured: 5000 (32), 50000 (64), 20000 (128).
int default_hidden_units(int image_size);

/// Fits output_weights = pinv(sigmoid(X W + b)) * onehot(labels).
/// num_classes = 0 infers max(label) + 1. Throws ConfigError when H <= 0.
ElmModel elm_train(const Eigen::MatrixXd& features, std::span<const int> labels, int hidden_units,
                   std::uint64_t seed, int num_classes = 0);
ElmModel elm_train(const ImageSet& train, int hidden_units, std::uint64_t seed);

/// sigmoid(X W + b), N x H.
Eigen::MatrixXd elm_hidden(const ElmModel& model, const Eigen::MatrixXd& features);
Eigen::MatrixXd elm_scores(const ElmModel& model, const Eigen::MatrixXd& features);
std::vector<int> elm_predict(const ElmModel& model, const Eigen::MatrixXd& features);

/// Flattened scaled images, N x n^2.
Eigen::MatrixXd image_features(const ImageSet& images);

EvalReport evaluate(const ElmModel& model, const ImageSet& test);
EvalReport evaluate(const ElmModel& model, const DatasetManifest& test);

/// `dir/elm.bin` (float64 arrays) and `dir/elm.json`.
void save_elm(const ElmModel& model, const std::filesystem::path& dir);
ElmModel load_elm(const std::filesystem::path& dir);

}  // namespace malforge
