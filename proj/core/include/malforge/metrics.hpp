#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace malforge {

/// Square matrix of counts; rows are true classes, columns predictions.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::vector<std::string> labels);
  ConfusionMatrix(std::vector<std::string> labels, std::vector<std::int64_t> counts);

  int size() const noexcept { return static_cast<int>(labels_.size()); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  std::int64_t at(int truth, int predicted) const { return counts_[index(truth, predicted)]; }
  std::int64_t& at(int truth, int predicted) { return counts_[index(truth, predicted)]; }
  void add(int truth, int predicted, std::int64_t count = 1) { at(truth, predicted) += count; }

  std::int64_t total() const noexcept;
  std::int64_t trace() const noexcept;
  std::int64_t row_sum(int truth) const;

  /// CSV with a header row of class names; each row starts with its class name.
  std::string to_csv() const;
  static ConfusionMatrix from_csv(const std::string& text);

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t index(int truth, int predicted) const;

  std::vector<std::string> labels_;
  std::vector<std::int64_t> counts_;
};

struct EvalReport {
  double accuracy = 0.0;
  /// Mean recall over classes that occur in the test set.
  double balanced_accuracy = 0.0;
  ConfusionMatrix confusion;
  std::vector<double> recall;  // NaN for classes absent from the test set

  std::string to_json() const;
};

/// Throws DataError on empty input, length mismatch, or labels outside [0, K).
EvalReport evaluate_predictions(std::span<const int> truth, std::span<const int> predicted,
                                const std::vector<std::string>& labels);

double balanced_accuracy(std::span<const int> truth, std::span<const int> predicted, int num_classes);

/// Index of the row maximum for each of the rows of a (rows x cols) matrix.
std::vector<int> argmax_rows(std::span<const double> scores, int cols);

}  // namespace malforge
