#include "malforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "malforge/error.hpp"

namespace malforge {

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> labels)
    : labels_(std::move(labels)), counts_(labels_.size() * labels_.size(), 0) {}

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> labels, std::vector<std::int64_t> counts)
    : labels_(std::move(labels)), counts_(std::move(counts)) {
  if (counts_.size() != labels_.size() * labels_.size()) throw DataError("confusion matrix must be square");
  for (auto c : counts_) {
    if (c < 0) throw DataError("confusion matrix counts must be non-negative");
  }
}

std::size_t ConfusionMatrix::index(int truth, int predicted) const {
  if (truth < 0 || predicted < 0 || truth >= size() || predicted >= size()) {
    throw DataError("confusion matrix index out of range");
  }
  return static_cast<std::size_t>(truth) * labels_.size() + static_cast<std::size_t>(predicted);
}

std::int64_t ConfusionMatrix::total() const noexcept {
  std::int64_t t = 0;
  for (auto c : counts_) t += c;
  return t;
}

std::int64_t ConfusionMatrix::trace() const noexcept {
  std::int64_t t = 0;
  for (int i = 0; i < size(); ++i) t += counts_[static_cast<std::size_t>(i) * labels_.size() + i];
  return t;
}

std::int64_t ConfusionMatrix::row_sum(int truth) const {
  std::int64_t t = 0;
  for (int p = 0; p < size(); ++p) t += at(truth, p);
  return t;
}

std::string ConfusionMatrix::to_csv() const {
  std::ostringstream out;
  out << "true\\predicted";
  for (const auto& l : labels_) out << ',' << l;
  out << '\n';
  for (int t = 0; t < size(); ++t) {
    out << labels_[t];
    for (int p = 0; p < size(); ++p) out << ',' << at(t, p);
    out << '\n';
  }
  return out.str();
}

ConfusionMatrix ConfusionMatrix::from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  if (!std::getline(in, line)) throw DataError("empty confusion matrix CSV");
  auto header = split(line);
  if (header.empty()) throw DataError("bad confusion matrix header");
  std::vector<std::string> labels(header.begin() + 1, header.end());
  std::vector<std::int64_t> counts;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != labels.size() + 1) throw DataError("confusion matrix row has wrong width");
    for (std::size_t i = 1; i < cells.size(); ++i) counts.push_back(std::stoll(cells[i]));
  }
  return ConfusionMatrix(std::move(labels), std::move(counts));
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["accuracy"] = accuracy;
  j["balanced_accuracy"] = balanced_accuracy;
  j["labels"] = confusion.labels();
  nlohmann::json rec = nlohmann::json::array();
  for (double r : recall) rec.push_back(std::isnan(r) ? nlohmann::json(nullptr) : nlohmann::json(r));
  j["recall"] = rec;
  nlohmann::json rows = nlohmann::json::array();
  for (int t = 0; t < confusion.size(); ++t) {
    nlohmann::json row = nlohmann::json::array();
    for (int p = 0; p < confusion.size(); ++p) row.push_back(confusion.at(t, p));
    rows.push_back(row);
  }
  j["confusion"] = rows;
  return j.dump(2);
}

EvalReport evaluate_predictions(std::span<const int> truth, std::span<const int> predicted,
                                const std::vector<std::string>& labels) {
  if (truth.empty()) throw DataError("cannot evaluate an empty test set");
  if (truth.size() != predicted.size()) throw DataError("truth and prediction lengths differ");
  const int k = static_cast<int>(labels.size());
  EvalReport report;
  report.confusion = ConfusionMatrix(labels);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= k) throw DataError("unknown label index " + std::to_string(truth[i]));
    if (predicted[i] < 0 || predicted[i] >= k) throw DataError("prediction index out of range");
    report.confusion.add(truth[i], predicted[i]);
  }
  report.accuracy = static_cast<double>(report.confusion.trace()) / static_cast<double>(report.confusion.total());
  report.recall.assign(static_cast<std::size_t>(k), std::numeric_limits<double>::quiet_NaN());
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < k; ++c) {
    const auto n = report.confusion.row_sum(c);
    if (n == 0) continue;
    report.recall[c] = static_cast<double>(report.confusion.at(c, c)) / static_cast<double>(n);
    sum += report.recall[c];
    ++present;
  }
  report.balanced_accuracy = sum / present;
  return report;
}

double balanced_accuracy(std::span<const int> truth, std::span<const int> predicted, int num_classes) {
  std::vector<std::string> labels(static_cast<std::size_t>(num_classes));
  for (int i = 0; i < num_classes; ++i) labels[i] = std::to_string(i);
  return evaluate_predictions(truth, predicted, labels).balanced_accuracy;
}

std::vector<int> argmax_rows(std::span<const double> scores, int cols) {
  if (cols <= 0 || scores.size() % static_cast<std::size_t>(cols) != 0) throw DataError("argmax_rows: bad shape");
  std::vector<int> out(scores.size() / cols);
  for (std::size_t r = 0; r < out.size(); ++r) {
    auto row = scores.subspan(r * cols, cols);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

}  // namespace malforge
