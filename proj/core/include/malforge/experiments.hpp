#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "malforge/acgan.hpp"
#include "malforge/cnn.hpp"
#include "malforge/corpus.hpp"
#include "malforge/metrics.hpp"

namespace malforge {

/// Suffix marking a generated class: "<family>_fake".
inline constexpr std::string_view kFakeSuffix = "_fake";

struct ClassTag {
  std::string family;
  Realness realness = Realness::real;
};

/// "<family>" is real, "<family>_fake" is fake. Throws DataError on an empty family.
ClassTag parse_class_label(const std::string& label);

/// Merges real and generated samples into 2K classes: `<family>` and
/// `<family>_fake`, all real classes (sorted) before all fake classes (sorted).
/// Throws DataError when the family sets or image sizes differ, or either side is empty.
DatasetManifest build_real_fake_dataset(const DatasetManifest& real, const DatasetManifest& fake);

enum class CondensedColumn { real_same = 0, fake_same = 1, real_other = 2, fake_other = 3 };

/// Rows {real, fake} (true realness) by columns {real-same, fake-same,
/// real-other, fake-other} (predicted realness, family agreement).
struct CondensedMatrix {
  std::array<std::array<std::int64_t, 4>, 2> counts{};

  std::int64_t at(Realness row, CondensedColumn column) const {
    return counts[static_cast<std::size_t>(row)][static_cast<std::size_t>(column)];
  }
  std::int64_t row_total(Realness row) const;
  std::int64_t total() const;
  std::string to_csv() const;

  friend bool operator==(const CondensedMatrix&, const CondensedMatrix&) = default;
};

CondensedMatrix condense(const ConfusionMatrix& cm);

/// Fraction of samples whose predicted realness matches their true realness,
/// ignoring family. Throws DataError on an empty matrix.
double real_fake_accuracy(const ConfusionMatrix& cm);

struct SynthSpec {
  int families = 4;
  int samples_per_family = 200;
  std::size_t bytes_per_sample = 4096;
};

struct ExperimentConfig {
  std::string dataset_id = "synthetic";
  int image_size = 32;
  /// Raw binaries `<family>/<file>` to convert. Takes precedence over image_dir.
  std::filesystem::path binary_dir;
  /// Grayscale image corpus `<family>/<image>.png`.
  std::filesystem::path image_dir;
  /// Used when neither directory is set.
  SynthSpec synth;
  std::size_t per_class = 100;
  double train_fraction = 0.7;
  GanConfig acgan;
  CnnConfig cnn;
  /// 0 selects default_hidden_units(image_size).
  int elm_hidden_units = 0;
  std::uint64_t seed = 0;
  std::filesystem::path runs_root = "runs";

  /// Throws ConfigError naming the offending field.
  void validate() const;
  /// Canonical JSON echo of every field except runs_root.
  std::string echo_json() const;
  /// 16 hex digits of FNV-1a over echo_json().
  std::string run_id() const;
};

struct StageStatus {
  std::string name;
  std::string status;  // "ok", "failed", "skipped"
  std::string error;
  double seconds = 0.0;
};

struct ExperimentResult {
  std::filesystem::path run_dir;
  std::string summary_json;
  std::vector<StageStatus> stages;
  bool success = false;

  double acgan_balanced_acc = 0.0;
  EvalReport cnn;
  EvalReport elm;
  double cnn_real_fake_acc = 0.0;
  double elm_real_fake_acc = 0.0;
  double cnn_train_acc = 0.0;
  double generator_loss_first_decile = 0.0;
  double generator_loss_last_decile = 0.0;
};

/// Runs the full protocol in `runs_root/<run_id>/`: data, acgan, fakes,
/// dataset, cnn, elm. A failing stage is recorded and its dependents skipped;
/// summary.json is always written. Progress lines go to `log` when given.
ExperimentResult run_experiment(const ExperimentConfig& config, std::ostream* log = nullptr);

/// Mean of the first and last tenth of a series (at least one element each).
std::pair<double, double> decile_means(const std::vector<double>& series);

}  // namespace malforge
