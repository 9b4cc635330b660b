#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace malforge {

enum class Realness { real, fake };

const char* to_string(Realness r) noexcept;
Realness parse_realness(const std::string& text);

struct FamilyLabel {
  std::string name;
  int index = 0;

  friend bool operator==(const FamilyLabel&, const FamilyLabel&) = default;
};

struct SampleRecord {
  std::filesystem::path path;
  FamilyLabel family;
  Realness realness = Realness::real;
  std::uintmax_t byte_length = 0;

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

struct SkippedFile {
  std::filesystem::path path;
  std::string reason;
};

/// Ordered, labelled list of samples.
///
/// Records are kept sorted by (path, family name). Class indices follow the
/// canonical order: real families sorted by name, then fake families sorted by
/// name. For an all-real manifest this is plain lexicographic order.
class DatasetManifest {
 public:
  DatasetManifest() = default;

  /// Sorts the records and (re)assigns family indices. Throws DataError on
  /// a record whose family name is empty.
  static DatasetManifest from_records(std::vector<SampleRecord> records, int image_size,
                                      std::uint64_t seed = 0);

  const std::vector<SampleRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  int image_size() const noexcept { return image_size_; }
  std::uint64_t seed() const noexcept { return seed_; }

  const std::vector<std::string>& class_names() const noexcept { return classes_; }
  int num_classes() const noexcept { return static_cast<int>(classes_.size()); }
  /// Throws DataError for an unknown name.
  int label_index(const std::string& name) const;
  const std::string& label_name(int index) const;

  /// Record count per class index.
  std::vector<std::size_t> class_counts() const;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;

 private:
  std::vector<SampleRecord> records_;
  std::vector<std::string> classes_;
  int image_size_ = 0;
  std::uint64_t seed_ = 0;
};

struct Split {
  DatasetManifest train;
  DatasetManifest test;
};

struct LoadResult {
  DatasetManifest manifest;
  std::vector<SkippedFile> skipped;
};

/// Scans `root_dir/<family>/<image>` for 8-bit grayscale PNGs. Unreadable or
/// wrong-mode images are skipped and reported. Throws ConfigError when root_dir
/// is missing and DataError when it holds no family directories.
LoadResult load_image_corpus(const std::filesystem::path& root_dir, int image_size);

/// Exactly per_class records from every class, chosen by a seeded shuffle.
/// Throws DataError naming the first family with fewer than per_class records.
DatasetManifest stratified_sample(const DatasetManifest& manifest, std::size_t per_class,
                                  std::uint64_t seed);

/// Per-class stratified split with |train_c| = round(train_fraction * N_c).
/// Throws ConfigError for a fraction outside (0,1) and DataError for a class with < 2 samples.
Split split_train_test(const DatasetManifest& manifest, double train_fraction, std::uint64_t seed);

/// Writes families * samples_per_family deterministic binaries to
/// `out_dir/famNN/sampleNNNN.bin`. Byte i of sample s in family f is
/// (a_f*i + b_f*s + c_f + jitter) mod 256 with per-family constants from the seed.
std::filesystem::path synth_corpus(const std::filesystem::path& out_dir, int families,
                                   int samples_per_family, std::size_t bytes_per_sample,
                                   std::uint64_t seed);

/// Manifest of raw binaries laid out as `root/<family>/<file>`.
DatasetManifest scan_binary_corpus(const std::filesystem::path& root_dir);

/// CSV with header `path,family,realness,byte_length`. Paths under the CSV's
/// directory are written relative to it.
void write_manifest_csv(const DatasetManifest& manifest, const std::filesystem::path& csv_path);
std::string manifest_csv_text(const DatasetManifest& manifest, const std::filesystem::path& base_dir);
/// Relative paths resolve against the CSV's directory.
DatasetManifest read_manifest_csv(const std::filesystem::path& csv_path, int image_size,
                                  std::uint64_t seed = 0);

}  // namespace malforge
