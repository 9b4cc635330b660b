#include "malforge/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "malforge/error.hpp"
#include "malforge/image.hpp"
#include "malforge/random.hpp"

namespace fs = std::filesystem;

namespace malforge {

const char* to_string(Realness r) noexcept { return r == Realness::real ? "real" : "fake"; }

Realness parse_realness(const std::string& text) {
  if (text == "real") return Realness::real;
  if (text == "fake") return Realness::fake;
  throw DataError("invalid realness '" + text + "' (expected real or fake)");
}

DatasetManifest DatasetManifest::from_records(std::vector<SampleRecord> records, int image_size,
                                              std::uint64_t seed) {
  std::set<std::string> real_names;
  std::set<std::string> fake_names;
  for (const auto& r : records) {
    if (r.family.name.empty()) throw DataError("record " + r.path.string() + " has an empty family");
    (r.realness == Realness::real ? real_names : fake_names).insert(r.family.name);
  }
  DatasetManifest m;
  m.classes_.assign(real_names.begin(), real_names.end());
  for (const auto& name : fake_names) {
    if (!real_names.count(name)) m.classes_.push_back(name);
  }
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < m.classes_.size(); ++i) index[m.classes_[i]] = static_cast<int>(i);
  for (auto& r : records) r.family.index = index.at(r.family.name);

  std::sort(records.begin(), records.end(), [](const SampleRecord& a, const SampleRecord& b) {
    const auto pa = a.path.generic_string();
    const auto pb = b.path.generic_string();
    if (pa != pb) return pa < pb;
    return a.family.name < b.family.name;
  });
  m.records_ = std::move(records);
  m.image_size_ = image_size;
  m.seed_ = seed;
  return m;
}

int DatasetManifest::label_index(const std::string& name) const {
  auto it = std::find(classes_.begin(), classes_.end(), name);
  if (it == classes_.end()) throw DataError("unknown label '" + name + "'");
  return static_cast<int>(it - classes_.begin());
}

const std::string& DatasetManifest::label_name(int index) const {
  if (index < 0 || index >= num_classes()) {
    throw DataError("label index " + std::to_string(index) + " out of range");
  }
  return classes_[static_cast<std::size_t>(index)];
}

std::vector<std::size_t> DatasetManifest::class_counts() const {
  std::vector<std::size_t> counts(classes_.size(), 0);
  for (const auto& r : records_) ++counts[static_cast<std::size_t>(r.family.index)];
  return counts;
}

namespace {

std::vector<fs::path> sorted_entries(const fs::path& dir, bool directories) {
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (directories ? entry.is_directory() : entry.is_regular_file()) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::vector<const SampleRecord*>> group_by_class(const DatasetManifest& m) {
  std::vector<std::vector<const SampleRecord*>> groups(static_cast<std::size_t>(m.num_classes()));
  for (const auto& r : m.records()) groups[static_cast<std::size_t>(r.family.index)].push_back(&r);
  return groups;
}

}  // namespace

LoadResult load_image_corpus(const fs::path& root_dir, int image_size) {
  if (image_size <= 0) throw ConfigError("image_size must be positive");
  if (!fs::is_directory(root_dir)) throw ConfigError("corpus directory not found: " + root_dir.string());
  const auto families = sorted_entries(root_dir, true);
  if (families.empty()) throw DataError("no families found in " + root_dir.string());

  LoadResult result;
  std::vector<SampleRecord> records;
  for (const auto& family_dir : families) {
    const std::string family = family_dir.filename().string();
    for (const auto& file : sorted_entries(family_dir, false)) {
      try {
        (void)read_png_gray(file);
      } catch (const std::exception& e) {
        result.skipped.push_back({file, e.what()});
        continue;
      }
      records.push_back({file, {family, 0}, Realness::real, fs::file_size(file)});
    }
  }
  result.manifest = DatasetManifest::from_records(std::move(records), image_size);
  return result;
}

DatasetManifest stratified_sample(const DatasetManifest& manifest, std::size_t per_class,
                                  std::uint64_t seed) {
  std::vector<SampleRecord> picked;
  const auto groups = group_by_class(manifest);
  for (std::size_t c = 0; c < groups.size(); ++c) {
    auto members = groups[c];
    if (members.size() < per_class) {
      throw DataError("family '" + manifest.label_name(static_cast<int>(c)) + "' has " +
                      std::to_string(members.size()) + " records, fewer than " +
                      std::to_string(per_class));
    }
    Rng rng(derive_seed(seed, manifest.label_name(static_cast<int>(c))));
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t i = 0; i < per_class; ++i) picked.push_back(*members[i]);
  }
  return DatasetManifest::from_records(std::move(picked), manifest.image_size(), seed);
}

Split split_train_test(const DatasetManifest& manifest, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train_fraction must lie in (0,1)");
  }
  std::vector<SampleRecord> train;
  std::vector<SampleRecord> test;
  const auto groups = group_by_class(manifest);
  for (std::size_t c = 0; c < groups.size(); ++c) {
    auto members = groups[c];
    if (members.size() < 2) {
      throw DataError("class '" + manifest.label_name(static_cast<int>(c)) +
                      "' has fewer than 2 samples; cannot split");
    }
    Rng rng(derive_seed(seed, "split/" + manifest.label_name(static_cast<int>(c))));
    std::shuffle(members.begin(), members.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(members.size())));
    for (std::size_t i = 0; i < members.size(); ++i) (i < n_train ? train : test).push_back(*members[i]);
  }
  return {DatasetManifest::from_records(std::move(train), manifest.image_size(), seed),
          DatasetManifest::from_records(std::move(test), manifest.image_size(), seed)};
}

fs::path synth_corpus(const fs::path& out_dir, int families, int samples_per_family,
                      std::size_t bytes_per_sample, std::uint64_t seed) {
  if (bytes_per_sample < 1) throw ConfigError("bytes_per_sample must be >= 1");
  if (families < 1 || families > 100) throw ConfigError("families must lie in [1,100]");
  if (samples_per_family < 0) throw ConfigError("samples_per_family must be >= 0");

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  // Distinct odd slopes in [1,127]: two families agree on at most 1/4 of positions.
  std::vector<unsigned> slopes(64);
  std::iota(slopes.begin(), slopes.end(), 0u);
  for (auto& s : slopes) s = 2 * s + 1;
  Rng family_rng(derive_seed(seed, "synth/families"));
  std::shuffle(slopes.begin(), slopes.end(), family_rng);

  for (int f = 0; f < families; ++f) {
    const unsigned a = slopes[static_cast<std::size_t>(f) % slopes.size()] +
                       (f >= 64 ? 128u : 0u);
    std::uniform_int_distribution<unsigned> byte_dist(0, 255);
    const unsigned b = byte_dist(family_rng) | 1u;
    const unsigned c = byte_dist(family_rng);

    char family_name[16];
    std::snprintf(family_name, sizeof family_name, "fam%02d", f);
    const fs::path family_dir = out_dir / family_name;
    fs::create_directories(family_dir, ec);
    if (ec) throw IoError("cannot create " + family_dir.string() + ": " + ec.message());

    std::vector<char> buffer(bytes_per_sample);
    for (int s = 0; s < samples_per_family; ++s) {
      Rng jitter_rng(derive_seed(seed, static_cast<std::uint64_t>(f) * 1000003ULL + static_cast<std::uint64_t>(s)));
      std::uniform_int_distribution<unsigned> jitter(0, 3);
      for (std::size_t i = 0; i < bytes_per_sample; ++i) {
        const auto v = a * static_cast<unsigned>(i) + b * static_cast<unsigned>(s) + c + jitter(jitter_rng);
        buffer[i] = static_cast<char>(v & 0xffu);
      }
      char file_name[32];
      std::snprintf(file_name, sizeof file_name, "sample%04d.bin", s);
      std::ofstream out(family_dir / file_name, std::ios::binary | std::ios::trunc);
      out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
      if (!out) throw IoError("cannot write " + (family_dir / file_name).string());
    }
  }
  return out_dir;
}

DatasetManifest scan_binary_corpus(const fs::path& root_dir) {
  if (!fs::is_directory(root_dir)) throw ConfigError("corpus directory not found: " + root_dir.string());
  std::vector<SampleRecord> records;
  for (const auto& family_dir : sorted_entries(root_dir, true)) {
    for (const auto& file : sorted_entries(family_dir, false)) {
      records.push_back({file, {family_dir.filename().string(), 0}, Realness::real, fs::file_size(file)});
    }
  }
  return DatasetManifest::from_records(std::move(records), 0);
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  return fields;
}

std::string relative_if_inside(const fs::path& path, const fs::path& base) {
  if (base.empty()) return path.generic_string();
  const auto rel = path.lexically_normal().lexically_relative(base.lexically_normal());
  if (rel.empty() || *rel.begin() == "..") return path.generic_string();
  return rel.generic_string();
}

}  // namespace

std::string manifest_csv_text(const DatasetManifest& manifest, const fs::path& base_dir) {
  std::ostringstream out;
  out << "path,family,realness,byte_length\n";
  for (const auto& r : manifest.records()) {
    out << csv_field(relative_if_inside(r.path, base_dir)) << ',' << csv_field(r.family.name) << ','
        << to_string(r.realness) << ',' << r.byte_length << '\n';
  }
  return out.str();
}

void write_manifest_csv(const DatasetManifest& manifest, const fs::path& csv_path) {
  if (csv_path.has_parent_path()) fs::create_directories(csv_path.parent_path());
  std::ofstream out(csv_path, std::ios::trunc);
  out << manifest_csv_text(manifest, csv_path.parent_path());
  if (!out) throw IoError("cannot write " + csv_path.string());
}

DatasetManifest read_manifest_csv(const fs::path& csv_path, int image_size, std::uint64_t seed) {
  std::ifstream in(csv_path);
  if (!in) throw IoError("cannot open manifest " + csv_path.string());
  std::string line;
  if (!std::getline(in, line) || line != "path,family,realness,byte_length") {
    throw DataError(csv_path.string() + ": missing manifest header");
  }
  std::vector<SampleRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 4) {
      throw DataError(csv_path.string() + ":" + std::to_string(line_no) + ": expected 4 fields");
    }
    fs::path p(fields[0]);
    if (p.is_relative()) p = csv_path.parent_path() / p;
    std::uintmax_t length = 0;
    try {
      length = std::stoull(fields[3]);
    } catch (const std::exception&) {
      throw DataError(csv_path.string() + ":" + std::to_string(line_no) + ": bad byte_length");
    }
    records.push_back({p, {fields[1], 0}, parse_realness(fields[2]), length});
  }
  return DatasetManifest::from_records(std::move(records), image_size, seed);
}

}  // namespace malforge
