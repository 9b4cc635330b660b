#include "malforge/convert.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "malforge/error.hpp"

namespace fs = std::filesystem;

namespace malforge {

GrayImage bytes_to_image(std::span<const std::uint8_t> data, int n) {
  if (n <= 0) throw ConfigError("image size must be positive");
  const auto needed = static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
  if (data.size() < needed) throw InsufficientBytes(needed, data.size());
  return GrayImage(n, std::vector<std::uint8_t>(data.begin(), data.begin() + static_cast<std::ptrdiff_t>(needed)));
}

ScaledImage scale_pixels(const GrayImage& image) {
  const auto px = image.pixels();
  std::vector<double> values(px.size(), 0.0);
  if (px.empty()) return ScaledImage(image.size(), std::move(values));

  double sum = 0.0;
  for (auto p : px) sum += p;
  const double mean = sum / static_cast<double>(px.size());
  double spread = 0.0;
  for (auto p : px) spread = std::max(spread, std::abs(p - mean));
  if (spread > 0.0) {
    for (std::size_t i = 0; i < px.size(); ++i) values[i] = (px[i] - mean) / spread;
  }
  return ScaledImage(image.size(), std::move(values));
}

FilePrefix read_prefix(const fs::path& path, std::size_t limit) {
  std::error_code ec;
  FilePrefix out;
  out.total_size = fs::file_size(path, ec);
  if (ec) throw IoError("cannot stat " + path.string() + ": " + ec.message());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const auto want = static_cast<std::size_t>(std::min<std::uintmax_t>(out.total_size, limit));
  out.bytes.resize(want);
  in.read(reinterpret_cast<char*>(out.bytes.data()), static_cast<std::streamsize>(want));
  if (static_cast<std::size_t>(in.gcount()) != want) throw IoError("short read on " + path.string());
  return out;
}

std::string converted_image_name(const fs::path& source, int n) {
  return source.stem().string() + "_" + std::to_string(n) + ".png";
}

ConvertResult convert_corpus(const fs::path& in_dir, int n, const fs::path& out_dir) {
  if (n <= 0) throw ConfigError("image size must be positive");
  const DatasetManifest sources = scan_binary_corpus(in_dir);
  const auto needed = static_cast<std::size_t>(n) * static_cast<std::size_t>(n);

  ConvertResult result;
  std::vector<SampleRecord> records;
  std::map<fs::path, fs::path> claimed;  // output -> source
  for (const auto& src : sources.records()) {
    const fs::path target = out_dir / src.family.name / converted_image_name(src.path, n);
    try {
      if (src.byte_length < needed) throw InsufficientBytes(needed, static_cast<std::size_t>(src.byte_length));
      if (auto it = claimed.find(target); it != claimed.end()) {
        throw IoError("output name collides with " + it->second.string());
      }
      const FilePrefix prefix = read_prefix(src.path, needed);
      const GrayImage image = bytes_to_image(prefix.bytes, n);
      fs::create_directories(target.parent_path());
      write_png_gray(target, image);
      claimed.emplace(target, src.path);
      records.push_back({target, {src.family.name, 0}, Realness::real, prefix.total_size});
    } catch (const std::exception& e) {
      result.skipped.push_back({src.path, e.what()});
    }
  }
  if (records.empty()) {
    throw DataError("no samples in " + in_dir.string() + " hold at least " + std::to_string(needed) + " bytes");
  }
  result.manifest = DatasetManifest::from_records(std::move(records), n);
  write_manifest_csv(result.manifest, out_dir / "manifest.csv");
  return result;
}

}  // namespace malforge
