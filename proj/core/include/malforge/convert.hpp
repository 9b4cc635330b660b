#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "malforge/corpus.hpp"
#include "malforge/image.hpp"

namespace malforge {

/// Row-major fill of the first n*n bytes: pixel(r, c) = data[r*n + c].
/// Throws InsufficientBytes when data holds fewer than n*n bytes.
GrayImage bytes_to_image(std::span<const std::uint8_t> data, int n);

/// Per-image centering: v = (p - mean) / max|p - mean|. Constant images map to zeros.
ScaledImage scale_pixels(const GrayImage& image);

/// Reads at most `limit` leading bytes of a file, plus its total size.
struct FilePrefix {
  std::vector<std::uint8_t> bytes;
  std::uintmax_t total_size = 0;
};
FilePrefix read_prefix(const std::filesystem::path& path, std::size_t limit);

struct ConvertResult {
  DatasetManifest manifest;
  std::vector<SkippedFile> skipped;  // under-length and unreadable inputs
};

/// Converts `in_dir/<family>/<file>` binaries into `out_dir/<family>/<stem>_<n>.png`
/// and writes `out_dir/manifest.csv`. Files shorter than n*n bytes are excluded.
/// Throws DataError when nothing qualifies, ConfigError when in_dir is not a directory.
ConvertResult convert_corpus(const std::filesystem::path& in_dir, int n,
                             const std::filesystem::path& out_dir);

/// Name of the converted image for a given source file.
std::string converted_image_name(const std::filesystem::path& source, int n);

}  // namespace malforge
