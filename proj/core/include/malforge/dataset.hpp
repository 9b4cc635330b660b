#pragma once

#include <span>
#include <string>
#include <vector>

#include "malforge/corpus.hpp"
#include "malforge/image.hpp"
#include "malforge/nn/tensor.hpp"

namespace malforge {

/// Scaled images held in memory, ready for batching.
struct ImageSet {
  int image_size = 0;
  std::vector<std::string> classes;
  std::vector<int> labels;
  std::vector<float> values;  // size() * image_size^2, row-major per image

  std::size_t size() const noexcept { return labels.size(); }
  int num_classes() const noexcept { return static_cast<int>(classes.size()); }
  std::size_t pixels_per_image() const noexcept { return static_cast<std::size_t>(image_size) * image_size; }

  void add(const ScaledImage& image, int label);

  /// (B, 1, n, n) tensor of the selected images.
  template <class T>
  nn::Tensor<T> batch(std::span<const std::size_t> indices) const;
  template <class T>
  nn::Tensor<T> all() const;
  std::vector<int> batch_labels(std::span<const std::size_t> indices) const;
};

/// Reads every record's PNG, resizes to the manifest's image size when needed
/// and applies scale_pixels. Labels follow the manifest's class indices.
ImageSet load_image_set(const DatasetManifest& manifest);

}  // namespace malforge
