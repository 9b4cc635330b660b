#include "malforge/dataset.hpp"

#include "malforge/convert.hpp"
#include "malforge/error.hpp"

namespace malforge {

void ImageSet::add(const ScaledImage& image, int label) {
  if (image.size() != image_size) throw DataError("image size does not match image set");
  if (label < 0 || label >= num_classes()) throw DataError("label out of range for image set");
  labels.push_back(label);
  values.insert(values.end(), image.values().begin(), image.values().end());
}

template <class T>
nn::Tensor<T> ImageSet::batch(std::span<const std::size_t> indices) const {
  const std::size_t per = pixels_per_image();
  nn::Tensor<T> out({static_cast<int>(indices.size()), 1, image_size, image_size});
  for (std::size_t b = 0; b < indices.size(); ++b) {
    if (indices[b] >= size()) throw DataError("image index out of range");
    const float* src = values.data() + indices[b] * per;
    T* dst = out.data() + b * per;
    for (std::size_t i = 0; i < per; ++i) dst[i] = static_cast<T>(src[i]);
  }
  return out;
}

template <class T>
nn::Tensor<T> ImageSet::all() const {
  std::vector<std::size_t> idx(size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return batch<T>(idx);
}

std::vector<int> ImageSet::batch_labels(std::span<const std::size_t> indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(labels.at(i));
  return out;
}

template nn::Tensor<float> ImageSet::batch<float>(std::span<const std::size_t>) const;
template nn::Tensor<double> ImageSet::batch<double>(std::span<const std::size_t>) const;
template nn::Tensor<float> ImageSet::all<float>() const;
template nn::Tensor<double> ImageSet::all<double>() const;

ImageSet load_image_set(const DatasetManifest& manifest) {
  if (manifest.image_size() <= 0) throw ConfigError("manifest has no image size");
  ImageSet set;
  set.image_size = manifest.image_size();
  set.classes = manifest.class_names();
  set.labels.reserve(manifest.size());
  set.values.reserve(manifest.size() * set.pixels_per_image());
  for (const auto& r : manifest.records()) {
    const GrayImage img = resize_to_square(read_png_gray(r.path), set.image_size);
    set.add(scale_pixels(img), r.family.index);
  }
  return set;
}

}  // namespace malforge
