#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace malforge {

/// Square 8-bit single-channel image, row-major.
class GrayImage {
 public:
  GrayImage() = default;
  explicit GrayImage(int size, std::uint8_t fill = 0);
  GrayImage(int size, std::vector<std::uint8_t> pixels);

  int size() const noexcept { return size_; }
  std::uint8_t at(int row, int col) const { return pixels_[static_cast<std::size_t>(row) * size_ + col]; }
  std::uint8_t& at(int row, int col) { return pixels_[static_cast<std::size_t>(row) * size_ + col]; }
  std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }
  std::span<std::uint8_t> pixels() noexcept { return pixels_; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  int size_ = 0;
  std::vector<std::uint8_t> pixels_;
};

/// Square image of reals in [-1, 1], row-major.
class ScaledImage {
 public:
  ScaledImage() = default;
  ScaledImage(int size, std::vector<double> values);

  int size() const noexcept { return size_; }
  double at(int row, int col) const { return values_[static_cast<std::size_t>(row) * size_ + col]; }
  std::span<const double> values() const noexcept { return values_; }

 private:
  int size_ = 0;
  std::vector<double> values_;
};

/// Arbitrary-shape grayscale raster as decoded from disk.
struct Raster {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
};

/// RGB raster used for plots and rendered matrices.
struct RgbRaster {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // width*height*3

  RgbRaster() = default;
  RgbRaster(int w, int h, std::uint8_t fill = 255)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, fill) {}
  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b);
};

/// Throws ImageFormatError unless the file is an 8-bit grayscale PNG.
Raster read_png_gray(const std::filesystem::path& path);
GrayImage read_gray_image(const std::filesystem::path& path);
void write_png_gray(const std::filesystem::path& path, const GrayImage& image);
void write_png_rgb(const std::filesystem::path& path, const RgbRaster& image);

/// Bilinear resample to size x size (pixel-center aligned). Identity when already that size.
GrayImage resize_to_square(const Raster& src, int size);

/// Maps [-1,1] back to 8-bit via v -> round(127.5 * (v + 1)), clamped.
std::uint8_t quantize_unit(double v) noexcept;
GrayImage quantize(const ScaledImage& image);

}  // namespace malforge
