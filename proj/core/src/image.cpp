#include "malforge/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "malforge/error.hpp"

namespace malforge {

GrayImage::GrayImage(int size, std::uint8_t fill)
    : size_(size), pixels_(static_cast<std::size_t>(size) * size, fill) {
  if (size < 0) throw ConfigError("image size must be non-negative");
}

GrayImage::GrayImage(int size, std::vector<std::uint8_t> pixels)
    : size_(size), pixels_(std::move(pixels)) {
  if (size < 0 || pixels_.size() != static_cast<std::size_t>(size) * size) {
    throw DataError("GrayImage: pixel count does not match size");
  }
}

ScaledImage::ScaledImage(int size, std::vector<double> values)
    : size_(size), values_(std::move(values)) {
  if (size < 0 || values_.size() != static_cast<std::size_t>(size) * size) {
    throw DataError("ScaledImage: value count does not match size");
  }
}

void RgbRaster::set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  if (x < 0 || y < 0 || x >= width || y >= height) return;
  auto* p = &pixels[(static_cast<std::size_t>(y) * width + x) * 3];
  p[0] = r;
  p[1] = g;
  p[2] = b;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open " + path.string());
  return f;
}

[[noreturn]] void png_error_fn(png_structp png, png_const_charp msg) {
  auto* what = static_cast<std::string*>(png_get_error_ptr(png));
  if (what) *what = msg;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

void write_png(const std::filesystem::path& path, int width, int height, int color_type,
               const std::uint8_t* data, int channels) {
  auto file = open_file(path, "wb");
  std::string error;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, png_error_fn, png_warning_fn);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("writing " + path.string() + ": " + error);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(width) * channels;
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(data + stride * y));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

Raster read_png_gray(const std::filesystem::path& path) {
  auto file = open_file(path, "rb");
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw ImageFormatError(path.string() + ": not a PNG file");
  }
  std::string error;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, png_error_fn, png_warning_fn);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  Raster out;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageFormatError(path.string() + ": " + (error.empty() ? "decode error" : error));
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const auto color = png_get_color_type(png, info);
  const auto depth = png_get_bit_depth(png, info);
  if (color != PNG_COLOR_TYPE_GRAY || depth != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageFormatError(path.string() + ": not an 8-bit grayscale image");
  }
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.pixels.resize(static_cast<std::size_t>(out.width) * out.height);
  for (int y = 0; y < out.height; ++y) {
    png_read_row(png, out.pixels.data() + static_cast<std::size_t>(y) * out.width, nullptr);
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

GrayImage read_gray_image(const std::filesystem::path& path) {
  Raster r = read_png_gray(path);
  if (r.width != r.height) throw ImageFormatError(path.string() + ": image is not square");
  return GrayImage(r.width, std::move(r.pixels));
}

void write_png_gray(const std::filesystem::path& path, const GrayImage& image) {
  write_png(path, image.size(), image.size(), PNG_COLOR_TYPE_GRAY, image.pixels().data(), 1);
}

void write_png_rgb(const std::filesystem::path& path, const RgbRaster& image) {
  write_png(path, image.width, image.height, PNG_COLOR_TYPE_RGB, image.pixels.data(), 3);
}

GrayImage resize_to_square(const Raster& src, int size) {
  if (size <= 0) throw ConfigError("resize target must be positive");
  if (src.width <= 0 || src.height <= 0) throw DataError("cannot resize an empty raster");
  if (src.width == size && src.height == size) return GrayImage(size, src.pixels);

  GrayImage out(size);
  const double sx = static_cast<double>(src.width) / size;
  const double sy = static_cast<double>(src.height) / size;
  auto px = [&](int x, int y) {
    x = std::clamp(x, 0, src.width - 1);
    y = std::clamp(y, 0, src.height - 1);
    return static_cast<double>(src.pixels[static_cast<std::size_t>(y) * src.width + x]);
  };
  for (int r = 0; r < size; ++r) {
    const double fy = (r + 0.5) * sy - 0.5;
    const int y0 = static_cast<int>(std::floor(fy));
    const double wy = fy - y0;
    for (int c = 0; c < size; ++c) {
      const double fx = (c + 0.5) * sx - 0.5;
      const int x0 = static_cast<int>(std::floor(fx));
      const double wx = fx - x0;
      const double v = (1 - wy) * ((1 - wx) * px(x0, y0) + wx * px(x0 + 1, y0)) +
                       wy * ((1 - wx) * px(x0, y0 + 1) + wx * px(x0 + 1, y0 + 1));
      out.at(r, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  return out;
}

std::uint8_t quantize_unit(double v) noexcept {
  const double q = std::round(127.5 * (v + 1.0));
  return static_cast<std::uint8_t>(std::clamp(q, 0.0, 255.0));
}

GrayImage quantize(const ScaledImage& image) {
  std::vector<std::uint8_t> px(image.values().size());
  std::transform(image.values().begin(), image.values().end(), px.begin(), quantize_unit);
  return GrayImage(image.size(), std::move(px));
}

}  // namespace malforge
