#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "malforge/nn/layers.hpp"

namespace malforge::nn {

enum class Precision { f32, f64 };

struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

/// Flat little-endian container of named arrays:
///   "MFAR" u32 version, u32 count, then per array:
///   u32 name_len, name, u8 dtype ('f' or 'd'), u32 rank, u32 dims[rank], data.
void save_arrays(const std::filesystem::path& path, const std::vector<NamedArray>& arrays, Precision precision);
std::vector<NamedArray> load_arrays(const std::filesystem::path& path);

template <class T>
NamedArray to_named(const std::string& name, const Tensor<T>& t) {
  return {name, t.shape(), std::vector<double>(t.values().begin(), t.values().end())};
}

/// Copies a named array into a tensor of identical shape; throws DataError on mismatch.
template <class T>
void assign_from(Tensor<T>& t, const NamedArray& a) {
  if (a.shape != t.shape()) {
    throw DataError("array '" + a.name + "' has shape " + shape_string(a.shape) + ", expected " +
                    shape_string(t.shape()));
  }
  for (std::size_t i = 0; i < a.values.size(); ++i) t[i] = static_cast<T>(a.values[i]);
}

/// Finds an array by name; throws DataError when absent.
const NamedArray& find_array(const std::vector<NamedArray>& arrays, const std::string& name);

}  // namespace malforge::nn
