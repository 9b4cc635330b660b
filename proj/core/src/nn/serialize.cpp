#include "malforge/nn/serialize.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

static_assert(std::endian::native == std::endian::little, "array files are written little-endian");

namespace malforge::nn {

namespace {

constexpr char kMagic[4] = {'M', 'F', 'A', 'R'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }

std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), 4)) throw DataError("truncated array file");
  return v;
}

}  // namespace

void save_arrays(const std::filesystem::path& path, const std::vector<NamedArray>& arrays, Precision precision) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(arrays.size()));
  for (const auto& a : arrays) {
    put_u32(out, static_cast<std::uint32_t>(a.name.size()));
    out.write(a.name.data(), static_cast<std::streamsize>(a.name.size()));
    out.put(precision == Precision::f32 ? 'f' : 'd');
    put_u32(out, static_cast<std::uint32_t>(a.shape.size()));
    for (int d : a.shape) put_u32(out, static_cast<std::uint32_t>(d));
    if (precision == Precision::f32) {
      for (double v : a.values) {
        const float f = static_cast<float>(v);
        out.write(reinterpret_cast<const char*>(&f), sizeof f);
      }
    } else {
      out.write(reinterpret_cast<const char*>(a.values.data()),
                static_cast<std::streamsize>(a.values.size() * sizeof(double)));
    }
  }
  if (!out) throw IoError("cannot write " + path.string());
}

std::vector<NamedArray> load_arrays(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw DataError(path.string() + ": not an array file");
  }
  if (get_u32(in) != kVersion) throw DataError(path.string() + ": unsupported array file version");
  const auto count = get_u32(in);
  std::vector<NamedArray> arrays;
  arrays.reserve(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    NamedArray a;
    a.name.resize(get_u32(in));
    in.read(a.name.data(), static_cast<std::streamsize>(a.name.size()));
    const int dtype = in.get();
    if (dtype != 'f' && dtype != 'd') throw DataError(path.string() + ": bad dtype for " + a.name);
    a.shape.resize(get_u32(in));
    for (auto& d : a.shape) d = static_cast<int>(get_u32(in));
    a.values.resize(shape_size(a.shape));
    if (dtype == 'f') {
      std::vector<float> buf(a.values.size());
      in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
      for (std::size_t i = 0; i < buf.size(); ++i) a.values[i] = buf[i];
    } else {
      in.read(reinterpret_cast<char*>(a.values.data()), static_cast<std::streamsize>(a.values.size() * sizeof(double)));
    }
    if (!in) throw DataError(path.string() + ": truncated array " + a.name);
    arrays.push_back(std::move(a));
  }
  return arrays;
}

const NamedArray& find_array(const std::vector<NamedArray>& arrays, const std::string& name) {
  for (const auto& a : arrays) {
    if (a.name == name) return a;
  }
  throw DataError("array '" + name + "' not found in checkpoint");
}

}  // namespace malforge::nn
