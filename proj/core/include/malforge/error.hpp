#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace malforge {

/// Invalid configuration or caller-supplied parameters.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Filesystem read/write failure.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data violates a precondition (unknown label, empty set, shape mismatch).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Image file that cannot be decoded or is not 8-bit grayscale.
class ImageFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A binary sample shorter than the n*n bytes needed for one image.
class InsufficientBytes : public std::runtime_error {
 public:
  InsufficientBytes(std::size_t needed, std::size_t got)
      : std::runtime_error("insufficient bytes: need " + std::to_string(needed) +
                           ", got " + std::to_string(got)),
        needed_(needed),
        got_(got) {}

  std::size_t needed() const noexcept { return needed_; }
  std::size_t got() const noexcept { return got_; }

 private:
  std::size_t needed_;
  std::size_t got_;
};

/// Training diverged (non-finite loss).
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, long iteration)
      : std::runtime_error(what), iteration_(iteration) {}

  long iteration() const noexcept { return iteration_; }

 private:
  long iteration_;
};

}  // namespace malforge
