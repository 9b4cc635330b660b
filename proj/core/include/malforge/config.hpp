#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "malforge/experiments.hpp"

namespace malforge {

/// Settings read from a YAML file with one mapping per section:
/// corpus, convert, acgan, cnn, elm, experiment. Unknown sections or keys are
/// rejected.
struct RunConfig {
  ExperimentConfig experiment;
  /// acgan.image_size when given explicitly; must agree with convert.image_size.
  std::optional<int> acgan_image_size;

  /// Propagates convert.image_size into the sub-configs, then validates.
  /// Throws ConfigError naming the offending `section.key`.
  ExperimentConfig resolve() const;
};

/// Every accepted `section.key`, in documentation order.
const std::vector<std::string>& config_keys();

/// Throws ConfigError with the source name and line on malformed input.
RunConfig parse_run_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_run_config(const std::filesystem::path& path);

/// Applies one `section.key=value` assignment.
void apply_override(RunConfig& config, const std::string& assignment);

}  // namespace malforge
