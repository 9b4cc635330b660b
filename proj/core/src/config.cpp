#include "malforge/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "malforge/error.hpp"

namespace fs = std::filesystem;

namespace malforge {

namespace {

using Setter = std::function<void(RunConfig&, const YAML::Node&)>;

template <class T>
T scalar(const YAML::Node& node, const std::string& key, const char* expected) {
  if (!node.IsScalar()) throw ConfigError(key + ": expected " + expected);
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(key + ": expected " + expected + ", got '" + node.Scalar() + "'");
  }
}

int as_int(const YAML::Node& n, const std::string& key) { return scalar<int>(n, key, "an integer"); }
double as_real(const YAML::Node& n, const std::string& key) { return scalar<double>(n, key, "a number"); }
std::string as_text(const YAML::Node& n, const std::string& key) { return scalar<std::string>(n, key, "a string"); }

std::size_t as_count(const YAML::Node& n, const std::string& key) {
  const auto v = scalar<long long>(n, key, "a non-negative integer");
  if (v < 0) throw ConfigError(key + ": must be >= 0");
  return static_cast<std::size_t>(v);
}

std::uint64_t as_seed(const YAML::Node& n, const std::string& key) {
  return scalar<std::uint64_t>(n, key, "a non-negative integer");
}

struct KeyTable {
  std::vector<std::string> order;
  std::map<std::string, Setter> setters;

  void add(const std::string& key, Setter fn) {
    order.push_back(key);
    setters.emplace(key, std::move(fn));
  }
};

#define MF_KEY(name, body) \
  t.add(name, [](RunConfig& c, const YAML::Node& v) { \
    const std::string key = name;                        \
    auto& e = c.experiment;                              \
    (void)e;                                             \
    body;                                                \
  })

const KeyTable& table() {
  static const KeyTable t = [] {
    KeyTable t;
    MF_KEY("corpus.dataset_id", e.dataset_id = as_text(v, key));
    MF_KEY("corpus.binary_dir", e.binary_dir = as_text(v, key));
    MF_KEY("corpus.image_dir", e.image_dir = as_text(v, key));
    MF_KEY("corpus.synth_families", e.synth.families = as_int(v, key));
    MF_KEY("corpus.synth_samples", e.synth.samples_per_family = as_int(v, key));
    MF_KEY("corpus.synth_bytes", e.synth.bytes_per_sample = as_count(v, key));
    MF_KEY("convert.image_size", e.image_size = as_int(v, key));
    MF_KEY("acgan.image_size", c.acgan_image_size = as_int(v, key));
    MF_KEY("acgan.latent_dim", e.acgan.latent_dim = as_int(v, key));
    MF_KEY("acgan.epochs", e.acgan.epochs = as_int(v, key));
    MF_KEY("acgan.num_batches", e.acgan.num_batches = as_int(v, key));
    MF_KEY("acgan.learning_rate", e.acgan.learning_rate = as_real(v, key));
    MF_KEY("acgan.beta1", e.acgan.beta1 = as_real(v, key));
    MF_KEY("acgan.beta2", e.acgan.beta2 = as_real(v, key));
    MF_KEY("acgan.width_divisor", e.acgan.width_divisor = as_int(v, key));
    MF_KEY("acgan.checkpoint_every", e.acgan.checkpoint_every = as_int(v, key));
    MF_KEY("cnn.epochs", e.cnn.epochs = as_int(v, key));
    MF_KEY("cnn.batch_size", e.cnn.batch_size = as_int(v, key));
    MF_KEY("cnn.learning_rate", e.cnn.learning_rate = as_real(v, key));
    MF_KEY("elm.hidden_units", e.elm_hidden_units = as_int(v, key));
    MF_KEY("experiment.per_class", e.per_class = as_count(v, key));
    MF_KEY("experiment.train_fraction", e.train_fraction = as_real(v, key));
    MF_KEY("experiment.seed", e.seed = as_seed(v, key));
    MF_KEY("experiment.runs_root", e.runs_root = as_text(v, key));
    return t;
  }();
  return t;
}

#undef MF_KEY

void set_key(RunConfig& config, const std::string& key, const YAML::Node& value) {
  const auto& setters = table().setters;
  const auto it = setters.find(key);
  if (it == setters.end()) throw ConfigError(key + ": unknown key");
  it->second(config, value);
}

}  // namespace

ExperimentConfig RunConfig::resolve() const {
  ExperimentConfig e = experiment;
  e.acgan.image_size = acgan_image_size.value_or(e.image_size);
  e.cnn.image_size = e.image_size;
  e.validate();
  return e;
}

const std::vector<std::string>& config_keys() { return table().order; }

RunConfig parse_run_config(const std::string& text, const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(source + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  RunConfig config;
  if (root.IsNull()) return config;
  if (!root.IsMap()) throw ConfigError(source + ": top level must be a mapping of sections");
  for (const auto& section : root) {
    const auto name = section.first.as<std::string>();
    if (!section.second.IsMap()) {
      throw ConfigError(source + ":" + std::to_string(section.first.Mark().line + 1) + ": section '" + name +
                        "' must be a mapping");
    }
    for (const auto& entry : section.second) {
      const auto key = name + "." + entry.first.as<std::string>();
      try {
        set_key(config, key, entry.second);
      } catch (const ConfigError& e) {
        throw ConfigError(source + ":" + std::to_string(entry.first.Mark().line + 1) + ": " + e.what());
      }
    }
  }
  return config;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), path.string());
}

void apply_override(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "': expected section.key=value");
  }
  const auto key = assignment.substr(0, eq);
  YAML::Node value;
  try {
    value = YAML::Load(assignment.substr(eq + 1));
  } catch (const YAML::Exception& e) {
    throw ConfigError(key + ": " + e.msg);
  }
  if (value.IsNull()) value = YAML::Node(std::string{});
  set_key(config, key, value);
}

}  // namespace malforge
