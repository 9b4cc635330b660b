#include "malforge/cnn.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "malforge/error.hpp"
#include "malforge/nn/losses.hpp"
#include "malforge/nn/optim.hpp"
#include "malforge/nn/serialize.hpp"

namespace fs = std::filesystem;

namespace malforge {

using nn::Init;
using nn::Mode;
using nn::Tensor;

namespace {

constexpr int kConv1Filters = 30;
constexpr int kConv2Filters = 15;
constexpr std::size_t kInferenceChunk = 256;

int pooled_extent(int n) {
  const int after_first = (n - 2) / 2;
  return (after_first - 2) / 2;
}

}  // namespace

void CnnConfig::validate() const {
  if (image_size < 8) throw ConfigError("cnn.image_size: must be >= 8 (got " + std::to_string(image_size) + ")");
  if (pooled_extent(image_size) < 1) {
    throw ConfigError("cnn.image_size: " + std::to_string(image_size) + " is too small for two pooling stages");
  }
  if (num_classes < 2) throw ConfigError("cnn.num_classes: need at least 2 classes");
  if (epochs < 1) throw ConfigError("cnn.epochs: must be >= 1");
  if (batch_size < 1) throw ConfigError("cnn.batch_size: must be >= 1");
  if (!(learning_rate > 0)) throw ConfigError("cnn.learning_rate: must be positive");
}

Cnn::Cnn(const CnnConfig& config) : config_(config) {
  config_.validate();
  const int side = pooled_extent(config_.image_size);
  flat_features_ = kConv2Filters * side * side;
  Rng rng(derive_seed(config_.seed, "cnn/init"));
  net_.add<nn::Conv2d<float>>(1, kConv1Filters, 3, 1, 0, Init::glorot_uniform, rng);
  net_.add<nn::LeakyReLU<float>>(0.0);
  net_.add<nn::MaxPool2x2<float>>();
  net_.add<nn::Conv2d<float>>(kConv1Filters, kConv2Filters, 3, 1, 0, Init::glorot_uniform, rng);
  net_.add<nn::LeakyReLU<float>>(0.0);
  net_.add<nn::MaxPool2x2<float>>();
  net_.add<nn::Dropout<float>>(0.25, false);
  net_.add<nn::Reshape<float>>(nn::Shape{flat_features_});
  net_.add<nn::Linear<float>>(flat_features_, 128, Init::glorot_uniform, rng);
  net_.add<nn::LeakyReLU<float>>(0.0);
  net_.add<nn::Dropout<float>>(0.5, false);
  net_.add<nn::Linear<float>>(128, 50, Init::glorot_uniform, rng);
  net_.add<nn::LeakyReLU<float>>(0.0);
  net_.add<nn::Linear<float>>(50, config_.num_classes, Init::glorot_uniform, rng);
  net_.assign_names("cnn.");
  class_names_.resize(static_cast<std::size_t>(config_.num_classes));
  for (int i = 0; i < config_.num_classes; ++i) class_names_[i] = "class" + std::to_string(i);
}

void Cnn::set_class_names(std::vector<std::string> names) {
  if (static_cast<int>(names.size()) != config_.num_classes) {
    throw DataError("expected " + std::to_string(config_.num_classes) + " class names, got " +
                    std::to_string(names.size()));
  }
  class_names_ = std::move(names);
}

std::vector<double> Cnn::predict_proba(const ImageSet& images) const {
  if (images.image_size != config_.image_size) throw DataError("cnn: image size does not match the classifier");
  nn::Sequential<float> net = net_;
  Rng unused(0);
  std::vector<double> out;
  out.reserve(images.size() * static_cast<std::size_t>(config_.num_classes));
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < images.size(); start += kInferenceChunk) {
    const std::size_t count = std::min(kInferenceChunk, images.size() - start);
    idx.resize(count);
    std::iota(idx.begin(), idx.end(), start);
    const Tensor<float> probs = nn::softmax(net.forward(images.batch<float>(idx), Mode::eval, unused));
    out.insert(out.end(), probs.values().begin(), probs.values().end());
  }
  return out;
}

std::vector<int> Cnn::predict(const ImageSet& images) const {
  return argmax_rows(predict_proba(images), config_.num_classes);
}

std::vector<LayerSummary> Cnn::summary() const {
  nn::Sequential<float> net = net_;
  Rng unused(0);
  Tensor<float> h({1, 1, config_.image_size, config_.image_size});
  std::vector<LayerSummary> out;
  for (std::size_t i = 0; i < net.size(); ++i) {
    auto& layer = net.layer(i);
    h = layer.forward(h, Mode::eval, unused);
    nn::Shape shape(h.shape().begin() + 1, h.shape().end());
    std::size_t params = 0;
    for (auto* p : layer.params()) params += p->value.size();
    out.push_back({std::to_string(i) + "." + layer.kind(), shape, params});
  }
  return out;
}

void Cnn::save(const fs::path& dir) const {
  nn::Sequential<float> net = net_;
  std::vector<nn::NamedArray> arrays;
  for (auto* p : net.params()) arrays.push_back(nn::to_named(p->name, p->value));
  fs::create_directories(dir);
  nn::save_arrays(dir / "model.bin", arrays, nn::Precision::f32);
  nlohmann::json j = {{"image_size", config_.image_size}, {"num_classes", config_.num_classes},
                      {"epochs", config_.epochs},         {"batch_size", config_.batch_size},
                      {"seed", config_.seed},             {"learning_rate", config_.learning_rate},
                      {"class_names", class_names_}};
  std::ofstream out(dir / "config.json", std::ios::trunc);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("cannot write " + (dir / "config.json").string());
}

Cnn Cnn::load(const fs::path& dir) {
  std::ifstream in(dir / "config.json");
  if (!in) throw IoError("cannot open " + (dir / "config.json").string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("config.json: " + std::string(e.what()));
  }
  CnnConfig c;
  c.image_size = j.at("image_size");
  c.num_classes = j.at("num_classes");
  c.epochs = j.at("epochs");
  c.batch_size = j.at("batch_size");
  c.seed = j.at("seed");
  c.learning_rate = j.at("learning_rate");
  Cnn cnn(c);
  cnn.set_class_names(j.at("class_names").get<std::vector<std::string>>());
  const auto arrays = nn::load_arrays(dir / "model.bin");
  for (auto* p : cnn.net_.params()) nn::assign_from(p->value, nn::find_array(arrays, p->name));
  return cnn;
}

Cnn build_cnn(const CnnConfig& config) { return Cnn(config); }

std::vector<int> align_labels(const ImageSet& test, const std::vector<std::string>& classes) {
  std::vector<int> map(test.classes.size());
  for (std::size_t c = 0; c < test.classes.size(); ++c) {
    auto it = std::find(classes.begin(), classes.end(), test.classes[c]);
    if (it == classes.end()) throw DataError("unknown label '" + test.classes[c] + "' in test set");
    map[c] = static_cast<int>(it - classes.begin());
  }
  std::vector<int> out;
  out.reserve(test.size());
  for (int y : test.labels) out.push_back(map.at(static_cast<std::size_t>(y)));
  return out;
}

EvalReport evaluate(const Cnn& classifier, const ImageSet& test) {
  if (test.size() == 0) throw DataError("cannot evaluate an empty test set");
  const auto truth = align_labels(test, classifier.class_names());
  return evaluate_predictions(truth, classifier.predict(test), classifier.class_names());
}

EvalReport evaluate(const Cnn& classifier, const DatasetManifest& test) {
  if (test.empty()) throw DataError("cannot evaluate an empty test set");
  return evaluate(classifier, load_image_set(test));
}

CnnTrainResult train_cnn(Cnn& classifier, const ImageSet& train, const ImageSet& test, const CnnConfig& config,
                         const std::function<void(int, double)>& on_epoch) {
  config.validate();
  if (train.num_classes() != classifier.config().num_classes || train.num_classes() != config.num_classes) {
    throw DataError("training data has " + std::to_string(train.num_classes()) + " classes, classifier expects " +
                    std::to_string(classifier.config().num_classes));
  }
  std::vector<std::size_t> counts(static_cast<std::size_t>(train.num_classes()), 0);
  for (int y : train.labels) ++counts[static_cast<std::size_t>(y)];
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) throw DataError("class '" + train.classes[c] + "' has no training samples");
  }
  classifier.set_class_names(train.classes);

  auto& net = classifier.network();
  nn::Adam<float> opt(net.params(), {config.learning_rate, 0.9, 0.999, 1e-7});
  Rng rng(derive_seed(config.seed, "cnn/train"));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch = static_cast<std::size_t>(config.batch_size);

  CnnTrainResult result;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t count = std::min(batch, order.size() - start);
      const std::span<const std::size_t> idx(order.data() + start, count);
      const auto labels = train.batch_labels(idx);
      opt.zero_grad();
      const Tensor<float> logits = net.forward(train.batch<float>(idx), Mode::train, rng);
      const auto ce = nn::softmax_cross_entropy(logits, labels);
      net.backward(ce.grad);
      opt.step();
      loss_sum += ce.loss * static_cast<double>(count);
      seen += count;
    }
    result.epoch_loss.push_back(loss_sum / static_cast<double>(seen));
    if (on_epoch) on_epoch(epoch, result.epoch_loss.back());
  }
  result.train_accuracy = evaluate(classifier, train).accuracy;
  result.test = evaluate(classifier, test);
  return result;
}

CnnTrainResult train_cnn(Cnn& classifier, const Split& split, const CnnConfig& config) {
  return train_cnn(classifier, load_image_set(split.train), load_image_set(split.test), config);
}

}  // namespace malforge
