#include "malforge/acgan.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "malforge/error.hpp"
#include "malforge/metrics.hpp"
#include "malforge/nn/losses.hpp"
#include "malforge/nn/optim.hpp"
#include "malforge/nn/serialize.hpp"

namespace fs = std::filesystem;

namespace malforge {

using nn::Init;
using nn::Mode;
using nn::Shape;
using nn::Tensor;

namespace {

constexpr std::size_t kInferenceChunk = 64;

void require(bool ok, const std::string& field, const std::string& message) {
  if (!ok) throw ConfigError("acgan." + field + ": " + message);
}

}  // namespace

void GanConfig::validate() const {
  require(image_size > 0 && image_size % 16 == 0, "image_size",
          "must be a positive multiple of 16 for the four stride-2 discriminator blocks (got " +
              std::to_string(image_size) + ")");
  require(num_classes >= 1, "num_classes", "must be >= 1");
  require(latent_dim >= 1, "latent_dim", "must be >= 1");
  require(epochs >= 0, "epochs", "must be >= 0");
  require(num_batches >= 1, "num_batches", "must be >= 1");
  require(learning_rate > 0, "learning_rate", "must be positive");
  require(beta1 >= 0 && beta1 < 1, "beta1", "must lie in [0,1)");
  require(beta2 >= 0 && beta2 < 1, "beta2", "must lie in [0,1)");
  require(width_divisor == 1 || width_divisor == 2 || width_divisor == 4 || width_divisor == 8 || width_divisor == 16,
          "width_divisor", "must be one of 1, 2, 4, 8, 16");
  require(checkpoint_every >= 0, "checkpoint_every", "must be >= 0");
}

std::size_t GanConfig::batch_size(std::size_t n) const {
  const auto b = static_cast<std::size_t>(std::max(num_batches, 1));
  return (n + b - 1) / b;
}

int GanConfig::projection_features() const {
  const int side = image_size / 4;
  return (128 / width_divisor) * side * side;
}

int GanConfig::discriminator_features() const {
  const int side = image_size / 16;
  return (128 / width_divisor) * side * side;
}

// ---------------------------------------------------------------- Generator

template <class T>
Generator<T>::Generator(const GanConfig& config, Rng& rng)
    : num_classes_(config.num_classes),
      latent_dim_(config.latent_dim),
      projection_features_(config.projection_features()),
      embedding_("generator.embedding.weight", {config.num_classes, config.latent_dim}) {
  std::normal_distribution<double> standard(0.0, 1.0);
  for (auto& v : embedding_.value.values()) v = static_cast<T>(standard(rng));

  const int wide = 128 / config.width_divisor;
  const int narrow = 64 / config.width_divisor;
  const int side = config.image_size / 4;
  body_.template add<nn::Linear<T>>(latent_dim_, projection_features_, Init::torch_default, rng);
  body_.template add<nn::Reshape<T>>(Shape{wide, side, side});
  body_.template add<nn::BatchNorm2d<T>>(wide, 0.1, 1e-5, Init::normal_002, &rng);
  body_.template add<nn::Upsample2x<T>>();
  body_.template add<nn::Conv2d<T>>(wide, wide, 3, 1, 1, Init::normal_002, rng);
  body_.template add<nn::BatchNorm2d<T>>(wide, 0.1, 1e-5, Init::normal_002, &rng);
  body_.template add<nn::LeakyReLU<T>>(0.2);
  body_.template add<nn::Upsample2x<T>>();
  body_.template add<nn::Conv2d<T>>(wide, narrow, 3, 1, 1, Init::normal_002, rng);
  body_.template add<nn::BatchNorm2d<T>>(narrow, 0.1, 1e-5, Init::normal_002, &rng);
  body_.template add<nn::LeakyReLU<T>>(0.2);
  body_.template add<nn::Conv2d<T>>(narrow, 1, 3, 1, 1, Init::normal_002, rng);
  body_.template add<nn::Tanh<T>>();
  body_.assign_names("generator.");
}

template <class T>
Tensor<T> Generator<T>::forward(const Tensor<T>& noise, std::span<const int> labels, Mode mode, Rng& rng) {
  const int batch = static_cast<int>(labels.size());
  if (noise.size() != static_cast<std::size_t>(batch) * latent_dim_) {
    throw DataError("generator: noise does not match " + std::to_string(batch) + " x " + std::to_string(latent_dim_));
  }
  for (int y : labels) {
    if (y < 0 || y >= num_classes_) {
      throw DataError("generator: label " + std::to_string(y) + " outside [0, " + std::to_string(num_classes_) + ")");
    }
  }
  noise_ = Tensor<T>({batch, latent_dim_}, std::vector<T>(noise.values().begin(), noise.values().end()));
  labels_.assign(labels.begin(), labels.end());
  Tensor<T> h({batch, latent_dim_});
  for (int b = 0; b < batch; ++b) {
    const T* e = embedding_.value.data() + static_cast<std::size_t>(labels[b]) * latent_dim_;
    for (int j = 0; j < latent_dim_; ++j) {
      const std::size_t i = static_cast<std::size_t>(b) * latent_dim_ + j;
      h[i] = e[j] * noise_[i];
    }
  }
  return body_.forward(h, mode, rng);
}

template <class T>
void Generator<T>::backward(const Tensor<T>& d_images) {
  const Tensor<T> dh = body_.backward(d_images);
  const int batch = static_cast<int>(labels_.size());
  for (int b = 0; b < batch; ++b) {
    T* ge = embedding_.grad.data() + static_cast<std::size_t>(labels_[b]) * latent_dim_;
    for (int j = 0; j < latent_dim_; ++j) {
      const std::size_t i = static_cast<std::size_t>(b) * latent_dim_ + j;
      ge[j] += dh[i] * noise_[i];
    }
  }
}

template <class T>
std::vector<nn::Param<T>*> Generator<T>::params() {
  std::vector<nn::Param<T>*> out{&embedding_};
  for (auto* p : body_.params()) out.push_back(p);
  return out;
}

// ---------------------------------------------------------------- Discriminator

template <class T>
Discriminator<T>::Discriminator(const GanConfig& config, Rng& rng)
    : image_size_(config.image_size), flat_features_(config.discriminator_features()) {
  const int d = config.width_divisor;
  const int widths[4] = {16 / d, 32 / d, 64 / d, 128 / d};
  int in = 1;
  for (int block = 0; block < 4; ++block) {
    body_.template add<nn::Conv2d<T>>(in, widths[block], 3, 2, 1, Init::normal_002, rng);
    body_.template add<nn::LeakyReLU<T>>(0.2);
    body_.template add<nn::Dropout<T>>(0.25, true);
    if (block > 0) body_.template add<nn::BatchNorm2d<T>>(widths[block], 0.1, 1e-5, Init::normal_002, &rng);
    in = widths[block];
  }
  body_.assign_names("discriminator.");
  adversarial_.template add<nn::Linear<T>>(flat_features_, 1, Init::torch_default, rng);
  adversarial_.assign_names("discriminator.adversarial.");
  auxiliary_.template add<nn::Linear<T>>(flat_features_, config.num_classes, Init::torch_default, rng);
  auxiliary_.assign_names("discriminator.auxiliary.");
}

template <class T>
DiscriminatorLogits<T> Discriminator<T>::forward(const Tensor<T>& images, Mode mode, Rng& rng) {
  if (images.rank() != 4 || images.dim(1) != 1 || images.dim(2) != image_size_ || images.dim(3) != image_size_) {
    throw DataError("discriminator: expected (B, 1, " + std::to_string(image_size_) + ", " +
                    std::to_string(image_size_) + ") images, got " + nn::shape_string(images.shape()));
  }
  const Tensor<T> features = body_.forward(images, mode, rng);
  return {adversarial_.forward(features, mode, rng), auxiliary_.forward(features, mode, rng)};
}

template <class T>
Tensor<T> Discriminator<T>::backward(const Tensor<T>& d_validity, const Tensor<T>& d_classes) {
  Tensor<T> d_features = adversarial_.backward(d_validity);
  const Tensor<T> d_aux = auxiliary_.backward(d_classes);
  for (std::size_t i = 0; i < d_features.size(); ++i) d_features[i] += d_aux[i];
  return body_.backward(d_features);
}

template <class T>
std::vector<nn::Param<T>*> Discriminator<T>::params() {
  auto out = body_.params();
  for (auto* p : adversarial_.params()) out.push_back(p);
  for (auto* p : auxiliary_.params()) out.push_back(p);
  return out;
}

// ---------------------------------------------------------------- objectives

namespace {

template <class T>
Tensor<T> scaled(Tensor<T> t, double factor) {
  for (auto& v : t.values()) v = static_cast<T>(v * factor);
  return t;
}

}  // namespace

template <class T>
double discriminator_loss_and_grad(GanModelT<T>& model, const Tensor<T>& real, std::span<const int> real_labels,
                                   const Tensor<T>& fake, std::span<const int> fake_labels, Rng& rng) {
  auto& d = model.discriminator;
  double total = 0.0;
  const std::pair<const Tensor<T>*, std::span<const int>> halves[2] = {{&real, real_labels}, {&fake, fake_labels}};
  for (int h = 0; h < 2; ++h) {
    const auto logits = d.forward(*halves[h].first, Mode::train, rng);
    const auto adv = nn::bce_with_logits(logits.validity, h == 0 ? 1.0 : 0.0);
    const auto aux = nn::renormalized_sigmoid_ce(logits.classes, halves[h].second);
    total += 0.25 * (adv.loss + aux.loss);
    d.backward(scaled(adv.grad, 0.25), scaled(aux.grad, 0.25));
  }
  return total;
}

template <class T>
double generator_loss_and_grad(GanModelT<T>& model, const Tensor<T>& fake, std::span<const int> fake_labels,
                               Rng& rng) {
  const auto logits = model.discriminator.forward(fake, Mode::train, rng);
  const auto adv = nn::bce_with_logits(logits.validity, 1.0);
  const auto aux = nn::renormalized_sigmoid_ce(logits.classes, fake_labels);
  const Tensor<T> d_images = model.discriminator.backward(scaled(adv.grad, 0.5), scaled(aux.grad, 0.5));
  model.generator.backward(d_images);
  return 0.5 * (adv.loss + aux.loss);
}

template <class T>
GanModelT<T> build_gan_t(const GanConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(derive_seed(seed, "acgan/init"));
  Generator<T> g(config, rng);
  Discriminator<T> d(config, rng);
  std::vector<std::string> names(static_cast<std::size_t>(config.num_classes));
  for (int i = 0; i < config.num_classes; ++i) names[i] = "class" + std::to_string(i);
  return GanModelT<T>{config, std::move(names), std::move(g), std::move(d)};
}

template class Generator<float>;
template class Generator<double>;
template class Discriminator<float>;
template class Discriminator<double>;
template double discriminator_loss_and_grad(GanModelT<float>&, const Tensor<float>&, std::span<const int>,
                                            const Tensor<float>&, std::span<const int>, Rng&);
template double discriminator_loss_and_grad(GanModelT<double>&, const Tensor<double>&, std::span<const int>,
                                            const Tensor<double>&, std::span<const int>, Rng&);
template double generator_loss_and_grad(GanModelT<float>&, const Tensor<float>&, std::span<const int>, Rng&);
template double generator_loss_and_grad(GanModelT<double>&, const Tensor<double>&, std::span<const int>, Rng&);
template GanModelT<float> build_gan_t(const GanConfig&, std::uint64_t);
template GanModelT<double> build_gan_t(const GanConfig&, std::uint64_t);

// ---------------------------------------------------------------- public operations

GanModel build_gan(const GanConfig& config, std::uint64_t seed) { return build_gan_t<float>(config, seed); }

LatentBatch sample_latent(int batch, const GanConfig& config, std::uint64_t seed) {
  if (batch < 1) throw ConfigError("latent batch must be >= 1");
  if (config.latent_dim < 1 || config.num_classes < 1) throw ConfigError("invalid latent configuration");
  Rng rng(derive_seed(seed, "acgan/latent"));
  std::normal_distribution<float> standard(0.0f, 1.0f);
  std::uniform_int_distribution<int> label(0, config.num_classes - 1);
  LatentBatch out;
  out.latent_dim = config.latent_dim;
  out.noise.resize(static_cast<std::size_t>(batch) * config.latent_dim);
  for (auto& v : out.noise) v = standard(rng);
  out.labels.resize(static_cast<std::size_t>(batch));
  for (auto& y : out.labels) y = label(rng);
  return out;
}

std::vector<ScaledImage> generate(const GanModel& model, const LatentBatch& latent) {
  if (latent.latent_dim != model.config.latent_dim) throw DataError("latent width does not match the model");
  for (int y : latent.labels) {
    if (y < 0 || y >= model.config.num_classes) {
      throw DataError("label " + std::to_string(y) + " is not below num_classes " +
                      std::to_string(model.config.num_classes));
    }
  }
  Generator<float> g = model.generator;
  Rng unused(0);
  const int n = model.config.image_size;
  const std::size_t per = static_cast<std::size_t>(n) * n;
  std::vector<ScaledImage> images;
  images.reserve(latent.size());
  for (std::size_t start = 0; start < latent.size(); start += kInferenceChunk) {
    const std::size_t count = std::min(kInferenceChunk, latent.size() - start);
    Tensor<float> noise({static_cast<int>(count), latent.latent_dim},
                        std::vector<float>(latent.noise.begin() + static_cast<std::ptrdiff_t>(start * latent.latent_dim),
                                           latent.noise.begin() + static_cast<std::ptrdiff_t>((start + count) * latent.latent_dim)));
    std::span<const int> labels(latent.labels.data() + start, count);
    const Tensor<float> out = g.forward(noise, labels, Mode::eval, unused);
    for (std::size_t b = 0; b < count; ++b) {
      std::vector<double> values(out.data() + b * per, out.data() + (b + 1) * per);
      images.emplace_back(n, std::move(values));
    }
  }
  return images;
}

std::vector<int> Discrimination::predicted_classes() const { return argmax_rows(class_scores, num_classes); }

namespace {

Discrimination discriminate_tensor(const GanModel& model, const Tensor<float>& images) {
  Discriminator<float> d = model.discriminator;
  Rng unused(0);
  Discrimination out;
  out.num_classes = model.config.num_classes;
  const std::size_t batch = images.rank() > 0 ? static_cast<std::size_t>(images.dim(0)) : 0;
  const std::size_t per = images.stride0();
  for (std::size_t start = 0; start < batch; start += kInferenceChunk) {
    const std::size_t count = std::min(kInferenceChunk, batch - start);
    Shape shape = images.shape();
    shape[0] = static_cast<int>(count);
    Tensor<float> chunk(shape, std::vector<float>(images.data() + start * per, images.data() + (start + count) * per));
    const auto logits = d.forward(chunk, Mode::eval, unused);
    for (auto v : logits.validity.values()) out.validity.push_back(nn::sigmoid(v));
    for (auto v : logits.classes.values()) out.class_scores.push_back(nn::sigmoid(v));
  }
  return out;
}

}  // namespace

Discrimination discriminate(const GanModel& model, std::span<const ScaledImage> images) {
  const int n = model.config.image_size;
  const std::size_t per = static_cast<std::size_t>(n) * n;
  Tensor<float> batch({static_cast<int>(images.size()), 1, n, n});
  for (std::size_t b = 0; b < images.size(); ++b) {
    if (images[b].size() != n) {
      throw DataError("discriminate: image " + std::to_string(b) + " is " + std::to_string(images[b].size()) +
                      "x" + std::to_string(images[b].size()) + ", model expects " + std::to_string(n));
    }
    std::transform(images[b].values().begin(), images[b].values().end(), batch.data() + b * per,
                   [](double v) { return static_cast<float>(v); });
  }
  return discriminate_tensor(model, batch);
}

Discrimination discriminate(const GanModel& model, const ImageSet& images) {
  if (images.image_size != model.config.image_size) throw DataError("discriminate: image size does not match the model");
  return discriminate_tensor(model, images.all<float>());
}

void TrainingTrace::write_csv(const fs::path& path) const {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  out << "iteration,g_loss,d_loss\n" << std::setprecision(9);
  for (const auto& p : losses) out << p.iteration << ',' << p.g_loss << ',' << p.d_loss << '\n';
  if (!out) throw IoError("cannot write " + path.string());
}

namespace {

std::vector<int> remap_labels(const GanModel& model, const ImageSet& test) {
  std::vector<int> map(test.classes.size());
  for (std::size_t c = 0; c < test.classes.size(); ++c) {
    auto it = std::find(model.class_names.begin(), model.class_names.end(), test.classes[c]);
    if (it == model.class_names.end()) throw DataError("test class '" + test.classes[c] + "' unknown to the model");
    map[c] = static_cast<int>(it - model.class_names.begin());
  }
  std::vector<int> out;
  out.reserve(test.size());
  for (int y : test.labels) out.push_back(map.at(static_cast<std::size_t>(y)));
  return out;
}

}  // namespace

double discriminator_accuracy(const GanModel& model, const ImageSet& test) {
  if (test.size() == 0) throw DataError("discriminator_accuracy: empty test set");
  const auto truth = remap_labels(model, test);
  const auto predicted = discriminate(model, test).predicted_classes();
  return balanced_accuracy(truth, predicted, model.config.num_classes);
}

double discriminator_accuracy(const GanModel& model, const DatasetManifest& test) {
  if (test.empty()) throw DataError("discriminator_accuracy: empty test set");
  return discriminator_accuracy(model, load_image_set(test));
}

TrainingResult train_acgan(const ImageSet& train, const GanConfig& config, const TrainOptions& options) {
  config.validate();
  if (train.size() == 0) throw DataError("train_acgan: empty training set");
  if (train.image_size != config.image_size) {
    throw ConfigError("acgan.image_size: " + std::to_string(config.image_size) + " does not match data size " +
                      std::to_string(train.image_size));
  }
  if (train.num_classes() != config.num_classes) {
    throw ConfigError("acgan.num_classes: " + std::to_string(config.num_classes) + " does not match the " +
                      std::to_string(train.num_classes()) + " classes in the data");
  }

  TrainingResult result{build_gan(config, config.seed), {}};
  GanModel& model = result.model;
  model.class_names = train.classes;

  nn::AdamOptions adam{config.learning_rate, config.beta1, config.beta2, 1e-8};
  nn::Adam<float> opt_g(model.generator.params(), adam);
  nn::Adam<float> opt_d(model.discriminator.params(), adam);

  Rng rng(derive_seed(config.seed, "acgan/train"));
  std::normal_distribution<float> standard(0.0f, 1.0f);
  std::uniform_int_distribution<int> pick_label(0, config.num_classes - 1);

  const std::size_t n = train.size();
  const std::size_t batch_size = std::max<std::size_t>(config.batch_size(n), 2);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  long iteration = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double g_sum = 0.0, d_sum = 0.0;
    long steps = 0;
    for (std::size_t start = 0; start < n; start += batch_size) {
      const std::size_t count = std::min(batch_size, n - start);
      if (count < 2) continue;  // batch statistics need two samples
      const std::span<const std::size_t> idx(order.data() + start, count);
      const Tensor<float> real = train.batch<float>(idx);
      const std::vector<int> real_labels = train.batch_labels(idx);

      Tensor<float> noise({static_cast<int>(count), config.latent_dim});
      for (auto& v : noise.values()) v = standard(rng);
      std::vector<int> fake_labels(count);
      for (auto& y : fake_labels) y = pick_label(rng);

      const Tensor<float> fake = model.generator.forward(noise, fake_labels, Mode::train, rng);

      opt_d.zero_grad();
      const double d_loss = discriminator_loss_and_grad(model, real, real_labels, fake, fake_labels, rng);
      opt_d.step();

      opt_g.zero_grad();
      const double g_loss = generator_loss_and_grad(model, fake, fake_labels, rng);
      opt_g.step();

      if (!std::isfinite(d_loss) || !std::isfinite(g_loss)) {
        throw TrainingError("non-finite loss at iteration " + std::to_string(iteration) + " (epoch " +
                                std::to_string(epoch) + "): g_loss=" + std::to_string(g_loss) +
                                " d_loss=" + std::to_string(d_loss),
                            iteration);
      }
      result.trace.losses.push_back({iteration, g_loss, d_loss});
      g_sum += g_loss;
      d_sum += d_loss;
      ++steps;
      ++iteration;
    }
    if (options.holdout && options.holdout->size() > 0) {
      result.trace.accuracy.push_back({epoch, discriminator_accuracy(model, *options.holdout)});
    }
    if (options.on_epoch) options.on_epoch(epoch, steps ? g_sum / steps : 0.0, steps ? d_sum / steps : 0.0);
    if (config.checkpoint_every > 0 && !config.checkpoint_dir.empty() && epoch % config.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%05d", epoch);
      save_gan(model, config.checkpoint_dir / name);
    }
  }
  return result;
}

TrainingResult train_acgan(const DatasetManifest& train, const GanConfig& config, const TrainOptions& options) {
  if (train.empty()) throw DataError("train_acgan: empty training manifest");
  return train_acgan(load_image_set(train), config, options);
}

DatasetManifest sample_fake_dataset(const GanModel& model, std::size_t per_class, const fs::path& out_dir,
                                    std::uint64_t seed) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  std::vector<SampleRecord> records;
  const int k = model.config.num_classes;
  for (int c = 0; c < k; ++c) {
    if (per_class == 0) break;
    const std::string& family = model.class_names.at(static_cast<std::size_t>(c));
    LatentBatch latent = sample_latent(static_cast<int>(per_class), model.config,
                                       derive_seed(seed, static_cast<std::uint64_t>(c)));
    std::fill(latent.labels.begin(), latent.labels.end(), c);
    const auto images = generate(model, latent);
    const fs::path family_dir = out_dir / family;
    fs::create_directories(family_dir, ec);
    if (ec) throw IoError("cannot create " + family_dir.string() + ": " + ec.message());
    for (std::size_t i = 0; i < images.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "fake_%04zu.png", i);
      const fs::path path = family_dir / name;
      write_png_gray(path, quantize(images[i]));
      records.push_back({path, {family, 0}, Realness::fake, fs::file_size(path)});
    }
  }
  auto manifest = DatasetManifest::from_records(std::move(records), model.config.image_size, seed);
  write_manifest_csv(manifest, out_dir / "manifest.csv");
  return manifest;
}

namespace {

nlohmann::json config_json(const GanModel& model) {
  const auto& c = model.config;
  return {{"image_size", c.image_size},       {"num_classes", c.num_classes},   {"latent_dim", c.latent_dim},
          {"epochs", c.epochs},               {"num_batches", c.num_batches},   {"seed", c.seed},
          {"learning_rate", c.learning_rate}, {"beta1", c.beta1},               {"beta2", c.beta2},
          {"width_divisor", c.width_divisor}, {"class_names", model.class_names}};
}

}  // namespace

void save_gan(const GanModel& model, const fs::path& dir) {
  GanModel copy = model;
  std::vector<nn::NamedArray> arrays;
  for (auto* p : copy.generator.params()) arrays.push_back(nn::to_named(p->name, p->value));
  for (auto b : copy.generator.buffers()) arrays.push_back(nn::to_named(b.name, *b.tensor));
  for (auto* p : copy.discriminator.params()) arrays.push_back(nn::to_named(p->name, p->value));
  for (auto b : copy.discriminator.buffers()) arrays.push_back(nn::to_named(b.name, *b.tensor));
  fs::create_directories(dir);
  nn::save_arrays(dir / "model.bin", arrays, nn::Precision::f32);
  std::ofstream out(dir / "config.json", std::ios::trunc);
  out << config_json(model).dump(2) << '\n';
  if (!out) throw IoError("cannot write " + (dir / "config.json").string());
}

GanModel load_gan(const fs::path& dir) {
  std::ifstream in(dir / "config.json");
  if (!in) throw IoError("cannot open " + (dir / "config.json").string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("config.json: " + std::string(e.what()));
  }
  GanConfig c;
  c.image_size = j.at("image_size");
  c.num_classes = j.at("num_classes");
  c.latent_dim = j.at("latent_dim");
  c.epochs = j.at("epochs");
  c.num_batches = j.at("num_batches");
  c.seed = j.at("seed");
  c.learning_rate = j.at("learning_rate");
  c.beta1 = j.at("beta1");
  c.beta2 = j.at("beta2");
  c.width_divisor = j.at("width_divisor");
  GanModel model = build_gan(c, 0);
  model.class_names = j.at("class_names").get<std::vector<std::string>>();
  if (static_cast<int>(model.class_names.size()) != c.num_classes) throw DataError("class_names length mismatch");

  const auto arrays = nn::load_arrays(dir / "model.bin");
  for (auto* p : model.generator.params()) nn::assign_from(p->value, nn::find_array(arrays, p->name));
  for (auto b : model.generator.buffers()) nn::assign_from(*b.tensor, nn::find_array(arrays, b.name));
  for (auto* p : model.discriminator.params()) nn::assign_from(p->value, nn::find_array(arrays, p->name));
  for (auto b : model.discriminator.buffers()) nn::assign_from(*b.tensor, nn::find_array(arrays, b.name));
  return model;
}

}  // namespace malforge
