#include "malforge/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "malforge/convert.hpp"
#include "malforge/dataset.hpp"
#include "malforge/elm.hpp"
#include "malforge/error.hpp"
#include "malforge/plot.hpp"
#include "malforge/random.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace malforge {

ClassTag parse_class_label(const std::string& label) {
  ClassTag tag;
  if (label.size() > kFakeSuffix.size() && label.ends_with(kFakeSuffix)) {
    tag.family = label.substr(0, label.size() - kFakeSuffix.size());
    tag.realness = Realness::fake;
  } else {
    tag.family = label;
  }
  if (tag.family.empty() || label == kFakeSuffix) throw DataError("cannot parse class label '" + label + "'");
  return tag;
}

namespace {

std::set<std::string> family_set(const DatasetManifest& m) {
  std::set<std::string> out;
  for (const auto& r : m.records()) out.insert(r.family.name);
  return out;
}

}  // namespace

DatasetManifest build_real_fake_dataset(const DatasetManifest& real, const DatasetManifest& fake) {
  if (real.empty()) throw DataError("real manifest is empty");
  if (fake.empty()) throw DataError("fake manifest is empty");
  if (real.image_size() != fake.image_size()) {
    throw DataError("image sizes differ: real " + std::to_string(real.image_size()) + ", fake " +
                    std::to_string(fake.image_size()));
  }
  const auto real_families = family_set(real);
  const auto fake_families = family_set(fake);
  for (const auto& f : real_families) {
    if (!fake_families.contains(f)) throw DataError("family '" + f + "' has no fake samples");
  }
  for (const auto& f : fake_families) {
    if (!real_families.contains(f)) throw DataError("family '" + f + "' has no real samples");
  }

  std::vector<SampleRecord> records;
  records.reserve(real.size() + fake.size());
  for (auto r : real.records()) {
    r.realness = Realness::real;
    records.push_back(std::move(r));
  }
  for (auto r : fake.records()) {
    r.family.name += kFakeSuffix;
    r.realness = Realness::fake;
    records.push_back(std::move(r));
  }
  return DatasetManifest::from_records(std::move(records), real.image_size(), real.seed());
}

std::int64_t CondensedMatrix::row_total(Realness row) const {
  std::int64_t sum = 0;
  for (auto v : counts[static_cast<std::size_t>(row)]) sum += v;
  return sum;
}

std::int64_t CondensedMatrix::total() const { return row_total(Realness::real) + row_total(Realness::fake); }

std::string CondensedMatrix::to_csv() const {
  std::ostringstream os;
  os << "true\\predicted,real_same,fake_same,real_other,fake_other\n";
  for (int r = 0; r < 2; ++r) {
    os << (r == 0 ? "real" : "fake");
    for (auto v : counts[static_cast<std::size_t>(r)]) os << ',' << v;
    os << '\n';
  }
  return os.str();
}

CondensedMatrix condense(const ConfusionMatrix& cm) {
  std::vector<ClassTag> tags;
  tags.reserve(cm.labels().size());
  for (const auto& label : cm.labels()) tags.push_back(parse_class_label(label));

  CondensedMatrix out;
  for (int t = 0; t < cm.size(); ++t) {
    const auto row = static_cast<std::size_t>(tags[t].realness);
    for (int p = 0; p < cm.size(); ++p) {
      const bool same = tags[t].family == tags[p].family;
      const bool fake = tags[p].realness == Realness::fake;
      const auto col = same ? (fake ? CondensedColumn::fake_same : CondensedColumn::real_same)
                            : (fake ? CondensedColumn::fake_other : CondensedColumn::real_other);
      out.counts[row][static_cast<std::size_t>(col)] += cm.at(t, p);
    }
  }
  return out;
}

double real_fake_accuracy(const ConfusionMatrix& cm) {
  if (cm.size() == 0 || cm.total() == 0) throw DataError("cannot collapse an empty confusion matrix");
  const auto c = condense(cm);
  const auto correct = c.at(Realness::real, CondensedColumn::real_same) +
                       c.at(Realness::real, CondensedColumn::real_other) +
                       c.at(Realness::fake, CondensedColumn::fake_same) +
                       c.at(Realness::fake, CondensedColumn::fake_other);
  return static_cast<double>(correct) / static_cast<double>(c.total());
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& message) {
    throw ConfigError("experiment." + field + ": " + message);
  };
  if (dataset_id.empty()) throw ConfigError("corpus.dataset_id: must not be empty");
  if (acgan.image_size != image_size) {
    throw ConfigError("acgan.image_size: " + std::to_string(acgan.image_size) + " differs from convert.image_size " +
                      std::to_string(image_size));
  }
  if (cnn.image_size != image_size) {
    throw ConfigError("cnn.image_size: " + std::to_string(cnn.image_size) + " differs from convert.image_size " +
                      std::to_string(image_size));
  }
  if (image_size <= 0 || image_size % 16 != 0) {
    throw ConfigError("convert.image_size: must be a positive multiple of 16 (got " + std::to_string(image_size) +
                      ")");
  }
  if (binary_dir.empty() && image_dir.empty()) {
    if (synth.families < 1) throw ConfigError("corpus.synth_families: must be >= 1");
    if (synth.samples_per_family < 2) throw ConfigError("corpus.synth_samples: must be >= 2");
    if (synth.bytes_per_sample < static_cast<std::size_t>(image_size) * image_size) {
      throw ConfigError("corpus.synth_bytes: must hold at least image_size^2 = " +
                        std::to_string(image_size * image_size) + " bytes");
    }
  }
  if (per_class < 2) fail("per_class", "must be >= 2");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) fail("train_fraction", "must lie in (0, 1)");
  if (elm_hidden_units < 0) throw ConfigError("elm.hidden_units: must be >= 0");

  GanConfig g = acgan;
  g.num_classes = std::max(g.num_classes, 1);
  g.validate();
  CnnConfig c = cnn;
  c.num_classes = std::max(c.num_classes, 2);
  c.validate();
}

std::string ExperimentConfig::echo_json() const {
  ordered_json j;
  j["dataset_id"] = dataset_id;
  j["image_size"] = image_size;
  j["binary_dir"] = binary_dir.generic_string();
  j["image_dir"] = image_dir.generic_string();
  j["synth"] = {{"families", synth.families},
                {"samples_per_family", synth.samples_per_family},
                {"bytes_per_sample", synth.bytes_per_sample}};
  j["per_class"] = per_class;
  j["train_fraction"] = train_fraction;
  j["acgan"] = {{"latent_dim", acgan.latent_dim},       {"epochs", acgan.epochs},
                {"num_batches", acgan.num_batches},     {"learning_rate", acgan.learning_rate},
                {"beta1", acgan.beta1},                 {"beta2", acgan.beta2},
                {"width_divisor", acgan.width_divisor}, {"checkpoint_every", acgan.checkpoint_every}};
  j["cnn"] = {{"epochs", cnn.epochs}, {"batch_size", cnn.batch_size}, {"learning_rate", cnn.learning_rate}};
  j["elm_hidden_units"] = elm_hidden_units == 0 ? default_hidden_units(image_size) : elm_hidden_units;
  j["seed"] = seed;
  return j.dump();
}

std::string ExperimentConfig::run_id() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(echo_json())));
  return buf;
}

std::pair<double, double> decile_means(const std::vector<double>& series) {
  if (series.empty()) throw DataError("cannot take decile means of an empty series");
  const std::size_t k = std::max<std::size_t>(1, series.size() / 10);
  double first = 0.0, last = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    first += series[i];
    last += series[series.size() - k + i];
  }
  return {first / static_cast<double>(k), last / static_cast<double>(k)};
}

namespace {

double round3(double v) { return std::round(v * 1000.0) / 1000.0; }

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

class StageRunner {
 public:
  StageRunner(std::vector<StageStatus>& stages, std::ostream* log) : stages_(stages), log_(log) {}

  /// Runs fn unless a dependency failed; returns whether it succeeded.
  template <class Fn>
  bool run(const std::string& name, bool deps_ok, Fn&& fn) {
    StageStatus status{name, "skipped", "", 0.0};
    if (!deps_ok) {
      status.error = "dependency failed";
      stages_.push_back(status);
      say(name + ": skipped");
      return false;
    }
    say(name + ": start");
    const auto t0 = std::chrono::steady_clock::now();
    try {
      fn();
      status.status = "ok";
    } catch (const std::exception& e) {
      status.status = "failed";
      status.error = e.what();
    }
    status.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    stages_.push_back(status);
    say(name + ": " + status.status + (status.error.empty() ? "" : " (" + status.error + ")"));
    return status.status == "ok";
  }

  void say(const std::string& line) {
    if (log_) *log_ << "[experiment] " << line << std::endl;
  }

 private:
  std::vector<StageStatus>& stages_;
  std::ostream* log_;
};

void write_evaluation(const fs::path& run, const std::string& tag, const EvalReport& report) {
  write_text(run / tag / "report.json", report.to_json());
  write_text(run / "matrices" / (tag + "_confusion.csv"), report.confusion.to_csv());
  write_text(run / "matrices" / (tag + "_condensed.csv"), condense(report.confusion).to_csv());
  render_confusion(report.confusion, run / "plots" / (tag + "_confusion.png"));
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, std::ostream* log) {
  config.validate();
  ExperimentResult result;
  result.run_dir = config.runs_root / config.run_id();
  const fs::path run = result.run_dir;
  for (const char* sub : {"acgan", "cnn", "elm", "plots", "matrices"}) fs::create_directories(run / sub);

  StageRunner stages(result.stages, log);
  stages.say("run directory " + run.string());
  const int n = config.image_size;

  DatasetManifest real;
  const bool data_ok = stages.run("data", true, [&] {
    if (!config.binary_dir.empty()) {
      real = convert_corpus(config.binary_dir, n, run / "data" / "images").manifest;
    } else if (!config.image_dir.empty()) {
      real = load_image_corpus(config.image_dir, n).manifest;
      write_manifest_csv(real, run / "data" / "manifest.csv");
    } else {
      const auto raw = synth_corpus(run / "data" / "raw", config.synth.families, config.synth.samples_per_family,
                                    config.synth.bytes_per_sample, derive_seed(config.seed, "experiment/synth"));
      real = convert_corpus(raw, n, run / "data" / "images").manifest;
    }
    if (real.num_classes() < 1) throw DataError("corpus holds no families");
  });

  std::optional<GanModel> gan;
  const bool acgan_ok = stages.run("acgan", data_ok, [&] {
    const auto split = split_train_test(real, config.train_fraction, derive_seed(config.seed, "experiment/gan-split"));
    GanConfig gc = config.acgan;
    gc.image_size = n;
    gc.num_classes = real.num_classes();
    gc.seed = derive_seed(config.seed, "experiment/acgan");
    if (gc.checkpoint_every > 0) gc.checkpoint_dir = run / "acgan" / "checkpoints";
    const ImageSet train = load_image_set(split.train);
    const ImageSet test = load_image_set(split.test);
    TrainOptions opts;
    opts.holdout = &test;
    opts.on_epoch = [&](int epoch, double g, double d) {
      char line[96];
      std::snprintf(line, sizeof line, "acgan epoch %d/%d g=%.4f d=%.4f", epoch, gc.epochs, g, d);
      stages.say(line);
    };
    auto trained = train_acgan(train, gc, opts);
    gan.emplace(std::move(trained.model));
    save_gan(*gan, run / "acgan" / "model");
    trained.trace.write_csv(run / "acgan" / "trace.csv");
    render_loss_plot(trained.trace, run / "plots" / "acgan_loss.png");
    result.acgan_balanced_acc = discriminator_accuracy(*gan, test);
    std::vector<double> g_losses;
    for (const auto& p : trained.trace.losses) g_losses.push_back(p.g_loss);
    if (!g_losses.empty()) {
      std::tie(result.generator_loss_first_decile, result.generator_loss_last_decile) = decile_means(g_losses);
    }
  });

  DatasetManifest fake;
  const bool fakes_ok = stages.run("fakes", acgan_ok, [&] {
    fake = sample_fake_dataset(*gan, config.per_class, run / "fakes", derive_seed(config.seed, "experiment/fakes"));
  });

  Split split;
  const bool dataset_ok = stages.run("dataset", fakes_ok, [&] {
    const auto sampled = stratified_sample(real, config.per_class, derive_seed(config.seed, "experiment/sample"));
    const auto combined = build_real_fake_dataset(sampled, fake);
    write_manifest_csv(combined, run / "dataset" / "manifest.csv");
    split = split_train_test(combined, config.train_fraction, derive_seed(config.seed, "experiment/split"));
  });

  ImageSet train_set, test_set;
  const bool loaded_ok = stages.run("load", dataset_ok, [&] {
    train_set = load_image_set(split.train);
    test_set = load_image_set(split.test);
  });

  stages.run("cnn", loaded_ok, [&] {
    CnnConfig cc = config.cnn;
    cc.image_size = n;
    cc.num_classes = train_set.num_classes();
    cc.seed = derive_seed(config.seed, "experiment/cnn");
    Cnn classifier = build_cnn(cc);
    const auto trained = train_cnn(classifier, train_set, test_set, cc, [&](int epoch, double loss) {
      char line[64];
      std::snprintf(line, sizeof line, "cnn epoch %d/%d loss=%.4f", epoch, cc.epochs, loss);
      stages.say(line);
    });
    classifier.save(run / "cnn" / "model");
    result.cnn = trained.test;
    result.cnn_train_acc = trained.train_accuracy;
    result.cnn_real_fake_acc = real_fake_accuracy(trained.test.confusion);
    write_evaluation(run, "cnn", trained.test);
  });

  stages.run("elm", loaded_ok, [&] {
    const int hidden = config.elm_hidden_units > 0 ? config.elm_hidden_units : default_hidden_units(n);
    const auto model = elm_train(train_set, hidden, derive_seed(config.seed, "experiment/elm"));
    save_elm(model, run / "elm" / "model");
    result.elm = evaluate(model, test_set);
    result.elm_real_fake_acc = real_fake_accuracy(result.elm.confusion);
    write_evaluation(run, "elm", result.elm);
  });

  result.success = std::all_of(result.stages.begin(), result.stages.end(),
                               [](const StageStatus& s) { return s.status == "ok"; });

  auto status_of = [&](const std::string& name) -> const StageStatus* {
    for (const auto& s : result.stages) {
      if (s.name == name) return &s;
    }
    return nullptr;
  };
  auto metric = [&](const std::string& stage, double value) -> ordered_json {
    const auto* s = status_of(stage);
    return s && s->status == "ok" ? ordered_json(round3(value)) : ordered_json(nullptr);
  };

  ordered_json summary;
  summary["run_id"] = config.run_id();
  summary["dataset_id"] = config.dataset_id;
  summary["success"] = result.success;
  summary["acgan_balanced_acc"] = metric("acgan", result.acgan_balanced_acc);
  summary["cnn_test_acc"] = metric("cnn", result.cnn.balanced_accuracy);
  summary["elm_test_acc"] = metric("elm", result.elm.balanced_accuracy);
  summary["cnn_real_fake_acc"] = metric("cnn", result.cnn_real_fake_acc);
  summary["elm_real_fake_acc"] = metric("elm", result.elm_real_fake_acc);
  summary["cnn_train_acc"] = metric("cnn", result.cnn_train_acc);
  summary["generator_loss_first_decile"] = metric("acgan", result.generator_loss_first_decile);
  summary["generator_loss_last_decile"] = metric("acgan", result.generator_loss_last_decile);
  ordered_json stage_list = ordered_json::array();
  ordered_json timings;
  for (const auto& s : result.stages) {
    ordered_json e{{"name", s.name}, {"status", s.status}};
    if (!s.error.empty()) e["error"] = s.error;
    stage_list.push_back(e);
    timings[s.name] = s.seconds;
  }
  summary["stages"] = stage_list;
  summary["config"] = ordered_json::parse(config.echo_json());
  result.summary_json = summary.dump(2) + "\n";
  write_text(run / "summary.json", result.summary_json);
  write_text(run / "timings.json", timings.dump(2) + "\n");
  stages.say(result.success ? "done" : "finished with failed stages");
  return result;
}

}  // namespace malforge
