#include "malforge/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "malforge/acgan.hpp"
#include "malforge/cnn.hpp"
#include "malforge/config.hpp"
#include "malforge/convert.hpp"
#include "malforge/corpus.hpp"
#include "malforge/dataset.hpp"
#include "malforge/elm.hpp"
#include "malforge/error.hpp"
#include "malforge/experiments.hpp"
#include "malforge/plot.hpp"
#include "malforge/random.hpp"

namespace fs = std::filesystem;

namespace malforge {

namespace {

constexpr const char* kRunsEnv = "MALIMG_FORGE_RUNS";

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config_path, "YAML config file")->check(CLI::ExistingFile);
  cmd->add_option("--set", opts.overrides, "Override a config value, section.key=value (repeatable)");
  cmd->add_option("--seed", opts.seed, "Master seed (overrides experiment.seed)");
  cmd->add_option("--out-dir", opts.out_dir, "Output directory");
}

RunConfig load_config(const CommonOptions& opts) {
  RunConfig config = opts.config_path.empty() ? RunConfig{} : load_run_config(opts.config_path);
  for (const auto& o : opts.overrides) apply_override(config, o);
  if (opts.seed) config.experiment.seed = *opts.seed;
  return config;
}

fs::path out_dir_or(const CommonOptions& opts, const fs::path& fallback) {
  return opts.out_dir.empty() ? fallback : fs::path(opts.out_dir);
}

fs::path runs_root(const CommonOptions& opts, const ExperimentConfig& config) {
  if (!opts.out_dir.empty()) return opts.out_dir;
  if (const char* env = std::getenv(kRunsEnv); env && *env) return env;
  return config.runs_root;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

/// The evaluation dataset: a single manifest, or a real and a fake manifest
/// merged into 2K classes.
struct DatasetOptions {
  std::string manifest;
  std::string real;
  std::string fake;
};

void add_dataset_options(CLI::App* cmd, DatasetOptions& d) {
  auto* m = cmd->add_option("--manifest", d.manifest, "Manifest CSV of the full dataset")->check(CLI::ExistingFile);
  auto* r = cmd->add_option("--real", d.real, "Manifest CSV of real images")->check(CLI::ExistingFile);
  auto* f = cmd->add_option("--fake", d.fake, "Manifest CSV of generated images")->check(CLI::ExistingFile);
  m->excludes(r)->excludes(f);
  r->needs(f);
  f->needs(r);
}

DatasetManifest load_dataset(const DatasetOptions& d, int image_size, std::uint64_t seed) {
  if (!d.manifest.empty()) return read_manifest_csv(d.manifest, image_size, seed);
  if (!d.real.empty()) {
    return build_real_fake_dataset(read_manifest_csv(d.real, image_size, seed),
                                   read_manifest_csv(d.fake, image_size, seed));
  }
  throw ConfigError("dataset: pass --manifest or --real with --fake");
}

bool has_fake_class(const ConfusionMatrix& cm) {
  for (const auto& label : cm.labels()) {
    if (parse_class_label(label).realness == Realness::fake) return true;
  }
  return false;
}

std::string write_report(const fs::path& dir, const EvalReport& report) {
  write_text(dir / "report.json", report.to_json() + "\n");
  write_text(dir / "confusion.csv", report.confusion.to_csv());
  render_confusion(report.confusion, dir / "confusion.png");
  std::string line = "balanced accuracy " + fixed3(report.balanced_accuracy);
  if (has_fake_class(report.confusion)) {
    write_text(dir / "condensed.csv", condense(report.confusion).to_csv());
    line += ", real-vs-fake " + fixed3(real_fake_accuracy(report.confusion));
  }
  return line;
}

int run_synth(const CommonOptions& opts, std::optional<int> families, std::optional<int> samples,
              std::optional<std::size_t> bytes, std::ostream& out) {
  RunConfig rc = load_config(opts);
  auto& synth = rc.experiment.synth;
  if (families) synth.families = *families;
  if (samples) synth.samples_per_family = *samples;
  if (bytes) synth.bytes_per_sample = *bytes;
  if (synth.families < 1) throw ConfigError("corpus.synth_families: must be >= 1");
  if (synth.samples_per_family < 1) throw ConfigError("corpus.synth_samples: must be >= 1");
  const fs::path dir = out_dir_or(opts, "corpus/raw");
  synth_corpus(dir, synth.families, synth.samples_per_family, synth.bytes_per_sample,
               derive_seed(rc.experiment.seed, "experiment/synth"));
  out << "synth: " << synth.families << " families x " << synth.samples_per_family << " samples x "
      << synth.bytes_per_sample << " bytes -> " << dir.string() << "\n";
  return kExitOk;
}

int run_convert(const CommonOptions& opts, const std::string& input, std::optional<int> size, std::ostream& out) {
  RunConfig rc = load_config(opts);
  if (size) rc.experiment.image_size = *size;
  const int n = rc.experiment.image_size;
  if (n <= 0) throw ConfigError("convert.image_size: must be positive (got " + std::to_string(n) + ")");
  const fs::path in = input.empty() ? rc.experiment.binary_dir : fs::path(input);
  if (in.empty()) throw ConfigError("corpus.binary_dir: no input directory given");
  const fs::path dir = out_dir_or(opts, "corpus/images");
  const auto result = convert_corpus(in, n, dir);
  out << "convert: " << result.manifest.size() << " images in " << result.manifest.num_classes() << " families, "
      << result.skipped.size() << " skipped -> " << (dir / "manifest.csv").string() << "\n";
  return kExitOk;
}

int run_train_acgan(const CommonOptions& opts, const std::string& manifest_path, std::ostream& out,
                    std::ostream& err) {
  const ExperimentConfig cfg = load_config(opts).resolve();
  const fs::path dir = out_dir_or(opts, "acgan");
  const auto manifest = manifest_path.empty() ? load_image_corpus(cfg.image_dir, cfg.image_size).manifest
                                              : read_manifest_csv(manifest_path, cfg.image_size, cfg.seed);
  const auto split = split_train_test(manifest, cfg.train_fraction, derive_seed(cfg.seed, "experiment/gan-split"));
  GanConfig gc = cfg.acgan;
  gc.num_classes = manifest.num_classes();
  gc.seed = derive_seed(cfg.seed, "experiment/acgan");
  if (gc.checkpoint_every > 0) gc.checkpoint_dir = dir / "checkpoints";
  const ImageSet train = load_image_set(split.train);
  const ImageSet test = load_image_set(split.test);
  TrainOptions to;
  to.holdout = &test;
  to.on_epoch = [&](int epoch, double g, double d) {
    err << "epoch " << epoch << "/" << gc.epochs << " g=" << fixed3(g) << " d=" << fixed3(d) << "\n";
  };
  const auto trained = train_acgan(train, gc, to);
  save_gan(trained.model, dir / "model");
  trained.trace.write_csv(dir / "trace.csv");
  render_loss_plot(trained.trace, dir / "loss.png");
  const double acc = discriminator_accuracy(trained.model, test);
  out << "train-acgan: " << gc.epochs << " epochs, held-out balanced accuracy " << fixed3(acc) << " -> "
      << (dir / "model").string() << "\n";
  return kExitOk;
}

int run_sample_fakes(const CommonOptions& opts, const std::string& model_dir, std::optional<std::size_t> per_class,
                     std::ostream& out) {
  const RunConfig rc = load_config(opts);
  const std::size_t count = per_class.value_or(rc.experiment.per_class);
  if (count < 1) throw ConfigError("experiment.per_class: must be >= 1");
  const fs::path dir = out_dir_or(opts, "fakes");
  const auto model = load_gan(model_dir);
  const auto manifest = sample_fake_dataset(model, count, dir, derive_seed(rc.experiment.seed, "experiment/fakes"));
  out << "sample-fakes: " << manifest.size() << " images for " << manifest.num_classes() << " families -> "
      << (dir / "manifest.csv").string() << "\n";
  return kExitOk;
}

int run_eval(const CommonOptions& opts, const DatasetOptions& data, bool cnn, std::ostream& out, std::ostream& err) {
  const ExperimentConfig cfg = load_config(opts).resolve();
  const std::string name = cnn ? "eval-cnn" : "eval-elm";
  const fs::path dir = out_dir_or(opts, name);
  const auto manifest = load_dataset(data, cfg.image_size, cfg.seed);
  const auto split = split_train_test(manifest, cfg.train_fraction, derive_seed(cfg.seed, "experiment/split"));
  const ImageSet train = load_image_set(split.train);
  const ImageSet test = load_image_set(split.test);
  EvalReport report;
  if (cnn) {
    CnnConfig cc = cfg.cnn;
    cc.num_classes = train.num_classes();
    cc.seed = derive_seed(cfg.seed, "experiment/cnn");
    Cnn classifier = build_cnn(cc);
    report = train_cnn(classifier, train, test, cc, [&](int epoch, double loss) {
                err << "epoch " << epoch << "/" << cc.epochs << " loss=" << fixed3(loss) << "\n";
              }).test;
    classifier.save(dir / "model");
  } else {
    const int hidden = cfg.elm_hidden_units > 0 ? cfg.elm_hidden_units : default_hidden_units(cfg.image_size);
    const auto model = elm_train(train, hidden, derive_seed(cfg.seed, "experiment/elm"));
    save_elm(model, dir / "model");
    report = evaluate(model, test);
  }
  out << name << ": " << manifest.num_classes() << " classes, " << write_report(dir, report) << " -> "
      << dir.string() << "\n";
  return kExitOk;
}

int run_experiment_cmd(const CommonOptions& opts, bool quiet, std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg = load_config(opts).resolve();
  cfg.runs_root = runs_root(opts, cfg);
  const auto result = run_experiment(cfg, quiet ? nullptr : &err);
  auto value = [&](const char* key) {
    const auto j = nlohmann::json::parse(result.summary_json);
    return j[key].is_null() ? std::string("n/a") : fixed3(j[key].get<double>());
  };
  out << "experiment " << cfg.run_id() << ": acgan " << value("acgan_balanced_acc") << ", cnn "
      << value("cnn_test_acc") << " (real-vs-fake " << value("cnn_real_fake_acc") << "), elm "
      << value("elm_test_acc") << " (real-vs-fake " << value("elm_real_fake_acc") << ") -> "
      << (result.run_dir / "summary.json").string() << "\n";
  if (!result.success) {
    for (const auto& s : result.stages) {
      if (s.status == "failed") err << "stage " << s.name << " failed: " << s.error << "\n";
    }
    return kExitRuntime;
  }
  return kExitOk;
}

int run_report(const CommonOptions& opts, std::ostream& out) {
  const RunConfig rc = load_config(opts);
  const fs::path root = runs_root(opts, rc.experiment);
  if (!fs::is_directory(root)) throw ConfigError("runs root " + root.string() + " is not a directory");

  std::vector<fs::path> summaries;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && fs::exists(entry.path() / "summary.json")) summaries.push_back(entry.path());
  }
  std::sort(summaries.begin(), summaries.end());

  const char* keys[] = {"cnn_test_acc", "elm_test_acc", "cnn_real_fake_acc", "elm_real_fake_acc"};
  std::vector<BarGroup> groups;
  std::ostringstream table;
  table << "run,dataset_id,image_size,acgan_balanced_acc,cnn_test_acc,elm_test_acc,cnn_real_fake_acc,"
           "elm_real_fake_acc\n";
  for (const auto& dir : summaries) {
    std::ifstream in(dir / "summary.json");
    const auto j = nlohmann::json::parse(in);
    auto num = [&](const char* key) { return j.contains(key) && j[key].is_number() ? j[key].get<double>() : 0.0; };
    BarGroup g{dir.filename().string(), {}};
    table << g.name << ',' << j.value("dataset_id", "") << ',' << j["config"].value("image_size", 0) << ','
          << fixed3(num("acgan_balanced_acc"));
    for (const char* k : keys) {
      g.values.push_back(num(k));
      table << ',' << fixed3(num(k));
    }
    table << '\n';
    groups.push_back(std::move(g));
  }
  write_text(root / "report.csv", table.str());
  if (!groups.empty()) render_bar_chart(groups, root / "report.png", {"cnn", "elm", "cnn real-fake", "elm real-fake"});
  out << "report: " << groups.size() << " runs -> " << (root / "report.csv").string() << "\n";
  return kExitOk;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Malware image conversion, AC-GAN training and real/fake evaluation", "malforge"};
  app.require_subcommand(1);

  CommonOptions common;
  std::optional<int> families, samples, image_size;
  std::optional<std::size_t> bytes, per_class;
  std::string input, manifest, model_dir;
  DatasetOptions data_cnn, data_elm;
  bool quiet = false;

  auto* synth = app.add_subcommand("synth", "Write a deterministic synthetic binary corpus");
  add_common(synth, common);
  synth->add_option("--families", families, "Number of families");
  synth->add_option("--samples", samples, "Samples per family");
  synth->add_option("--bytes", bytes, "Bytes per sample");

  auto* convert = app.add_subcommand("convert", "Convert <family>/<file> binaries to grayscale PNGs");
  add_common(convert, common);
  convert->add_option("--input", input, "Binary corpus root")->check(CLI::ExistingDirectory);
  convert->add_option("--image-size", image_size, "Image side length n");

  auto* train = app.add_subcommand("train-acgan", "Train the AC-GAN on a real image manifest");
  add_common(train, common);
  train->add_option("--manifest", manifest, "Manifest CSV of real images")->check(CLI::ExistingFile);

  auto* sample = app.add_subcommand("sample-fakes", "Generate per-family images from a trained model");
  add_common(sample, common);
  sample->add_option("--model", model_dir, "Model directory written by train-acgan")
      ->required()
      ->check(CLI::ExistingDirectory);
  sample->add_option("--per-class", per_class, "Images per family");

  auto* eval_cnn = app.add_subcommand("eval-cnn", "Train and evaluate the CNN classifier");
  add_common(eval_cnn, common);
  add_dataset_options(eval_cnn, data_cnn);

  auto* eval_elm = app.add_subcommand("eval-elm", "Train and evaluate the extreme learning machine");
  add_common(eval_elm, common);
  add_dataset_options(eval_elm, data_elm);

  auto* experiment = app.add_subcommand("experiment", "Run the full protocol into runs/<hash>/");
  add_common(experiment, common);
  experiment->add_flag("--quiet", quiet, "Suppress progress output");

  auto* report = app.add_subcommand("report", "Tabulate and chart every run under the runs root");
  add_common(report, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (synth->parsed()) return run_synth(common, families, samples, bytes, out);
    if (convert->parsed()) return run_convert(common, input, image_size, out);
    if (train->parsed()) return run_train_acgan(common, manifest, out, err);
    if (sample->parsed()) return run_sample_fakes(common, model_dir, per_class, out);
    if (eval_cnn->parsed()) return run_eval(common, data_cnn, true, out, err);
    if (eval_elm->parsed()) return run_eval(common, data_elm, false, out, err);
    if (experiment->parsed()) return run_experiment_cmd(common, quiet, out, err);
    if (report->parsed()) return run_report(common, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace malforge
