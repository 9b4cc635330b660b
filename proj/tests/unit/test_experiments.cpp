#include <doctest.h>

#include <random>

#include <nlohmann/json.hpp>

#include "malforge/error.hpp"
#include "malforge/experiments.hpp"
#include "malforge/image.hpp"
#include "malforge/plot.hpp"
#include "test_support.hpp"

using namespace malforge;
using malforge::testing::TempDir;

namespace {

DatasetManifest families(int count, int per_family, Realness realness, int size = 32) {
  std::vector<SampleRecord> recs;
  for (int f = 0; f < count; ++f) {
    const std::string name = "fam" + std::to_string(100 + f);
    for (int i = 0; i < per_family; ++i) {
      recs.push_back({"/d/" + name + "/" + std::to_string(i) + ".png", {name, 0}, realness, 1024});
    }
  }
  return DatasetManifest::from_records(std::move(recs), size);
}

std::vector<std::string> real_fake_labels(int families) {
  std::vector<std::string> labels;
  for (int f = 0; f < families; ++f) labels.push_back("f" + std::to_string(f));
  for (int f = 0; f < families; ++f) labels.push_back("f" + std::to_string(f) + "_fake");
  return labels;
}

ConfusionMatrix random_matrix(int families, std::mt19937& gen) {
  const auto labels = real_fake_labels(families);
  const std::size_t k = labels.size();
  std::vector<std::int64_t> counts(k * k);
  for (auto& c : counts) c = gen() % 4 == 0 ? static_cast<std::int64_t>(gen() % 50) : 0;
  counts[0] += 1;
  return ConfusionMatrix(labels, counts);
}

// Cell-by-cell condensation written directly from the case table.
std::array<std::array<std::int64_t, 4>, 2> condense_oracle(const ConfusionMatrix& cm) {
  std::array<std::array<std::int64_t, 4>, 2> out{};
  const auto& labels = cm.labels();
  auto split = [](const std::string& s) {
    const bool fake = s.size() > 5 && s.compare(s.size() - 5, 5, "_fake") == 0;
    return std::pair{fake ? s.substr(0, s.size() - 5) : s, fake};
  };
  for (std::size_t t = 0; t < labels.size(); ++t) {
    for (std::size_t p = 0; p < labels.size(); ++p) {
      const auto [tf, t_fake] = split(labels[t]);
      const auto [pf, p_fake] = split(labels[p]);
      const int column = (tf == pf ? 0 : 2) + (p_fake ? 1 : 0);
      out[t_fake ? 1 : 0][static_cast<std::size_t>(column)] +=
          cm.at(static_cast<int>(t), static_cast<int>(p));
    }
  }
  return out;
}

ExperimentConfig tiny_config(const std::filesystem::path& root) {
  ExperimentConfig c;
  c.dataset_id = "tiny";
  c.image_size = 16;
  c.synth = {2, 12, 1024};
  c.per_class = 8;
  c.train_fraction = 0.75;
  c.acgan.image_size = 16;
  c.acgan.epochs = 1;
  c.acgan.num_batches = 2;
  c.acgan.width_divisor = 8;
  c.acgan.latent_dim = 8;
  c.cnn.image_size = 16;
  c.cnn.epochs = 1;
  c.cnn.batch_size = 8;
  c.elm_hidden_units = 20;
  c.seed = 3;
  c.runs_root = root;
  return c;
}

}  // namespace

TEST_SUITE("experiments") {
  TEST_CASE("class labels parse into family and realness") {
    CHECK(parse_class_label("Zbot").family == "Zbot");
    CHECK(parse_class_label("Zbot").realness == Realness::real);
    CHECK(parse_class_label("Zbot_fake").family == "Zbot");
    CHECK(parse_class_label("Zbot_fake").realness == Realness::fake);
    CHECK_THROWS_AS(parse_class_label("_fake"), DataError);
    CHECK_THROWS_AS(parse_class_label(""), DataError);
  }

  TEST_CASE("18 real and 18 fake families make 36 classes") {
    const auto m = build_real_fake_dataset(families(18, 3, Realness::real), families(18, 3, Realness::fake));
    CHECK(m.num_classes() == 36);
    CHECK(m.label_name(17) == "fam117");
    CHECK(m.label_name(18) == "fam100_fake");
    CHECK(m.label_name(35) == "fam117_fake");
  }

  TEST_CASE("25 real and 25 fake at 100 per class make 50 classes and 5000 images") {
    const auto m = build_real_fake_dataset(families(25, 100, Realness::real), families(25, 100, Realness::fake));
    CHECK(m.num_classes() == 50);
    CHECK(m.size() == 5000);
    for (const auto& r : m.records()) {
      CHECK((r.realness == Realness::fake) == (r.family.name.ends_with("_fake")));
    }
  }

  TEST_CASE("real+fake merge errors") {
    const auto real = families(3, 2, Realness::real);
    CHECK_THROWS_AS(build_real_fake_dataset(real, DatasetManifest::from_records({}, 32)), DataError);
    CHECK_THROWS_AS(build_real_fake_dataset(DatasetManifest::from_records({}, 32), real), DataError);
    CHECK_THROWS_AS(build_real_fake_dataset(real, families(2, 2, Realness::fake)), DataError);
    CHECK_THROWS_AS(build_real_fake_dataset(real, families(3, 2, Realness::fake, 64)), DataError);
  }

  TEST_CASE("diagonal one-family matrix condenses onto the same columns") {
    const ConfusionMatrix cm({"A", "A_fake"}, {10, 0, 0, 10});
    const auto c = condense(cm);
    CHECK(c.at(Realness::real, CondensedColumn::real_same) == 10);
    CHECK(c.at(Realness::fake, CondensedColumn::fake_same) == 10);
    CHECK(c.total() == 20);
    CHECK(real_fake_accuracy(cm) == 1.0);
  }

  TEST_CASE("real A predicted as fake B lands in fake-other") {
    ConfusionMatrix cm({"A", "B", "A_fake", "B_fake"});
    cm.add(0, 3, 3);
    const auto c = condense(cm);
    CHECK(c.at(Realness::real, CondensedColumn::fake_other) == 3);
    CHECK(c.total() == 3);
    CHECK(c.to_csv() ==
          "true\\predicted,real_same,fake_same,real_other,fake_other\n"
          "real,0,0,0,3\n"
          "fake,0,0,0,0\n");
  }

  TEST_CASE("condensation matches the cell-by-cell oracle and conserves totals") {
    std::mt19937 gen(17);
    for (int trial = 0; trial < 100; ++trial) {
      const auto cm = random_matrix(1 + static_cast<int>(gen() % 6), gen);
      const auto c = condense(cm);
      CHECK(c.counts == condense_oracle(cm));
      CHECK(c.total() == cm.total());
    }
  }

  TEST_CASE("collapse to another real family still counts as real") {
    const ConfusionMatrix cm({"A", "B", "A_fake", "B_fake"},
                             {0, 5, 0, 0,  //
                              5, 0, 0, 0,  //
                              0, 0, 4, 0,  //
                              0, 0, 0, 4});
    CHECK(real_fake_accuracy(cm) == 1.0);
    const std::vector<int> truth = {0, 1}, predicted = {1, 0};
    CHECK(evaluate_predictions(truth, predicted, {"A", "B"}).accuracy == 0.0);
  }

  TEST_CASE("real-vs-fake accuracy dominates multiclass accuracy") {
    std::mt19937 gen(23);
    for (int trial = 0; trial < 100; ++trial) {
      const auto cm = random_matrix(1 + static_cast<int>(gen() % 6), gen);
      const double multiclass = static_cast<double>(cm.trace()) / static_cast<double>(cm.total());
      CHECK(real_fake_accuracy(cm) >= multiclass);
    }
    CHECK_THROWS_AS(real_fake_accuracy(ConfusionMatrix({"A", "A_fake"})), DataError);
  }

  TEST_CASE("decile means take the first and last tenth") {
    std::vector<double> s(100);
    for (int i = 0; i < 100; ++i) s[static_cast<std::size_t>(i)] = i;
    const auto [first, last] = decile_means(s);
    CHECK(first == doctest::Approx(4.5));
    CHECK(last == doctest::Approx(94.5));
    const auto [a, b] = decile_means({2.0, 4.0, 6.0});
    CHECK(a == 2.0);
    CHECK(b == 6.0);
    CHECK_THROWS(decile_means({}));
  }

  TEST_CASE("config validation names the field") {
    ExperimentConfig c;
    CHECK_NOTHROW(c.validate());
    auto expect = [](ExperimentConfig bad, const std::string& field) {
      try {
        bad.validate();
        FAIL("expected ConfigError for " << field);
      } catch (const ConfigError& e) {
        CHECK_MESSAGE(std::string(e.what()).find(field) != std::string::npos, e.what());
      }
    };
    c.acgan.image_size = 64;
    expect(c, "acgan.image_size");
    c = {};
    c.image_size = c.acgan.image_size = c.cnn.image_size = 40;
    expect(c, "image_size");
    c = {};
    c.train_fraction = 1.0;
    expect(c, "experiment.train_fraction");
    c = {};
    c.elm_hidden_units = -1;
    expect(c, "elm.hidden_units");
    c = {};
    c.dataset_id.clear();
    expect(c, "corpus.dataset_id");
  }

  TEST_CASE("full-size 18-family configuration is accepted") {
    ExperimentConfig c;
    c.dataset_id = "malexe";
    c.binary_dir = "data/malexe";
    c.per_class = 100;
    c.acgan.epochs = 500;
    c.acgan.num_batches = 50;
    c.acgan.num_classes = 18;
    c.cnn.num_classes = 36;
    for (int n : {32, 64, 128}) {
      c.image_size = c.acgan.image_size = c.cnn.image_size = n;
      CHECK_NOTHROW(c.validate());
    }
  }

  TEST_CASE("run id follows the configuration, not the runs root") {
    ExperimentConfig a, b;
    b.runs_root = "/elsewhere";
    CHECK(a.run_id() == b.run_id());
    CHECK(a.run_id().size() == 16);
    b.seed = 9;
    CHECK(a.run_id() != b.run_id());
    const auto echo = nlohmann::json::parse(a.echo_json());
    CHECK_FALSE(echo.contains("runs_root"));
    CHECK(echo.at("elm_hidden_units") == 5000);
  }

  TEST_CASE("plots render as png files") {
    TempDir dir("plots");
    TrainingTrace trace;
    for (int i = 0; i < 50; ++i) trace.losses.push_back({i, 1.0 + 0.01 * i, 0.7});
    render_loss_plot(trace, dir / "loss.png");
    render_confusion(ConfusionMatrix({"A", "A_fake"}, {3, 1, 0, 4}), dir / "cm.png");
    render_bar_chart({{"cnn", {0.5, 0.9}}, {"elm", {0.4, 0.8}}}, dir / "bars.png");
    for (const char* f : {"loss.png", "cm.png", "bars.png"}) {
      const auto bytes = malforge::testing::read_bytes(dir / f);
      REQUIRE(bytes.size() > 8);
      CHECK(bytes[1] == 'P');
      CHECK(bytes[2] == 'N');
      CHECK(bytes[3] == 'G');
    }
    CHECK_THROWS_AS(render_confusion(ConfusionMatrix(std::vector<std::string>{}), dir / "x.png"), DataError);
  }

  TEST_CASE("tiny end-to-end run is complete and reproducible") {
    TempDir a("run-a"), b("run-b");
    const auto ra = run_experiment(tiny_config(a.path()));
    const auto rb = run_experiment(tiny_config(b.path()));
    for (const auto& s : ra.stages) CHECK_MESSAGE(s.status == "ok", s.name << ": " << s.error);
    CHECK(ra.success);
    CHECK(ra.summary_json == rb.summary_json);
    CHECK(ra.run_dir == a.path() / tiny_config(a.path()).run_id());

    for (const char* p : {"summary.json", "timings.json", "acgan/model", "acgan/trace.csv", "cnn/model",
                          "elm/model", "dataset/manifest.csv", "plots/acgan_loss.png", "plots/cnn_confusion.png",
                          "plots/elm_confusion.png", "matrices/cnn_confusion.csv", "matrices/cnn_condensed.csv",
                          "matrices/elm_condensed.csv"}) {
      CHECK_MESSAGE(std::filesystem::exists(ra.run_dir / p), p);
    }
    const auto summary = nlohmann::json::parse(ra.summary_json);
    for (const char* key : {"acgan_balanced_acc", "cnn_test_acc", "elm_test_acc", "cnn_real_fake_acc",
                            "elm_real_fake_acc"}) {
      CHECK_MESSAGE(summary.at(key).is_number(), key);
    }
    CHECK(ra.cnn.confusion.labels().size() == 4);
  }

  TEST_CASE("a failing stage is recorded and dependents are skipped") {
    TempDir dir("run-fail");
    auto c = tiny_config(dir.path());
    c.binary_dir = dir / "does-not-exist";
    const auto r = run_experiment(c);
    CHECK_FALSE(r.success);
    REQUIRE_FALSE(r.stages.empty());
    CHECK(r.stages[0].status == "failed");
    for (std::size_t i = 1; i < r.stages.size(); ++i) CHECK(r.stages[i].status == "skipped");
    const auto summary = nlohmann::json::parse(r.summary_json);
    CHECK(summary.at("cnn_test_acc").is_null());
    CHECK(std::filesystem::exists(r.run_dir / "summary.json"));
  }
}
