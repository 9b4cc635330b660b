#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "malforge/cnn.hpp"
#include "malforge/convert.hpp"
#include "malforge/elm.hpp"
#include "malforge/error.hpp"
#include "malforge/metrics.hpp"
#include "test_support.hpp"

using namespace malforge;
using malforge::testing::TempDir;

namespace {

// Class c is a bright square in quadrant c on a noisy background.
ImageSet quadrants(int n, int classes, int per_class, unsigned seed) {
  ImageSet set;
  set.image_size = n;
  for (int c = 0; c < classes; ++c) set.classes.push_back("q" + std::to_string(c));
  std::mt19937 gen(seed);
  for (int c = 0; c < classes; ++c) {
    for (int k = 0; k < per_class; ++k) {
      std::vector<std::uint8_t> px(static_cast<std::size_t>(n) * n);
      for (int r = 0; r < n; ++r) {
        for (int col = 0; col < n; ++col) {
          const int quadrant = (r >= n / 2) * 2 + (col >= n / 2);
          px[static_cast<std::size_t>(r * n + col)] =
              static_cast<std::uint8_t>((quadrant == c % 4 ? 180 : 20) + gen() % 60);
        }
      }
      set.add(scale_pixels(GrayImage(n, px)), c);
    }
  }
  return set;
}

Eigen::MatrixXd random_matrix(int rows, int cols, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = d(gen);
  }
  return m;
}

}  // namespace

TEST_SUITE("evaluators") {
  TEST_CASE("perfect predictions give plain = balanced = 1") {
    const std::vector<int> t = {0, 1, 2, 2, 1};
    const auto r = evaluate_predictions(t, t, {"a", "b", "c"});
    CHECK(r.accuracy == 1.0);
    CHECK(r.balanced_accuracy == 1.0);
    CHECK(r.confusion.trace() == 5);
  }

  TEST_CASE("confusion [[1,1],[0,2]] has balanced accuracy 0.75") {
    const std::vector<int> t = {0, 0, 1, 1}, p = {0, 1, 1, 1};
    const auto r = evaluate_predictions(t, p, {"a", "b"});
    CHECK(r.confusion.at(0, 0) == 1);
    CHECK(r.confusion.at(0, 1) == 1);
    CHECK(r.confusion.at(1, 1) == 2);
    CHECK(r.balanced_accuracy == doctest::Approx(0.75));
    CHECK(r.accuracy == doctest::Approx(0.75));
    CHECK(r.recall == std::vector<double>{0.5, 1.0});
  }

  TEST_CASE("report consistency on random predictions") {
    std::mt19937 gen(3);
    for (int trial = 0; trial < 50; ++trial) {
      const int k = 2 + static_cast<int>(gen() % 6);
      const int n = 1 + static_cast<int>(gen() % 80);
      std::vector<int> t(static_cast<std::size_t>(n)), p(static_cast<std::size_t>(n));
      for (auto& v : t) v = static_cast<int>(gen() % k);
      for (auto& v : p) v = static_cast<int>(gen() % k);
      std::vector<std::string> labels;
      for (int i = 0; i < k; ++i) labels.push_back("c" + std::to_string(i));
      const auto r = evaluate_predictions(t, p, labels);
      CHECK(r.accuracy == doctest::Approx(static_cast<double>(r.confusion.trace()) / n));
      double sum = 0;
      int present = 0;
      for (int c = 0; c < k; ++c) {
        CHECK(r.confusion.row_sum(c) == std::count(t.begin(), t.end(), c));
        if (r.confusion.row_sum(c) == 0) {
          CHECK(std::isnan(r.recall[static_cast<std::size_t>(c)]));
          continue;
        }
        sum += static_cast<double>(r.confusion.at(c, c)) / r.confusion.row_sum(c);
        ++present;
      }
      CHECK(r.balanced_accuracy == doctest::Approx(sum / present));
      CHECK(balanced_accuracy(t, p, k) == doctest::Approx(r.balanced_accuracy));
    }
  }

  TEST_CASE("balanced test set makes plain and balanced accuracy equal") {
    std::mt19937 gen(5);
    std::vector<int> t, p;
    for (int c = 0; c < 4; ++c) {
      for (int i = 0; i < 25; ++i) {
        t.push_back(c);
        p.push_back(static_cast<int>(gen() % 4));
      }
    }
    const auto r = evaluate_predictions(t, p, {"a", "b", "c", "d"});
    CHECK(r.accuracy == doctest::Approx(r.balanced_accuracy).epsilon(1e-12));
  }

  TEST_CASE("evaluation input errors") {
    const std::vector<int> empty;
    CHECK_THROWS_AS(evaluate_predictions(empty, empty, {"a"}), DataError);
    const std::vector<int> t = {0, 3}, p = {0, 0};
    CHECK_THROWS_AS(evaluate_predictions(t, p, {"a", "b"}), DataError);
  }

  TEST_CASE("confusion csv has a header of class names and round trips") {
    ConfusionMatrix cm({"a", "b_fake"}, {3, 1, 0, 4});
    const auto csv = cm.to_csv();
    CHECK(csv.substr(0, csv.find('\n')).find("a,b_fake") != std::string::npos);
    CHECK(ConfusionMatrix::from_csv(csv) == cm);
    CHECK_THROWS_AS(ConfusionMatrix({"a"}, {1, 2}), DataError);
  }

  TEST_CASE("argmax picks the first maximum of each row") {
    const std::vector<double> s = {0.1, 0.9, 0.9, 0.5, 0.2, 0.1};
    CHECK(argmax_rows(s, 3) == std::vector<int>{1, 0});
  }

  TEST_CASE("cnn structure and parameter counts") {
    CnnConfig c;
    c.image_size = 64;
    c.num_classes = 20;
    const Cnn cnn(c);
    const auto summary = cnn.summary();
    REQUIRE(summary.size() >= 10);
    CHECK(summary[0].parameters == 300);  // 30 * (3*3*1 + 1)
    CHECK(summary[0].output_shape == nn::Shape{30, 62, 62});
    CHECK(cnn.flat_features() == 15 * 14 * 14);
    CHECK(summary.back().output_shape == nn::Shape{20});

    const auto set = quadrants(64, 20, 1, 2);
    const auto proba = cnn.predict_proba(set);
    REQUIRE(proba.size() == 400);
    for (int b = 0; b < 20; ++b) {
      double sum = 0;
      for (int k = 0; k < 20; ++k) sum += proba[static_cast<std::size_t>(b * 20 + k)];
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
  }

  TEST_CASE("cnn config validation") {
    CnnConfig c;
    c.image_size = 8;
    CHECK_THROWS_AS(build_cnn(c), ConfigError);
    c.image_size = 10;
    CHECK_NOTHROW(build_cnn(c));
    c.num_classes = 1;
    CHECK_THROWS_AS(build_cnn(c), ConfigError);
    c.num_classes = 2;
    c.epochs = 0;
    CHECK_THROWS_AS(build_cnn(c), ConfigError);
  }

  TEST_CASE("cnn initialization is deterministic per seed") {
    CnnConfig c;
    c.seed = 4;
    Cnn a(c), b(c);
    c.seed = 5;
    Cnn d(c);
    CHECK(a.network().params()[0]->value == b.network().params()[0]->value);
    CHECK(a.network().params()[0]->value != d.network().params()[0]->value);
  }

  TEST_CASE("cnn learns a separable four-class task") {
    CnnConfig c;
    c.image_size = 32;
    c.num_classes = 4;
    c.epochs = 8;
    c.batch_size = 16;
    c.seed = 1;
    Cnn cnn(c);
    const auto result = train_cnn(cnn, quadrants(32, 4, 40, 1), quadrants(32, 4, 15, 2), c);
    CHECK(result.test.balanced_accuracy >= 0.9);
    CHECK(result.epoch_loss.size() == 8);
    CHECK(result.epoch_loss.back() < result.epoch_loss.front());
  }

  TEST_CASE("cnn save and load predict identically") {
    TempDir dir("cnn");
    CnnConfig c;
    c.image_size = 16;
    c.num_classes = 2;
    c.epochs = 1;
    Cnn cnn(c);
    const auto data = quadrants(16, 2, 6, 3);
    train_cnn(cnn, data, data, c);
    cnn.save(dir / "m");
    const auto loaded = Cnn::load(dir / "m");
    CHECK(loaded.class_names() == cnn.class_names());
    CHECK(loaded.predict_proba(data) == cnn.predict_proba(data));
  }

  TEST_CASE("cnn rejects untrainable inputs") {
    CnnConfig c;
    c.image_size = 16;
    c.num_classes = 3;
    Cnn cnn(c);
    auto two = quadrants(16, 3, 4, 1);
    // drop every sample of class 2
    const std::size_t keep = 8;
    two.labels.resize(keep);
    two.values.resize(keep * 256);
    CHECK_THROWS_AS(train_cnn(cnn, two, two, c), DataError);

    auto other = quadrants(16, 3, 2, 1);
    other.classes[1] = "unknown";
    CHECK_THROWS_AS(align_labels(other, cnn.class_names()), DataError);
  }

  TEST_CASE("pseudoinverse satisfies the Moore-Penrose identities") {
    for (auto [rows, cols, rank] : {std::tuple{30, 12, 12}, {12, 30, 12}, {25, 25, 7}}) {
      const Eigen::MatrixXd a = random_matrix(rows, rank, 1) * random_matrix(rank, cols, 2);
      const Eigen::MatrixXd p = pseudo_inverse(a);
      const double scale = std::max(1.0, a.norm());
      CHECK((a * p * a - a).norm() / scale < 1e-6);
      CHECK((p * a * p - p).norm() / std::max(1.0, p.norm()) < 1e-6);
      CHECK(((a * p).transpose() - a * p).norm() < 1e-6);
      CHECK(((p * a).transpose() - p * a).norm() < 1e-6);
    }
  }

  TEST_CASE("elm interpolates distinct training inputs when H >= N") {
    const Eigen::MatrixXd x = random_matrix(60, 10, 4);
    std::vector<int> y(60);
    for (int i = 0; i < 60; ++i) y[static_cast<std::size_t>(i)] = i % 3;
    const auto model = elm_train(x, y, 80, 9);
    CHECK(model.hidden_units() == 80);
    CHECK(model.num_classes() == 3);
    CHECK(elm_predict(model, x) == y);
  }

  TEST_CASE("elm output weights match the normal equations") {
    const Eigen::MatrixXd x = random_matrix(50, 20, 5) * 0.2;
    std::vector<int> y(50);
    for (int i = 0; i < 50; ++i) y[static_cast<std::size_t>(i)] = (i * 7) % 4;
    const auto model = elm_train(x, y, 40, 2);
    const Eigen::MatrixXd phi = elm_hidden(model, x);
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(50, 4);
    for (int i = 0; i < 50; ++i) t(i, y[static_cast<std::size_t>(i)]) = 1.0;
    using LMat = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
    const LMat lp = phi.cast<long double>();
    const LMat beta = (lp.transpose() * lp).fullPivLu().solve(lp.transpose() * t.cast<long double>());
    CHECK((model.output_weights - beta.cast<double>()).cwiseAbs().maxCoeff() < 1e-6);
  }

  TEST_CASE("elm is deterministic and validates its inputs") {
    const Eigen::MatrixXd x = random_matrix(20, 5, 6);
    std::vector<int> y(20, 0);
    y[3] = 1;
    const auto a = elm_train(x, y, 10, 1);
    const auto b = elm_train(x, y, 10, 1);
    CHECK(a.hidden_weights == b.hidden_weights);
    CHECK(a.output_weights == b.output_weights);
    CHECK(a.hidden_weights.maxCoeff() <= 1.0);
    CHECK(a.hidden_weights.minCoeff() >= -1.0);
    CHECK_THROWS_AS(elm_train(x, y, 0, 1), ConfigError);
    CHECK_THROWS_AS(elm_train(x, y, -5, 1), ConfigError);
    CHECK_NOTHROW(elm_train(Eigen::MatrixXd::Ones(20, 5), y, 30, 1));  // rank one hidden map
  }

  TEST_CASE("elm default hidden units per size") {
    CHECK(default_hidden_units(32) == 5000);
    CHECK(default_hidden_units(64) == 50000);
    CHECK(default_hidden_units(128) == 20000);
  }

  TEST_CASE("elm on images, save and load") {
    TempDir dir("elm");
    const auto train = quadrants(16, 4, 20, 7);
    const auto test = quadrants(16, 4, 10, 8);
    const auto model = elm_train(train, 200, 3);
    const auto report = evaluate(model, test);
    CHECK(report.balanced_accuracy >= 0.9);
    save_elm(model, dir / "m");
    const auto loaded = load_elm(dir / "m");
    CHECK(loaded.class_names == model.class_names);
    CHECK(elm_scores(loaded, image_features(test)).isApprox(elm_scores(model, image_features(test))));
  }
}
