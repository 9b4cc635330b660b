#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "gradcheck.hpp"
#include "malforge/acgan.hpp"
#include "malforge/convert.hpp"
#include "malforge/error.hpp"
#include "malforge/image.hpp"
#include "test_support.hpp"

using namespace malforge;
using malforge::testing::TempDir;

namespace {

GanConfig tiny_config(int classes = 2) {
  GanConfig c;
  c.image_size = 16;
  c.num_classes = classes;
  c.latent_dim = 8;
  c.width_divisor = 8;
  c.epochs = 2;
  c.num_batches = 3;
  c.seed = 5;
  return c;
}

// Two classes of striped images, easy to tell apart.
ImageSet stripes(int n, int per_class) {
  ImageSet set;
  set.image_size = n;
  set.classes = {"horizontal", "vertical"};
  std::mt19937 gen(1);
  for (int c = 0; c < 2; ++c) {
    for (int k = 0; k < per_class; ++k) {
      std::vector<std::uint8_t> px(static_cast<std::size_t>(n) * n);
      for (int r = 0; r < n; ++r) {
        for (int col = 0; col < n; ++col) {
          const int band = (c == 0 ? r : col) / 2 % 2;
          px[static_cast<std::size_t>(r * n + col)] = static_cast<std::uint8_t>(band * 200 + gen() % 40);
        }
      }
      set.add(scale_pixels(GrayImage(n, px)), c);
    }
  }
  return set;
}

template <class Model>
std::vector<float> flat_params(Model& m) {
  std::vector<float> out;
  for (auto* p : m.generator.params()) out.insert(out.end(), p->value.values().begin(), p->value.values().end());
  for (auto* p : m.discriminator.params()) out.insert(out.end(), p->value.values().begin(), p->value.values().end());
  return out;
}

}  // namespace

TEST_SUITE("acgan") {
  TEST_CASE("shape formulas") {
    GanConfig c;
    c.image_size = 128;
    c.num_classes = 3;
    CHECK(c.discriminator_features() == 8192);
    CHECK(c.projection_features() == 131072);
    c.image_size = 32;
    CHECK(c.projection_features() == 8192);
    CHECK(c.discriminator_features() == 512);
    auto m = build_gan(c, 1);
    CHECK(m.generator.projection_features() == 8192);
    CHECK(m.discriminator.flat_features() == 512);
  }

  TEST_CASE("discriminator head width is 8192 at n = 128") {
    GanConfig c;
    c.image_size = 128;
    c.num_classes = 2;
    c.latent_dim = 4;
    auto m = build_gan(c, 1);
    CHECK(m.discriminator.flat_features() == 8192);
    CHECK(m.generator.projection_features() == 131072);
  }

  TEST_CASE("image sizes not divisible by 16 are rejected with the field name") {
    for (int n : {0, 8, 33, 40, 100}) {
      GanConfig c;
      c.image_size = n;
      try {
        build_gan(c, 1);
        FAIL("expected ConfigError for n=", n);
      } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("acgan.image_size") != std::string::npos);
      }
    }
  }

  TEST_CASE("other invalid fields") {
    auto c = tiny_config();
    c.num_batches = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = tiny_config();
    c.width_divisor = 3;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = tiny_config();
    c.latent_dim = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }

  TEST_CASE("batch size is ceil(N / num_batches)") {
    GanConfig c;
    c.num_batches = 100;
    CHECK(c.batch_size(9400) == 94);
    CHECK(c.batch_size(9401) == 95);
    c.num_batches = 35;
    CHECK(c.batch_size(560) == 16);
  }

  TEST_CASE("initialization is deterministic per seed") {
    const auto c = tiny_config();
    auto a = build_gan(c, 3);
    auto b = build_gan(c, 3);
    auto d = build_gan(c, 4);
    CHECK(flat_params(a) == flat_params(b));
    CHECK(flat_params(a) != flat_params(d));
  }

  TEST_CASE("latent samples are standard normal with uniform labels") {
    GanConfig c;
    c.num_classes = 4;
    const auto z = sample_latent(10000, c, 9);
    REQUIRE(z.noise.size() == 10000u * 100u);
    double sum = 0, sq = 0;
    for (float v : z.noise) {
      sum += v;
      sq += static_cast<double>(v) * v;
    }
    const double mean = sum / z.noise.size();
    const double sd = std::sqrt(sq / z.noise.size() - mean * mean);
    CHECK(std::fabs(mean) < 0.05);
    CHECK(std::fabs(sd - 1.0) < 0.05);
    std::vector<int> counts(4, 0);
    for (int y : z.labels) ++counts[static_cast<std::size_t>(y)];
    for (int k : counts) CHECK(std::abs(k - 2500) < 200);

    const auto one = sample_latent(1, c, 9);
    CHECK(one.noise.size() == 100);
    CHECK(one.labels.size() == 1);
    CHECK(sample_latent(5, c, 2).noise == sample_latent(5, c, 2).noise);
    CHECK(sample_latent(5, c, 2).noise != sample_latent(5, c, 3).noise);
    CHECK_THROWS_AS(sample_latent(0, c, 1), ConfigError);
  }

  TEST_CASE("generated images are n x n in [-1, 1] and deterministic") {
    const auto c = tiny_config(3);
    const auto m = build_gan(c, 1);
    const auto z = sample_latent(4, c, 2);
    const auto imgs = generate(m, z);
    REQUIRE(imgs.size() == 4);
    for (const auto& img : imgs) {
      CHECK(img.size() == 16);
      for (double v : img.values()) {
        REQUIRE(v >= -1.0);
        REQUIRE(v <= 1.0);
      }
    }
    const auto again = generate(m, z);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(std::equal(imgs[i].values().begin(), imgs[i].values().end(), again[i].values().begin()));
    }
    auto bad = z;
    bad.labels[0] = 3;
    CHECK_THROWS_AS(generate(m, bad), DataError);
  }

  TEST_CASE("discriminator heads have the declared shapes and ranges") {
    const auto c = tiny_config(3);
    const auto m = build_gan(c, 1);
    std::vector<ScaledImage> imgs;
    std::mt19937 gen(4);
    for (int i = 0; i < 7; ++i) {
      std::vector<double> v(256);
      for (auto& x : v) x = std::uniform_real_distribution<double>(-1, 1)(gen);
      imgs.emplace_back(16, v);
    }
    const auto d = discriminate(m, imgs);
    CHECK(d.validity.size() == 7);
    CHECK(d.class_scores.size() == 21);
    CHECK(d.num_classes == 3);
    for (double v : d.validity) CHECK((v >= 0.0 && v <= 1.0));
    for (double v : d.class_scores) CHECK((v >= 0.0 && v <= 1.0));
    CHECK(d.predicted_classes().size() == 7);

    std::vector<ScaledImage> wrong = {ScaledImage(32, std::vector<double>(1024, 0.0))};
    CHECK_THROWS_AS(discriminate(m, wrong), DataError);
  }

  TEST_CASE("zero epochs returns the initial model and an empty trace") {
    auto c = tiny_config();
    c.epochs = 0;
    auto result = train_acgan(stripes(16, 6), c);
    auto fresh = build_gan(c, c.seed);
    CHECK(result.trace.losses.empty());
    CHECK(flat_params(result.model) == flat_params(fresh));
  }

  TEST_CASE("training records one finite entry per iteration and is reproducible") {
    auto c = tiny_config();
    const auto data = stripes(16, 9);  // N = 18, batch 6, 3 iterations per epoch
    const auto holdout = stripes(16, 2);
    TrainOptions opts;
    opts.holdout = &holdout;
    int epochs_seen = 0;
    opts.on_epoch = [&](int, double g, double d) {
      ++epochs_seen;
      CHECK(std::isfinite(g));
      CHECK(std::isfinite(d));
    };
    const auto a = train_acgan(data, c, opts);
    CHECK(epochs_seen == 2);
    REQUIRE(a.trace.losses.size() == 6);
    for (std::size_t i = 0; i < a.trace.losses.size(); ++i) {
      CHECK(a.trace.losses[i].iteration == static_cast<long>(i));
      CHECK(std::isfinite(a.trace.losses[i].g_loss));
      CHECK(std::isfinite(a.trace.losses[i].d_loss));
    }
    CHECK(a.trace.accuracy.size() == 2);
    const auto b = train_acgan(data, c, opts);
    for (std::size_t i = 0; i < a.trace.losses.size(); ++i) {
      CHECK(a.trace.losses[i].g_loss == b.trace.losses[i].g_loss);
      CHECK(a.trace.losses[i].d_loss == b.trace.losses[i].d_loss);
    }
  }

  TEST_CASE("a trailing batch of one sample is skipped") {
    auto c = tiny_config();
    c.epochs = 1;
    c.num_batches = 4;  // N = 13 -> batch 4: 4, 4, 4, 1
    auto data = stripes(16, 7);
    data.labels.pop_back();
    data.values.resize(data.values.size() - 256);
    CHECK(train_acgan(data, c).trace.losses.size() == 3);
  }

  TEST_CASE("a diverging run raises TrainingError with the iteration") {
    auto c = tiny_config();
    c.learning_rate = 1e38;
    c.epochs = 20;
    try {
      train_acgan(stripes(16, 6), c);
      FAIL("expected TrainingError");
    } catch (const TrainingError& e) {
      CHECK(e.iteration() >= 0);
      CHECK(std::string(e.what()).find("iteration") != std::string::npos);
    }
  }

  TEST_CASE("mismatched data is a configuration error") {
    auto c = tiny_config(3);
    CHECK_THROWS_AS(train_acgan(stripes(16, 4), c), ConfigError);
    c = tiny_config();
    c.image_size = 32;
    CHECK_THROWS_AS(train_acgan(stripes(16, 4), c), ConfigError);
    CHECK_THROWS_AS(train_acgan(ImageSet{}, tiny_config()), DataError);
  }

  TEST_CASE("save and load reproduce generation and discrimination") {
    TempDir dir("gan");
    auto c = tiny_config();
    c.epochs = 1;
    const auto trained = train_acgan(stripes(16, 6), c).model;
    save_gan(trained, dir / "m");
    const auto loaded = load_gan(dir / "m");
    CHECK(loaded.class_names == trained.class_names);
    CHECK(loaded.config.image_size == 16);
    const auto z = sample_latent(3, c, 1);
    const auto a = generate(trained, z);
    const auto b = generate(loaded, z);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(std::equal(a[i].values().begin(), a[i].values().end(), b[i].values().begin()));
    }
  }

  TEST_CASE("checkpoints are written at the configured cadence") {
    TempDir dir("ckpt");
    auto c = tiny_config();
    c.epochs = 4;
    c.checkpoint_every = 2;
    c.checkpoint_dir = dir / "ckpt";
    train_acgan(stripes(16, 4), c);
    CHECK(std::filesystem::exists(dir / "ckpt/epoch_00002/model.bin"));
    CHECK(std::filesystem::exists(dir / "ckpt/epoch_00004/config.json"));
    CHECK_FALSE(std::filesystem::exists(dir / "ckpt/epoch_00001"));
  }

  TEST_CASE("fake dataset layout, quantization and determinism") {
    TempDir dir("fakes");
    auto c = tiny_config();
    c.epochs = 1;
    const auto model = train_acgan(stripes(16, 4), c).model;
    const auto m = sample_fake_dataset(model, 3, dir / "a", 11);
    CHECK(m.size() == 6);
    for (const auto& r : m.records()) {
      CHECK(r.realness == Realness::fake);
      CHECK(r.byte_length == std::filesystem::file_size(r.path));
      CHECK(read_gray_image(r.path).size() == 16);
    }
    const auto m2 = sample_fake_dataset(model, 3, dir / "b", 11);
    for (std::size_t i = 0; i < m.size(); ++i) {
      CHECK(malforge::testing::read_bytes(m.records()[i].path) == malforge::testing::read_bytes(m2.records()[i].path));
    }
    CHECK(malforge::testing::read_text(dir / "a/manifest.csv").rfind("path,family,realness,byte_length\n", 0) == 0);
    CHECK(sample_fake_dataset(model, 0, dir / "c", 11).empty());
  }

  TEST_CASE("discriminator accuracy needs a non-empty test set") {
    auto m = build_gan(tiny_config(), 1);
    m.class_names = {"horizontal", "vertical"};
    CHECK_THROWS_AS(discriminator_accuracy(m, ImageSet{16, {"horizontal", "vertical"}, {}, {}}), DataError);
    const double acc = discriminator_accuracy(m, stripes(16, 5));
    CHECK((acc >= 0.0 && acc <= 1.0));
  }

  TEST_CASE("gradient check on a tiny model") {
    GanConfig c;
    c.image_size = 16;
    c.num_classes = 3;
    c.latent_dim = 6;
    c.width_divisor = 16;
    for (bool generator : {false, true}) {
      for (const auto& g : malforge::testing::gan_gradient_check(c, 4, 12, generator, 21)) {
        INFO(g.param, "[", g.index, "] analytic ", g.analytic, " numeric ", g.numeric);
        CHECK(g.rel_error <= 1e-3);
      }
    }
  }
}
