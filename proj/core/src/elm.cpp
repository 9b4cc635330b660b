#include "malforge/elm.hpp"

#include <algorithm>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "malforge/cnn.hpp"
#include "malforge/error.hpp"
#include "malforge/nn/serialize.hpp"
#include "malforge/random.hpp"

namespace fs = std::filesystem;

namespace malforge {

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& a, double rcond) {
  if (a.size() == 0) return Eigen::MatrixXd::Zero(a.cols(), a.rows());
  Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  const double cutoff = rcond * (s.size() ? s(0) : 0.0);
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff) inv(i) = 1.0 / s(i);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

int default_hidden_units(int image_size) {
  switch (image_size) {
    case 64:
      return 50000;
    case 128:
      return 20000;
    default:
      return 5000;
  }
}

Eigen::MatrixXd elm_hidden(const ElmModel& model, const Eigen::MatrixXd& features) {
  if (features.cols() != model.hidden_weights.rows()) {
    throw DataError("elm: expected " + std::to_string(model.hidden_weights.rows()) + " features, got " +
                    std::to_string(features.cols()));
  }
  Eigen::MatrixXd pre = features * model.hidden_weights;
  pre.rowwise() += model.hidden_bias.transpose();
  return pre.unaryExpr([](double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); });
}

Eigen::MatrixXd elm_scores(const ElmModel& model, const Eigen::MatrixXd& features) {
  return elm_hidden(model, features) * model.output_weights;
}

std::vector<int> elm_predict(const ElmModel& model, const Eigen::MatrixXd& features) {
  const Eigen::MatrixXd scores = elm_scores(model, features);
  std::vector<int> out(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    Eigen::Index best = 0;
    scores.row(r).maxCoeff(&best);
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

ElmModel elm_train(const Eigen::MatrixXd& features, std::span<const int> labels, int hidden_units,
                   std::uint64_t seed, int num_classes) {
  if (hidden_units <= 0) throw ConfigError("elm.hidden_units: must be positive (got " + std::to_string(hidden_units) + ")");
  if (features.rows() < 1) throw DataError("elm: need at least one training sample");
  if (static_cast<std::size_t>(features.rows()) != labels.size()) throw DataError("elm: feature/label count mismatch");
  const int inferred = *std::max_element(labels.begin(), labels.end()) + 1;
  if (num_classes == 0) num_classes = inferred;
  for (int y : labels) {
    if (y < 0 || y >= num_classes) throw DataError("elm: label " + std::to_string(y) + " out of range");
  }

  ElmModel model;
  const auto d = features.cols();
  Rng rng(derive_seed(seed, "elm/hidden"));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  model.hidden_weights.resize(d, hidden_units);
  for (Eigen::Index j = 0; j < model.hidden_weights.cols(); ++j) {
    for (Eigen::Index i = 0; i < d; ++i) model.hidden_weights(i, j) = u(rng);
  }
  model.hidden_bias.resize(hidden_units);
  for (Eigen::Index j = 0; j < hidden_units; ++j) model.hidden_bias(j) = u(rng);

  Eigen::MatrixXd targets = Eigen::MatrixXd::Zero(features.rows(), num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) targets(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  model.output_weights = pseudo_inverse(elm_hidden(model, features)) * targets;
  model.class_names.resize(static_cast<std::size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c) model.class_names[c] = "class" + std::to_string(c);
  return model;
}

Eigen::MatrixXd image_features(const ImageSet& images) {
  const auto per = static_cast<Eigen::Index>(images.pixels_per_image());
  Eigen::MatrixXd x(static_cast<Eigen::Index>(images.size()), per);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < per; ++c) x(r, c) = images.values[static_cast<std::size_t>(r * per + c)];
  }
  return x;
}

ElmModel elm_train(const ImageSet& train, int hidden_units, std::uint64_t seed) {
  if (train.size() == 0) throw DataError("elm: empty training set");
  ElmModel model = elm_train(image_features(train), train.labels, hidden_units, seed, train.num_classes());
  model.class_names = train.classes;
  return model;
}

EvalReport evaluate(const ElmModel& model, const ImageSet& test) {
  if (test.size() == 0) throw DataError("cannot evaluate an empty test set");
  const auto truth = align_labels(test, model.class_names);
  return evaluate_predictions(truth, elm_predict(model, image_features(test)), model.class_names);
}

EvalReport evaluate(const ElmModel& model, const DatasetManifest& test) {
  if (test.empty()) throw DataError("cannot evaluate an empty test set");
  return evaluate(model, load_image_set(test));
}

namespace {

nn::NamedArray matrix_array(const std::string& name, const Eigen::MatrixXd& m) {
  nn::NamedArray a{name, {static_cast<int>(m.rows()), static_cast<int>(m.cols())}, {}};
  a.values.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) a.values.push_back(m(r, c));
  }
  return a;
}

Eigen::MatrixXd array_matrix(const nn::NamedArray& a) {
  if (a.shape.size() != 2) throw DataError("array '" + a.name + "' is not a matrix");
  Eigen::MatrixXd m(a.shape[0], a.shape[1]);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = a.values[static_cast<std::size_t>(r * m.cols() + c)];
  }
  return m;
}

}  // namespace

void save_elm(const ElmModel& model, const fs::path& dir) {
  fs::create_directories(dir);
  nn::save_arrays(dir / "elm.bin",
                  {matrix_array("hidden_weights", model.hidden_weights),
                   matrix_array("hidden_bias", model.hidden_bias.transpose()),
                   matrix_array("output_weights", model.output_weights)},
                  nn::Precision::f64);
  nlohmann::json j = {{"activation", model.activation},
                      {"hidden_units", model.hidden_units()},
                      {"input_features", model.hidden_weights.rows()},
                      {"class_names", model.class_names}};
  std::ofstream out(dir / "elm.json", std::ios::trunc);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("cannot write " + (dir / "elm.json").string());
}

ElmModel load_elm(const fs::path& dir) {
  std::ifstream in(dir / "elm.json");
  if (!in) throw IoError("cannot open " + (dir / "elm.json").string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("elm.json: " + std::string(e.what()));
  }
  const auto arrays = nn::load_arrays(dir / "elm.bin");
  ElmModel model;
  model.activation = j.at("activation");
  model.class_names = j.at("class_names").get<std::vector<std::string>>();
  model.hidden_weights = array_matrix(nn::find_array(arrays, "hidden_weights"));
  model.hidden_bias = array_matrix(nn::find_array(arrays, "hidden_bias")).transpose();
  model.output_weights = array_matrix(nn::find_array(arrays, "output_weights"));
  if (model.activation != "sigmoid") throw DataError("unsupported ELM activation '" + model.activation + "'");
  return model;
}

}  // namespace malforge
