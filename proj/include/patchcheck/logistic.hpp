#pragma once

// Logistic-regression patch scorer. Training minimizes
//
//   L(w, b) = 1/n Σ [ softplus(z_i) - y_i z_i ] + λ/2 ||w||²,   z_i = w·x_i + b
//
// by full-batch gradient descent on z-scored features. Label 1 = overfitting.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "patchcheck/embedding.hpp"
#include "patchcheck/error.hpp"

namespace patchcheck {

inline constexpr double kDefaultThreshold = 0.975;

struct TrainConfig {
  double learning_rate = 0.1;
  int epochs = 2000;
  double l2_penalty = 1e-4;
  std::uint64_t seed = 42;

  bool operator==(const TrainConfig&) const = default;
};

struct Standardization {
  std::vector<double> mean;
  std::vector<double> std;

  bool operator==(const Standardization&) const = default;

  static Standardization identity(std::size_t n) { return {std::vector<double>(n, 0.0), std::vector<double>(n, 1.0)}; }

  // Per-dimension z-score parameters; constant columns get std = 1.
  static Standardization fit(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw Error(ErrorCode::InvalidArgument, "cannot fit standardization on no rows");
    const std::size_t d = rows.front().size();
    Standardization s{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
    for (const auto& r : rows) {
      for (std::size_t j = 0; j < d; ++j) s.mean[j] += r[j];
    }
    for (double& m : s.mean) m /= static_cast<double>(rows.size());
    for (const auto& r : rows) {
      for (std::size_t j = 0; j < d; ++j) {
        double c = r[j] - s.mean[j];
        s.std[j] += c * c;
      }
    }
    for (double& v : s.std) {
      v = std::sqrt(v / static_cast<double>(rows.size()));
      if (!(v > 1e-12)) v = 1.0;
    }
    return s;
  }

  std::vector<double> apply(std::span<const double> x) const {
    std::vector<double> out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - mean[j]) / std[j];
    return out;
  }
};

struct PredictorModel {
  std::size_t k = 0;  // embedding dimension; weights has 4k + 4 entries
  std::vector<double> weights;
  double bias = 0.0;
  Standardization standardization;
  double threshold = kDefaultThreshold;
  TrainConfig config;

  bool operator==(const PredictorModel&) const = default;
};

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + e^z) without overflow.
inline double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Regularized mean logistic loss and its gradient. `x` rows are already
// standardized; `labels` are 0/1.
struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> grad_w;
  double grad_b = 0.0;
};

inline LossAndGradient logistic_loss_and_gradient(std::span<const double> w, double b,
                                                  const std::vector<std::vector<double>>& x,
                                                  std::span<const int> labels, double l2) {
  LossAndGradient out;
  out.grad_w.assign(w.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double z = dot(w, x[i]) + b;
    double y = labels[i];
    out.loss += softplus(z) - y * z;
    double r = sigmoid(z) - y;
    for (std::size_t j = 0; j < w.size(); ++j) out.grad_w[j] += r * x[i][j];
    out.grad_b += r;
  }
  out.loss *= inv_n;
  out.grad_b *= inv_n;
  double reg = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) {
    out.grad_w[j] = out.grad_w[j] * inv_n + l2 * w[j];
    reg += w[j] * w[j];
  }
  out.loss += 0.5 * l2 * reg;
  return out;
}

namespace detail {

// Uniform in [lo, hi] from the top 53 bits; independent of the standard
// library's distribution implementation.
inline double uniform(std::mt19937_64& gen, double lo, double hi) {
  double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

}  // namespace detail

// Training-set rows are the `combined` feature vectors (4k + 4 values).
inline PredictorModel lr_train(const std::vector<std::vector<double>>& features, const std::vector<int>& labels,
                               const TrainConfig& config = {}, std::vector<double>* loss_trace = nullptr) {
  if (features.size() != labels.size()) {
    throw Error(ErrorCode::InvalidArgument, "feature and label counts differ");
  }
  if (features.empty()) throw Error(ErrorCode::SingleClassData, "no training examples");
  std::size_t positives = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw Error(ErrorCode::InvalidArgument, "labels must be 0 or 1");
    positives += static_cast<std::size_t>(y);
  }
  if (positives == 0 || positives == labels.size()) {
    throw Error(ErrorCode::SingleClassData, "training data needs both correct and overfitting examples");
  }
  const std::size_t d = features.front().size();
  if (d < 4 || (d - 4) % 4 != 0) {
    throw Error(ErrorCode::DimensionMismatch, "feature length " + std::to_string(d) + " is not 4k+4");
  }
  for (const auto& row : features) {
    if (row.size() != d) throw Error(ErrorCode::DimensionMismatch, "ragged feature rows");
  }

  PredictorModel model;
  model.k = (d - 4) / 4;
  model.config = config;
  model.standardization = Standardization::fit(features);
  std::vector<std::vector<double>> x;
  x.reserve(features.size());
  for (const auto& row : features) x.push_back(model.standardization.apply(row));

  std::mt19937_64 gen(config.seed);
  model.weights.resize(d);
  for (double& w : model.weights) w = detail::uniform(gen, -0.01, 0.01);
  model.bias = 0.0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    auto lg = logistic_loss_and_gradient(model.weights, model.bias, x, labels, config.l2_penalty);
    if (!std::isfinite(lg.loss)) {
      throw Error(ErrorCode::NonFiniteLoss, "loss diverged at epoch " + std::to_string(epoch));
    }
    if (loss_trace) loss_trace->push_back(lg.loss);
    for (std::size_t j = 0; j < d; ++j) model.weights[j] -= config.learning_rate * lg.grad_w[j];
    model.bias -= config.learning_rate * lg.grad_b;
  }
  auto final_loss = logistic_loss_and_gradient(model.weights, model.bias, x, labels, config.l2_penalty).loss;
  if (!std::isfinite(final_loss) || !std::isfinite(model.bias) ||
      !std::all_of(model.weights.begin(), model.weights.end(), [](double w) { return std::isfinite(w); })) {
    throw Error(ErrorCode::NonFiniteLoss, "training produced non-finite parameters");
  }
  return model;
}

// Probability that the patch is overfitting.
inline double lr_predict(const PredictorModel& model, std::span<const double> combined) {
  if (combined.size() != model.weights.size()) {
    throw Error(ErrorCode::DimensionMismatch, "feature length " + std::to_string(combined.size()) +
                                                  " does not match model (" + std::to_string(model.weights.size()) +
                                                  ")");
  }
  auto x = model.standardization.apply(combined);
  return sigmoid(dot(model.weights, x) + model.bias);
}

enum class Verdict { Correct, Overfitting };

inline std::string_view to_string(Verdict v) { return v == Verdict::Correct ? "correct" : "overfitting"; }

// Correct iff score <= threshold.
inline Verdict classify_threshold(double score, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "threshold must lie in [0, 1]");
  }
  return score <= threshold ? Verdict::Correct : Verdict::Overfitting;
}

// ---------------------------------------------------------------------------
// Model file

inline nlohmann::json to_json(const PredictorModel& m) {
  nlohmann::json j;
  j["k"] = m.k;
  j["weights"] = m.weights;
  j["bias"] = m.bias;
  j["standardization"] = {{"mean", m.standardization.mean}, {"std", m.standardization.std}};
  j["threshold"] = m.threshold;
  j["config"] = {{"learning_rate", m.config.learning_rate},
                 {"epochs", m.config.epochs},
                 {"l2_penalty", m.config.l2_penalty},
                 {"seed", m.config.seed}};
  return j;
}

inline PredictorModel model_from_json(const nlohmann::json& j) {
  try {
    PredictorModel m;
    m.k = j.at("k").get<std::size_t>();
    m.weights = j.at("weights").get<std::vector<double>>();
    m.bias = j.at("bias").get<double>();
    if (j.contains("standardization")) {
      m.standardization.mean = j["standardization"].at("mean").get<std::vector<double>>();
      m.standardization.std = j["standardization"].at("std").get<std::vector<double>>();
    } else {
      m.standardization = Standardization::identity(m.weights.size());
    }
    m.threshold = j.value("threshold", kDefaultThreshold);
    if (j.contains("config")) {
      const auto& c = j["config"];
      m.config.learning_rate = c.value("learning_rate", m.config.learning_rate);
      m.config.epochs = c.value("epochs", m.config.epochs);
      m.config.l2_penalty = c.value("l2_penalty", m.config.l2_penalty);
      m.config.seed = c.value("seed", m.config.seed);
    }
    const std::size_t d = combined_feature_length(m.k);
    if (m.weights.size() != d || m.standardization.mean.size() != d || m.standardization.std.size() != d) {
      throw Error(ErrorCode::DimensionMismatch, "model arrays must have 4k+4 = " + std::to_string(d) + " entries");
    }
    bool finite = std::isfinite(m.bias) && std::isfinite(m.threshold);
    for (const auto* v : {&m.weights, &m.standardization.mean, &m.standardization.std}) {
      for (double x : *v) finite = finite && std::isfinite(x);
    }
    if (!finite) throw Error(ErrorCode::InvalidFormat, "model contains non-finite values");
    for (double s : m.standardization.std) {
      if (s == 0.0) throw Error(ErrorCode::InvalidFormat, "model standardization has zero std");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidFormat, std::string("model file: ") + e.what());
  }
}

}  // namespace patchcheck
