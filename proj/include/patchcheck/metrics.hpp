#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "patchcheck/error.hpp"
#include "patchcheck/logistic.hpp"

namespace patchcheck {

// "Overfitting" is the positive class.
struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fn = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;

  std::size_t total() const noexcept { return tp + fn + fp + tn; }

  void add(Verdict predicted, Verdict actual) {
    bool pred_pos = predicted == Verdict::Overfitting;
    bool act_pos = actual == Verdict::Overfitting;
    if (pred_pos && act_pos) ++tp;
    else if (pred_pos) ++fp;
    else if (act_pos) ++fn;
    else ++tn;
  }

  bool operator==(const ConfusionMatrix&) const = default;
};

// A metric whose denominator is zero is absent, never 0.
struct MetricsReport {
  ConfusionMatrix confusion;
  std::optional<double> recall;
  std::optional<double> precision;
  std::optional<double> accuracy;
  std::optional<double> f1;
  std::optional<double> auc;
};

inline MetricsReport compute_metrics(const ConfusionMatrix& c) {
  MetricsReport r;
  r.confusion = c;
  auto ratio = [](std::size_t num, std::size_t den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  r.recall = ratio(c.tp, c.tp + c.fn);
  r.precision = ratio(c.tp, c.tp + c.fp);
  r.accuracy = ratio(c.tp + c.tn, c.total());
  if (r.recall && r.precision && (*r.recall + *r.precision) > 0.0) {
    r.f1 = 2.0 * *r.recall * *r.precision / (*r.recall + *r.precision);
  }
  return r;
}

// Throws UndefinedMetric naming the metric when it is absent.
inline double require_metric(const std::optional<double>& value, const std::string& name) {
  if (!value) throw Error(ErrorCode::UndefinedMetric, name);
  return *value;
}

struct ScoredLabel {
  double score = 0.0;
  Verdict label = Verdict::Correct;
};

// Mann–Whitney AUC with ascending ranks and average ranks for ties:
//   AUC = (S0 - n0(n0+1)/2) / (n0 n1),  S0 = rank sum of overfitting scores.
inline double compute_auc(const std::vector<ScoredLabel>& scores) {
  std::size_t n0 = 0;
  for (const auto& s : scores) n0 += s.label == Verdict::Overfitting ? 1 : 0;
  const std::size_t n1 = scores.size() - n0;
  if (n0 == 0 || n1 == 0) throw Error(ErrorCode::SingleClassData, "AUC needs both classes");

  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a].score < scores[b].score; });

  double s0 = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]].score == scores[order[i]].score) ++j;
    // Ranks i+1 .. j+1 share their mean.
    double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t t = i; t <= j; ++t) {
      if (scores[order[t]].label == Verdict::Overfitting) s0 += avg_rank;
    }
    i = j + 1;
  }
  double dn0 = static_cast<double>(n0);
  double dn1 = static_cast<double>(n1);
  return (s0 - dn0 * (dn0 + 1.0) / 2.0) / (dn0 * dn1);
}

// Smallest threshold admitting no false positive on the validation scores:
// the largest score among correct patches.
inline double tune_threshold(const std::vector<ScoredLabel>& validation) {
  std::optional<double> best;
  for (const auto& s : validation) {
    if (s.label == Verdict::Correct) best = best ? std::max(*best, s.score) : s.score;
  }
  if (!best) throw Error(ErrorCode::NoCorrectPatches, "validation set has no correct patches");
  return std::clamp(*best, 0.0, 1.0);
}

// Half-up rounding to `digits` decimals, as used in report tables.
inline double round_half_up(double value, int digits = 2) {
  double scale = std::pow(10.0, digits);
  // Nudge by a few ulps so values like 0.805 stored as 0.80499999... round up.
  return std::floor(value * scale + 0.5 + 1e-9) / scale;
}

}  // namespace patchcheck
