#pragma once

// Two-stage assessment: the invariant-based stage runs first and can only
// reject a patch; anything it cannot reject goes to the embedding-based
// scorer. Records without usable invariant dumps skip straight to the scorer
// (stage "fallback").

#include <algorithm>
#include <cstdio>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "patchcheck/dataset.hpp"
#include "patchcheck/embedding.hpp"
#include "patchcheck/equivalence.hpp"
#include "patchcheck/invariant.hpp"
#include "patchcheck/logistic.hpp"
#include "patchcheck/metrics.hpp"
#include "patchcheck/semantic.hpp"

namespace patchcheck {

enum class EmbedderKind { ExternalFile, HashingFallback };

struct PipelineConfig {
  Granularity granularity = Granularity::ExecutedMethods;
  // Unset: the model file's threshold, or kDefaultThreshold without a model.
  std::optional<double> threshold;
  bool semantic_enabled = true;
  bool syntactic_enabled = true;
  EmbedderKind embedder = EmbedderKind::HashingFallback;
  std::optional<std::string> solver_hook;
  std::uint64_t seed = 42;

  void validate() const {
    if (!semantic_enabled && !syntactic_enabled) {
      throw Error(ErrorCode::InvalidArgument, "at least one of the semantic and syntactic stages must be enabled");
    }
    if (threshold && !(*threshold >= 0.0 && *threshold <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "threshold must lie in [0, 1]");
    }
  }

  double effective_threshold(const PredictorModel* model) const {
    if (threshold) return *threshold;
    return model != nullptr ? model->threshold : kDefaultThreshold;
  }
};

enum class Stage { Semantic, Syntactic, Fallback };

inline std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::Semantic: return "semantic";
    case Stage::Syntactic: return "syntactic";
    case Stage::Fallback: return "fallback";
  }
  return "?";
}

struct Assessment {
  Verdict verdict = Verdict::Correct;
  Stage stage = Stage::Semantic;
  std::optional<double> score;
  std::optional<SemanticVerdict> semantic;
  std::vector<std::string> warnings;
};

// Everything assess_patch needs besides the record; none of it is owned.
struct AssessmentInputs {
  const PredictorModel* model = nullptr;
  const EmbeddingTable* embeddings = nullptr;  // required for EmbedderKind::ExternalFile
};

inline InvariantCorpus load_record_corpus(const PatchRecord& record) {
  InvariantCorpus corpus;
  for (const auto& [slot, path] : record.invariant_paths) {
    corpus.at(slot.first, slot.second) = parse_invariant_file(read_file(path));
  }
  return corpus;
}

namespace detail {

inline std::string missing(std::string_view stage, const std::string& what) {
  return std::string(stage) + ": " + what;
}

inline std::vector<EmbeddingVector> record_embeddings(const PatchRecord& record, const PipelineConfig& config,
                                                      const AssessmentInputs& inputs, std::size_t k) {
  std::vector<EmbeddingVector> out;
  for (auto role : {CodeRole::Buggy, CodeRole::Patched, CodeRole::GroundTruth}) {
    auto id = record.embedding_id(role);
    if (config.embedder == EmbedderKind::ExternalFile) {
      const EmbeddingVector* ev = inputs.embeddings ? inputs.embeddings->find(id) : nullptr;
      if (ev == nullptr) throw Error(ErrorCode::MissingInputs, missing("syntactic", "embedding " + id));
      out.push_back(*ev);
    } else {
      const auto& path = record.code_paths.at(role);
      std::string text;
      try {
        text = read_file(path);
      } catch (const Error&) {
        throw Error(ErrorCode::MissingInputs, missing("syntactic", "code file " + path.string()));
      }
      out.push_back(hashing_embed(text, k, id));
    }
  }
  return out;
}

}  // namespace detail

inline Assessment assess_patch(const PatchRecord& record, const PipelineConfig& config,
                               const AssessmentInputs& inputs, const EquivalenceChecker& eq = {}) {
  config.validate();
  if (config.syntactic_enabled && inputs.model == nullptr) {
    throw Error(ErrorCode::ModelRequired, "the syntactic stage needs a trained model");
  }

  Assessment result;
  bool semantic_unavailable = false;
  if (config.semantic_enabled) {
    std::optional<InvariantCorpus> corpus;
    if (record.has_all_invariant_paths()) {
      try {
        corpus = load_record_corpus(record);
      } catch (const Error& e) {
        result.warnings.push_back(record.id + ": invariants unusable (" + e.what() + ")");
      }
    }
    if (!corpus) {
      semantic_unavailable = true;
      if (!config.syntactic_enabled) {
        throw Error(ErrorCode::MissingInputs, detail::missing("semantic", "invariant dumps for " + record.id));
      }
    } else {
      if (config.granularity == Granularity::BuggyMethods) {
        if (record.modified_methods.empty()) {
          throw Error(ErrorCode::MissingInputs, detail::missing("semantic", "modified_methods for " + record.id));
        }
        for (auto v : kAllVariants) {
          for (auto p : kAllPartitions) {
            corpus->at(v, p) = filter_by_methods(corpus->at(v, p), record.modified_methods, config.granularity);
          }
        }
      }
      result.semantic = classify_corpus(*corpus, eq);
      if (result.semantic->decision == SemanticDecision::Overfitting) {
        result.verdict = Verdict::Overfitting;
        result.stage = Stage::Semantic;
        return result;
      }
      if (!config.syntactic_enabled) {
        result.verdict = Verdict::Correct;
        result.stage = Stage::Semantic;
        return result;
      }
    }
  }

  const PredictorModel& model = *inputs.model;
  auto emb = detail::record_embeddings(record, config, inputs, model.k);
  auto features = feature_vector(emb[0], emb[1], emb[2]);
  for (auto& w : features.warnings) result.warnings.push_back(std::move(w));
  double score = lr_predict(model, features.combined);
  result.score = score;
  result.verdict = classify_threshold(score, config.effective_threshold(inputs.model));
  result.stage = semantic_unavailable ? Stage::Fallback : Stage::Syntactic;
  return result;
}

// ---------------------------------------------------------------------------
// Batches

struct PatchRow {
  std::string id;
  std::optional<Verdict> label;
  std::optional<Assessment> assessment;  // absent on error
  std::optional<std::string> error;
};

struct BatchReport {
  double threshold = kDefaultThreshold;
  std::vector<PatchRow> rows;  // ordered by id
  std::optional<MetricsReport> metrics;
  std::size_t error_count = 0;
  std::vector<std::string> warnings;
};

// Metrics over assessed rows; absent unless every assessed row is labeled.
inline std::optional<MetricsReport> aggregate_metrics(const std::vector<PatchRow>& rows) {
  ConfusionMatrix confusion;
  std::vector<ScoredLabel> scored;
  bool any = false;
  for (const auto& row : rows) {
    if (!row.assessment) continue;
    if (!row.label) return std::nullopt;
    any = true;
    confusion.add(row.assessment->verdict, *row.label);
    if (row.assessment->score) scored.push_back({*row.assessment->score, *row.label});
  }
  if (!any) return std::nullopt;
  auto report = compute_metrics(confusion);
  bool has_pos = std::any_of(scored.begin(), scored.end(), [](const auto& s) { return s.label == Verdict::Overfitting; });
  bool has_neg = std::any_of(scored.begin(), scored.end(), [](const auto& s) { return s.label == Verdict::Correct; });
  if (has_pos && has_neg) report.auc = compute_auc(scored);
  return report;
}

inline BatchReport run_batch(std::vector<PatchRecord> records, const PipelineConfig& config,
                             const AssessmentInputs& inputs, const EquivalenceChecker& eq = {}) {
  if (records.empty()) throw Error(ErrorCode::EmptyManifest, "manifest has no records");
  config.validate();
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.id < b.id; });

  BatchReport report;
  report.threshold = config.effective_threshold(inputs.model);
  for (const auto& record : records) {
    PatchRow row{record.id, record.label, std::nullopt, std::nullopt};
    try {
      row.assessment = assess_patch(record, config, inputs, eq);
      for (const auto& w : row.assessment->warnings) report.warnings.push_back(w);
    } catch (const Error& e) {
      // ModelRequired is a configuration problem, not a per-record one.
      if (e.code() == ErrorCode::ModelRequired) throw;
      row.error = e.what();
      ++report.error_count;
    }
    report.rows.push_back(std::move(row));
  }
  report.metrics = aggregate_metrics(report.rows);
  return report;
}

// Verdicts re-derived at another threshold; semantic rejections stand.
inline std::vector<PatchRow> rethreshold(const std::vector<PatchRow>& rows, double threshold) {
  auto out = rows;
  for (auto& row : out) {
    if (row.assessment && row.assessment->score) {
      row.assessment->verdict = classify_threshold(*row.assessment->score, threshold);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report rendering

inline nlohmann::json metrics_json(const MetricsReport& m, bool rounded) {
  nlohmann::json j = nlohmann::json::object();
  auto put = [&](const char* name, const std::optional<double>& v) {
    if (v) j[name] = rounded ? round_half_up(*v) : *v;
  };
  put("recall", m.recall);
  put("precision", m.precision);
  put("accuracy", m.accuracy);
  put("f1", m.f1);
  put("auc", m.auc);
  return j;
}

inline nlohmann::json report_json(const BatchReport& report) {
  nlohmann::json j;
  j["threshold"] = report.threshold;
  j["errors"] = report.error_count;
  if (report.metrics) {
    const auto& c = report.metrics->confusion;
    j["confusion"] = {{"tp", c.tp}, {"fn", c.fn}, {"fp", c.fp}, {"tn", c.tn}};
    j["metrics"] = metrics_json(*report.metrics, false);
    j["metrics_rounded"] = metrics_json(*report.metrics, true);
  }
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : report.rows) {
    nlohmann::json r;
    r["id"] = row.id;
    if (row.label) r["label"] = to_string(*row.label);
    if (row.assessment) {
      r["stage"] = to_string(row.assessment->stage);
      r["verdict"] = to_string(row.assessment->verdict);
      if (row.assessment->score) r["score"] = *row.assessment->score;
    } else {
      r["error"] = *row.error;
    }
    rows.push_back(std::move(r));
  }
  j["per_patch"] = std::move(rows);
  return j;
}

inline std::string format_fixed(std::optional<double> v, int digits = 2) {
  if (!v) return "-";
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(digits) << round_half_up(*v, digits);
  return ss.str();
}

inline std::string report_table(const BatchReport& report) {
  std::size_t id_width = 2;
  for (const auto& row : report.rows) id_width = std::max(id_width, row.id.size());
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(id_width)) << "id" << "  " << std::setw(10) << "stage"
      << std::setw(12) << "verdict" << std::setw(10) << "score" << "label\n";
  for (const auto& row : report.rows) {
    out << std::setw(static_cast<int>(id_width)) << row.id << "  ";
    if (row.assessment) {
      out << std::setw(10) << to_string(row.assessment->stage) << std::setw(12)
          << to_string(row.assessment->verdict) << std::setw(10) << format_fixed(row.assessment->score, 4);
    } else {
      out << std::setw(32) << "error";
    }
    out << (row.label ? to_string(*row.label) : "-") << '\n';
  }
  out << "\nthreshold " << report.threshold << ", " << report.rows.size() << " patches, " << report.error_count
      << " errors\n";
  for (const auto& row : report.rows) {
    if (row.error) out << "  " << row.id << ": " << *row.error << '\n';
  }
  if (report.metrics) {
    const auto& m = *report.metrics;
    const auto& c = m.confusion;
    out << "TP " << c.tp << "  FN " << c.fn << "  FP " << c.fp << "  TN " << c.tn << '\n';
    out << "Recall " << format_fixed(m.recall) << "  Precision " << format_fixed(m.precision) << "  Accuracy "
        << format_fixed(m.accuracy) << "  F1 " << format_fixed(m.f1) << "  AUC " << format_fixed(m.auc) << '\n';
  }
  return out.str();
}

// threshold,recall,precision,accuracy,f1 for T = 0, 0.025, ..., 1.
inline std::string threshold_sweep_csv(const BatchReport& report) {
  std::ostringstream out;
  out << "threshold,recall,precision,accuracy,f1\n";
  auto cell = [](const std::optional<double>& v) {
    if (!v) return std::string();
    std::ostringstream ss;
    ss << std::setprecision(6) << *v;
    return ss.str();
  };
  for (int step = 0; step <= 40; ++step) {
    double t = step / 40.0;
    auto m = aggregate_metrics(rethreshold(report.rows, t));
    out << std::fixed << std::setprecision(3) << t << std::defaultfloat;
    if (m) out << ',' << cell(m->recall) << ',' << cell(m->precision) << ',' << cell(m->accuracy) << ',' << cell(m->f1);
    else out << ",,,,";
    out << '\n';
  }
  return out.str();
}

}  // namespace patchcheck
