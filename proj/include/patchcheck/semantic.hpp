#pragma once

// Invariant-based overfitting detection.
//
//   C = I^P_B ∩ I^P_G      correct specification
//   E = I^F_B \ I^F_G      error specification
//
//   Overfitting-1: some inv in C has no equivalent in I^P_P
//   Overfitting-2: some inv in E has an equivalent in I^F_P
//
// Matching only happens between invariants at the same program point.

#include <string_view>
#include <tuple>
#include <vector>

#include "patchcheck/equivalence.hpp"
#include "patchcheck/invariant.hpp"

namespace patchcheck {

enum class SpecKind { Correct, Error };

struct Specification {
  SpecKind kind = SpecKind::Correct;
  PointMap items;

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& [pt, set] : items) n += set.size();
    return n;
  }
};

enum class OverfittingRule { Overfitting1, Overfitting2 };

inline std::string_view to_string(OverfittingRule r) {
  return r == OverfittingRule::Overfitting1 ? "overfitting-1" : "overfitting-2";
}

enum class SemanticDecision { Overfitting, Inconclusive };

struct Witness {
  OverfittingRule rule;
  ProgramPoint point;
  Invariant invariant;
};

struct SemanticVerdict {
  SemanticDecision decision = SemanticDecision::Inconclusive;
  std::vector<OverfittingRule> fired_rules;  // ascending, unique
  std::vector<Witness> witnesses;            // rule, then point, then canonical key

  bool fired(OverfittingRule r) const {
    for (auto f : fired_rules) {
      if (f == r) return true;
    }
    return false;
  }
};

inline Specification build_correct_spec(const PointMap& passing_buggy, const PointMap& passing_ground_truth,
                                        const EquivalenceChecker& eq = {}) {
  Specification spec{SpecKind::Correct, {}};
  for (const auto& [point, buggy_set] : passing_buggy) {
    auto gt = passing_ground_truth.find(point);
    if (gt == passing_ground_truth.end()) continue;
    InvariantSet kept;
    for (const auto& [key, inv] : buggy_set) {
      if (eq.contains(gt->second, inv)) kept.insert(inv);
    }
    if (!kept.empty()) spec.items.emplace(point, std::move(kept));
  }
  return spec;
}

inline Specification build_error_spec(const PointMap& failing_buggy, const PointMap& failing_ground_truth,
                                      const EquivalenceChecker& eq = {}) {
  Specification spec{SpecKind::Error, {}};
  static const InvariantSet kEmpty;
  for (const auto& [point, buggy_set] : failing_buggy) {
    auto gt = failing_ground_truth.find(point);
    const InvariantSet& gt_set = gt == failing_ground_truth.end() ? kEmpty : gt->second;
    InvariantSet kept;
    for (const auto& [key, inv] : buggy_set) {
      if (!eq.contains(gt_set, inv)) kept.insert(inv);
    }
    if (!kept.empty()) spec.items.emplace(point, std::move(kept));
  }
  return spec;
}

// Never answers "correct": when no rule fires the verdict is Inconclusive
// and the caller defers to the syntactic stage.
inline SemanticVerdict classify_semantic(const Specification& spec_c, const Specification& spec_e,
                                         const PointMap& patched_passing, const PointMap& patched_failing,
                                         const EquivalenceChecker& eq = {}) {
  if (spec_c.kind != SpecKind::Correct || spec_e.kind != SpecKind::Error) {
    throw Error(ErrorCode::InvalidArgument, "classify_semantic expects (Correct, Error) specifications");
  }
  static const InvariantSet kEmpty;
  auto lookup = [](const PointMap& m, const ProgramPoint& pt) -> const InvariantSet& {
    auto it = m.find(pt);
    return it == m.end() ? kEmpty : it->second;
  };

  SemanticVerdict verdict;
  for (const auto& [point, set] : spec_c.items) {
    const auto& patched = lookup(patched_passing, point);
    for (const auto& [key, inv] : set) {
      if (!eq.contains(patched, inv)) verdict.witnesses.push_back({OverfittingRule::Overfitting1, point, inv});
    }
  }
  std::size_t first_count = verdict.witnesses.size();
  for (const auto& [point, set] : spec_e.items) {
    const auto& patched = lookup(patched_failing, point);
    for (const auto& [key, inv] : set) {
      if (eq.contains(patched, inv)) verdict.witnesses.push_back({OverfittingRule::Overfitting2, point, inv});
    }
  }
  if (first_count > 0) verdict.fired_rules.push_back(OverfittingRule::Overfitting1);
  if (verdict.witnesses.size() > first_count) verdict.fired_rules.push_back(OverfittingRule::Overfitting2);
  verdict.decision = verdict.witnesses.empty() ? SemanticDecision::Inconclusive : SemanticDecision::Overfitting;
  return verdict;
}

// Convenience over a full corpus: builds C and E, then classifies.
inline SemanticVerdict classify_corpus(const InvariantCorpus& corpus, const EquivalenceChecker& eq = {}) {
  auto c = build_correct_spec(corpus.at(Variant::Buggy, Partition::PassingTraces),
                              corpus.at(Variant::GroundTruth, Partition::PassingTraces), eq);
  auto e = build_error_spec(corpus.at(Variant::Buggy, Partition::FailingTraces),
                            corpus.at(Variant::GroundTruth, Partition::FailingTraces), eq);
  return classify_semantic(c, e, corpus.at(Variant::Patched, Partition::PassingTraces),
                           corpus.at(Variant::Patched, Partition::FailingTraces), eq);
}

}  // namespace patchcheck
