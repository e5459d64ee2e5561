#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <variant>

#include "patchcheck/atom.hpp"

namespace patchcheck {

// Normal form of an atom. Within the linear fragment two atoms define the
// same set of rational solutions iff their canonical forms are identical:
//   * terms sorted by variable name, zero coefficients dropped
//   * Ge/Gt rewritten to Le/Lt by negating both sides
//   * everything divided by gcd(|coefficients| + |constant|)
//   * Eq/Ne oriented so the leading coefficient is positive
//   * variable-free atoms collapse to `0 == 0` (true) or `0 != 0` (false)
// Strict inequalities are never tightened: `x < 1` and `x <= 0` differ.
class CanonicalAtom {
 public:
  const InvariantAtom& form() const noexcept { return form_; }

  // Injective text rendering; used as the dedup / lookup key.
  const std::string& key() const noexcept { return key_; }

  bool operator==(const CanonicalAtom& other) const { return key_ == other.key_; }
  auto operator<=>(const CanonicalAtom& other) const { return key_ <=> other.key_; }

 private:
  friend CanonicalAtom normalize(const InvariantAtom& atom);

  explicit CanonicalAtom(InvariantAtom form) : form_(std::move(form)), key_(make_key(form_)) {}

  static std::string make_key(const InvariantAtom& atom) {
    static constexpr const char* kTags[] = {"lin|", "cls|", "oneof|", "opaque|"};
    return kTags[atom.index()] + to_string(atom);
  }

  InvariantAtom form_;
  std::string key_;
};

namespace detail {

inline bool evaluate_constant(Relation rel, std::int64_t lhs, std::int64_t rhs) {
  switch (rel) {
    case Relation::Lt: return lhs < rhs;
    case Relation::Le: return lhs <= rhs;
    case Relation::Eq: return lhs == rhs;
    case Relation::Ne: return lhs != rhs;
    case Relation::Ge: return lhs >= rhs;
    case Relation::Gt: return lhs > rhs;
  }
  return false;
}

inline LinearComparison normalize_linear(LinearComparison lc) {
  // Merge duplicates in case the atom was built by hand rather than parsed.
  std::sort(lc.terms.begin(), lc.terms.end(),
            [](const LinearTerm& a, const LinearTerm& b) { return a.variable < b.variable; });
  std::vector<LinearTerm> merged;
  for (auto& t : lc.terms) {
    if (!merged.empty() && merged.back().variable == t.variable) {
      merged.back().coefficient += t.coefficient;
    } else {
      merged.push_back(std::move(t));
    }
  }
  std::erase_if(merged, [](const LinearTerm& t) { return t.coefficient == 0; });
  lc.terms = std::move(merged);

  if (lc.terms.empty()) {
    bool holds = evaluate_constant(lc.relation, 0, lc.constant);
    return LinearComparison{{}, holds ? Relation::Eq : Relation::Ne, 0};
  }

  auto negate_all = [&lc] {
    for (auto& t : lc.terms) t.coefficient = -t.coefficient;
    lc.constant = -lc.constant;
  };

  if (lc.relation == Relation::Ge) {
    negate_all();
    lc.relation = Relation::Le;
  } else if (lc.relation == Relation::Gt) {
    negate_all();
    lc.relation = Relation::Lt;
  }

  std::int64_t g = std::abs(lc.constant);
  for (const auto& t : lc.terms) g = std::gcd(g, std::abs(t.coefficient));
  if (g > 1) {
    for (auto& t : lc.terms) t.coefficient /= g;
    lc.constant /= g;
  }

  if ((lc.relation == Relation::Eq || lc.relation == Relation::Ne) && lc.terms.front().coefficient < 0) {
    negate_all();
  }
  return lc;
}

}  // namespace detail

inline CanonicalAtom normalize(const InvariantAtom& atom) {
  struct Visitor {
    InvariantAtom operator()(const LinearComparison& lc) const { return detail::normalize_linear(lc); }
    InvariantAtom operator()(const ClassEquality& ce) const {
      return ClassEquality{normalize_whitespace(ce.expression), normalize_whitespace(ce.class_literal)};
    }
    InvariantAtom operator()(OneOf o) const {
      for (auto& v : o.values) v = normalize_whitespace(v);
      std::sort(o.values.begin(), o.values.end());
      o.values.erase(std::unique(o.values.begin(), o.values.end()), o.values.end());
      o.expression = normalize_whitespace(o.expression);
      return o;
    }
    InvariantAtom operator()(const Opaque& o) const { return Opaque{normalize_whitespace(o.normalized_text)}; }
  };
  return CanonicalAtom(std::visit(Visitor{}, atom));
}

inline CanonicalAtom normalize(const CanonicalAtom& atom) { return normalize(atom.form()); }

}  // namespace patchcheck
