#pragma once

// Structured forms of likely-invariant text and the parser for the
// supported fragment: linear integer comparisons (with `orig(...)` and
// `size(...)` variables), class-equality atoms, and one-of atoms. Anything
// outside the fragment is kept as whitespace-normalized opaque text.

#include <cctype>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace patchcheck {

enum class Relation { Lt, Le, Eq, Ne, Ge, Gt };

inline std::string_view to_string(Relation r) {
  switch (r) {
    case Relation::Lt: return "<";
    case Relation::Le: return "<=";
    case Relation::Eq: return "==";
    case Relation::Ne: return "!=";
    case Relation::Ge: return ">=";
    case Relation::Gt: return ">";
  }
  return "?";
}

struct LinearTerm {
  std::int64_t coefficient = 0;
  std::string variable;

  bool operator==(const LinearTerm&) const = default;
};

// sum(terms) <relation> constant
struct LinearComparison {
  std::vector<LinearTerm> terms;
  Relation relation = Relation::Eq;
  std::int64_t constant = 0;

  bool operator==(const LinearComparison&) const = default;
};

// `<expression>.getClass() == <class_literal>.class`
struct ClassEquality {
  std::string expression;
  std::string class_literal;

  bool operator==(const ClassEquality&) const = default;
};

// `<expression> one of { v1, v2, ... }`
struct OneOf {
  std::string expression;
  std::vector<std::string> values;

  bool operator==(const OneOf&) const = default;
};

struct Opaque {
  std::string normalized_text;

  bool operator==(const Opaque&) const = default;
};

using InvariantAtom = std::variant<LinearComparison, ClassEquality, OneOf, Opaque>;

inline bool is_linear(const InvariantAtom& atom) {
  return std::holds_alternative<LinearComparison>(atom);
}

// Collapses runs of whitespace to one space and trims both ends.
inline std::string normalize_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

namespace detail {

// Magnitude bound for parsed coefficients and constants. Keeps every
// intermediate of normalization (negation, gcd division) inside int64.
inline constexpr std::int64_t kMagnitudeLimit = 1'000'000'000'000'000LL;

inline bool mul_checked(std::int64_t a, std::int64_t b, std::int64_t& out) {
  return !__builtin_mul_overflow(a, b, &out) && out <= kMagnitudeLimit && out >= -kMagnitudeLimit;
}

inline bool add_checked(std::int64_t a, std::int64_t b, std::int64_t& out) {
  return !__builtin_add_overflow(a, b, &out) && out <= kMagnitudeLimit && out >= -kMagnitudeLimit;
}

inline bool is_ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}

inline bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}

// A decimal literal m * 10^-scale.
struct Decimal {
  std::int64_t mantissa = 0;
  int scale = 0;
};

inline constexpr int kMaxDecimalScale = 6;

class LinearParser {
 public:
  explicit LinearParser(std::string_view text) : text_(text) {}

  std::optional<LinearComparison> parse() {
    std::vector<RawTerm> lhs;
    std::vector<RawTerm> rhs;
    if (!parse_side(lhs)) return std::nullopt;
    skip_space();
    auto rel = parse_relation();
    if (!rel) return std::nullopt;
    if (!parse_side(rhs)) return std::nullopt;
    skip_space();
    if (pos_ != text_.size()) return std::nullopt;
    return combine(lhs, rhs, *rel);
  }

 private:
  struct RawTerm {
    Decimal value;
    std::optional<std::string> variable;
  };

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return at_end() ? '\0' : text_[pos_]; }

  bool at_relation() const {
    if (at_end()) return false;
    char c = text_[pos_];
    return c == '<' || c == '>' || c == '=' || c == '!';
  }

  std::optional<Relation> parse_relation() {
    auto rest = text_.substr(pos_);
    auto take = [&](std::string_view tok, Relation r) -> std::optional<Relation> {
      if (rest.substr(0, tok.size()) != tok) return std::nullopt;
      // `==>` is implication, not equality.
      if (tok == "==" && rest.size() > 2 && rest[2] == '>') return std::nullopt;
      pos_ += tok.size();
      return r;
    };
    for (auto [tok, r] : {std::pair{std::string_view("<="), Relation::Le},
                          std::pair{std::string_view(">="), Relation::Ge},
                          std::pair{std::string_view("=="), Relation::Eq},
                          std::pair{std::string_view("!="), Relation::Ne},
                          std::pair{std::string_view("<"), Relation::Lt},
                          std::pair{std::string_view(">"), Relation::Gt}}) {
      if (rest.substr(0, tok.size()) == tok) return take(tok, r);
    }
    return std::nullopt;
  }

  std::optional<Decimal> parse_number() {
    std::int64_t mantissa = 0;
    int scale = 0;
    bool digits = false;
    bool seen_point = false;
    while (!at_end()) {
      char c = peek();
      if (std::isdigit(static_cast<unsigned char>(c))) {
        if (!mul_checked(mantissa, 10, mantissa) || !add_checked(mantissa, c - '0', mantissa)) {
          return std::nullopt;
        }
        if (seen_point) ++scale;
        digits = true;
        ++pos_;
      } else if (c == '.' && !seen_point) {
        seen_point = true;
        ++pos_;
      } else {
        break;
      }
    }
    if (!digits || scale > kMaxDecimalScale) return std::nullopt;
    // Reject `1e5`, `2.0f` and friends.
    if (!at_end() && (is_ident_char(peek()) || peek() == '.')) return std::nullopt;
    return Decimal{mantissa, scale};
  }

  std::optional<std::string> parse_variable() {
    if (at_end() || !is_ident_start(peek())) return std::nullopt;
    std::size_t start = pos_;
    while (!at_end() && is_ident_char(peek())) ++pos_;
    std::string head(text_.substr(start, pos_ - start));
    if (head == "null" || head == "true" || head == "false") return std::nullopt;

    std::string name;
    if (peek() == '(') {
      if (head != "orig" && head != "size") return std::nullopt;
      ++pos_;
      skip_space();
      auto inner = parse_variable();
      skip_space();
      if (!inner || peek() != ')') return std::nullopt;
      ++pos_;
      name = head == "orig" ? "orig$" + *inner : "size(" + *inner + ")";
    } else {
      name = head;
    }
    // Field access and array-element markers.
    while (!at_end()) {
      if (peek() == '.' && pos_ + 1 < text_.size() && is_ident_start(text_[pos_ + 1])) {
        std::size_t seg = pos_;
        ++pos_;
        while (!at_end() && is_ident_char(peek())) ++pos_;
        if (peek() == '(') return std::nullopt;  // method call
        name.append(text_.substr(seg, pos_ - seg));
      } else if (text_.substr(pos_, 2) == "[]") {
        name.append("[]");
        pos_ += 2;
      } else {
        break;
      }
    }
    return name;
  }

  std::optional<RawTerm> parse_term() {
    skip_space();
    int sign = 1;
    while (peek() == '-' || peek() == '+') {
      if (peek() == '-') sign = -sign;
      ++pos_;
      skip_space();
    }
    RawTerm term;
    if (std::isdigit(static_cast<unsigned char>(peek()))) {
      auto num = parse_number();
      if (!num) return std::nullopt;
      term.value = *num;
      skip_space();
      if (peek() == '*') {
        ++pos_;
        skip_space();
        term.variable = parse_variable();
        if (!term.variable) return std::nullopt;
      }
    } else {
      term.variable = parse_variable();
      if (!term.variable) return std::nullopt;
      term.value = Decimal{1, 0};
      skip_space();
      if (peek() == '*') {
        ++pos_;
        skip_space();
        auto num = parse_number();
        if (!num) return std::nullopt;
        term.value = *num;
      }
    }
    term.value.mantissa *= sign;
    return term;
  }

  bool parse_side(std::vector<RawTerm>& out) {
    auto first = parse_term();
    if (!first) return false;
    out.push_back(std::move(*first));
    while (true) {
      skip_space();
      if (at_end() || at_relation()) return true;
      if (peek() != '+' && peek() != '-') return false;
      // The sign is consumed by parse_term.
      auto next = parse_term();
      if (!next) return false;
      out.push_back(std::move(*next));
    }
  }

  static std::optional<std::int64_t> pow10(int e) {
    std::int64_t v = 1;
    for (int i = 0; i < e; ++i) {
      if (!mul_checked(v, 10, v)) return std::nullopt;
    }
    return v;
  }

  static std::optional<LinearComparison> combine(const std::vector<RawTerm>& lhs,
                                                 const std::vector<RawTerm>& rhs, Relation rel) {
    int scale = 0;
    bool has_variable = false;
    for (const auto* side : {&lhs, &rhs}) {
      for (const auto& t : *side) {
        scale = std::max(scale, t.value.scale);
        has_variable = has_variable || t.variable.has_value();
      }
    }
    if (!has_variable) return std::nullopt;

    LinearComparison out;
    out.relation = rel;
    auto accumulate = [&](const RawTerm& t, int side_sign) -> bool {
      auto factor = pow10(scale - t.value.scale);
      std::int64_t v = 0;
      if (!factor || !mul_checked(t.value.mantissa, *factor * side_sign, v)) return false;
      if (!t.variable) {
        // Constants move to the right-hand side.
        return add_checked(out.constant, -v, out.constant);
      }
      for (auto& existing : out.terms) {
        if (existing.variable == *t.variable) {
          return add_checked(existing.coefficient, v, existing.coefficient);
        }
      }
      out.terms.push_back({v, *t.variable});
      return true;
    };
    for (const auto& t : lhs) {
      if (!accumulate(t, 1)) return std::nullopt;
    }
    for (const auto& t : rhs) {
      if (!accumulate(t, -1)) return std::nullopt;
    }
    std::erase_if(out.terms, [](const LinearTerm& t) { return t.coefficient == 0; });
    return out;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

inline bool is_plain_expression(std::string_view s) {
  if (s.empty() || !is_ident_start(s.front())) return false;
  for (char c : s) {
    if (!is_ident_char(c) && c != '.' && c != '[' && c != ']') return false;
  }
  return true;
}

inline bool is_qualified_name(std::string_view s) {
  if (s.empty() || !is_ident_start(s.front()) || s.back() == '.') return false;
  for (char c : s) {
    if (!is_ident_char(c) && c != '.') return false;
  }
  return true;
}

inline std::optional<ClassEquality> parse_class_equality(std::string_view text) {
  constexpr std::string_view kGetClass = ".getClass() == ";
  constexpr std::string_view kClassSuffix = ".class";
  auto at = text.find(kGetClass);
  if (at == std::string_view::npos) return std::nullopt;
  auto expr = text.substr(0, at);
  auto rhs = text.substr(at + kGetClass.size());
  if (rhs.size() <= kClassSuffix.size() || !rhs.ends_with(kClassSuffix)) return std::nullopt;
  rhs.remove_suffix(kClassSuffix.size());
  if (!is_plain_expression(expr) || !is_qualified_name(rhs)) return std::nullopt;
  return ClassEquality{std::string(expr), std::string(rhs)};
}

// Splits `a, "b, c", d` on top-level commas.
inline std::optional<std::vector<std::string>> split_literals(std::string_view body) {
  std::vector<std::string> out;
  std::string current;
  bool in_string = false;
  for (std::size_t i = 0; i < body.size(); ++i) {
    char c = body[i];
    if (in_string) {
      current.push_back(c);
      if (c == '\\' && i + 1 < body.size()) {
        current.push_back(body[++i]);
      } else if (c == '"') {
        in_string = false;
      }
    } else if (c == '"') {
      in_string = true;
      current.push_back(c);
    } else if (c == ',') {
      out.push_back(normalize_whitespace(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (in_string) return std::nullopt;
  out.push_back(normalize_whitespace(current));
  for (const auto& v : out) {
    if (v.empty()) return std::nullopt;
  }
  return out;
}

inline std::optional<OneOf> parse_one_of(std::string_view text) {
  constexpr std::string_view kOneOf = " one of { ";
  auto at = text.find(kOneOf);
  if (at == std::string_view::npos || !text.ends_with(" }")) return std::nullopt;
  auto expr = text.substr(0, at);
  auto body = text.substr(at + kOneOf.size());
  body.remove_suffix(2);
  if (!is_plain_expression(expr)) return std::nullopt;
  auto values = split_literals(body);
  if (!values) return std::nullopt;
  return OneOf{std::string(expr), std::move(*values)};
}

}  // namespace detail

// Parses one invariant line. Total: text outside the fragment becomes Opaque.
inline InvariantAtom parse_atom(std::string_view text) {
  std::string norm = normalize_whitespace(text);
  if (auto one_of = detail::parse_one_of(norm)) return *one_of;
  if (auto cls = detail::parse_class_equality(norm)) return *cls;
  if (auto linear = detail::LinearParser(norm).parse()) return *linear;
  return Opaque{std::move(norm)};
}

inline std::string to_string(const InvariantAtom& atom) {
  struct Printer {
    std::string operator()(const LinearComparison& lc) const {
      std::string out;
      if (lc.terms.empty()) out = "0";
      for (std::size_t i = 0; i < lc.terms.size(); ++i) {
        const auto& t = lc.terms[i];
        if (i > 0) out += " + ";
        out += std::to_string(t.coefficient) + "*" + t.variable;
      }
      out += " ";
      out += to_string(lc.relation);
      out += " " + std::to_string(lc.constant);
      return out;
    }
    std::string operator()(const ClassEquality& ce) const {
      return ce.expression + ".getClass() == " + ce.class_literal + ".class";
    }
    std::string operator()(const OneOf& o) const {
      std::string out = o.expression + " one of { ";
      for (std::size_t i = 0; i < o.values.size(); ++i) {
        if (i > 0) out += ", ";
        out += o.values[i];
      }
      return out + " }";
    }
    std::string operator()(const Opaque& o) const { return o.normalized_text; }
  };
  return std::visit(Printer{}, atom);
}

}  // namespace patchcheck
