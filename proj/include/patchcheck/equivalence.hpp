#pragma once

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <variant>

#include "patchcheck/atom.hpp"
#include "patchcheck/canonical.hpp"
#include "patchcheck/error.hpp"
#include "patchcheck/invariant.hpp"

namespace patchcheck {

namespace detail {

inline std::string smt_symbol(const std::string& name) { return "|" + name + "|"; }

inline std::string smt_int(std::int64_t v) {
  return v < 0 ? "(- " + std::to_string(-v) + ")" : std::to_string(v);
}

inline std::string smt_formula(const LinearComparison& lc) {
  std::string sum;
  if (lc.terms.empty()) {
    sum = "0";
  } else if (lc.terms.size() == 1) {
    sum = "(* " + smt_int(lc.terms[0].coefficient) + " " + smt_symbol(lc.terms[0].variable) + ")";
  } else {
    sum = "(+";
    for (const auto& t : lc.terms) sum += " (* " + smt_int(t.coefficient) + " " + smt_symbol(t.variable) + ")";
    sum += ")";
  }
  auto rhs = smt_int(lc.constant);
  switch (lc.relation) {
    case Relation::Lt: return "(< " + sum + " " + rhs + ")";
    case Relation::Le: return "(<= " + sum + " " + rhs + ")";
    case Relation::Eq: return "(= " + sum + " " + rhs + ")";
    case Relation::Ne: return "(not (= " + sum + " " + rhs + "))";
    case Relation::Ge: return "(>= " + sum + " " + rhs + ")";
    case Relation::Gt: return "(> " + sum + " " + rhs + ")";
  }
  return "false";
}

}  // namespace detail

// SMT-LIB2 text asserting that `a` and `b` are NOT equivalent:
//   (assert (not (and (=> A B) (=> B A))))
// `unsat` from a solver therefore means the atoms are equivalent. Variables
// are declared Real, matching the rational reading used by normalize().
inline std::string emit_equivalence_query(const InvariantAtom& a, const InvariantAtom& b) {
  const auto* la = std::get_if<LinearComparison>(&a);
  const auto* lb = std::get_if<LinearComparison>(&b);
  if (!la || !lb) {
    throw Error(ErrorCode::UnsupportedAtom, "solver queries cover linear comparisons only");
  }
  std::set<std::string> vars;
  for (const auto* lc : {la, lb}) {
    for (const auto& t : lc->terms) {
      if (t.variable.find_first_of("|\\") != std::string::npos) {
        throw Error(ErrorCode::UnsupportedAtom, "variable not representable as SMT symbol: " + t.variable);
      }
      vars.insert(t.variable);
    }
  }
  auto fa = detail::smt_formula(*la);
  auto fb = detail::smt_formula(*lb);
  std::string out = "(set-logic QF_LRA)\n";
  for (const auto& v : vars) out += "(declare-fun " + detail::smt_symbol(v) + " () Real)\n";
  out += "(assert (not (and (=> " + fa + " " + fb + ") (=> " + fb + " " + fa + "))))\n";
  out += "(check-sat)\n";
  return out;
}

enum class SolverAnswer { Sat, Unsat, Unknown };

// Runs an external solver command with the query on stdin and reads the
// first `sat`/`unsat` token from stdout. Anything else is Unknown.
class SolverHook {
 public:
  explicit SolverHook(std::string command) : command_(std::move(command)) {}

  // Reads the command from PATCHCHECK_SOLVER_CMD; nullopt when unset or empty.
  static std::optional<SolverHook> from_environment() {
    const char* cmd = std::getenv("PATCHCHECK_SOLVER_CMD");
    if (cmd == nullptr || *cmd == '\0') return std::nullopt;
    return SolverHook(cmd);
  }

  const std::string& command() const noexcept { return command_; }

  SolverAnswer check(const std::string& query) const {
    namespace fs = std::filesystem;
    std::error_code ec;
    auto dir = fs::temp_directory_path(ec);
    if (ec) return SolverAnswer::Unknown;
    std::string templ = (dir / "patchcheck-query-XXXXXX").string();
    int fd = mkstemp(templ.data());
    if (fd < 0) return SolverAnswer::Unknown;
    {
      FILE* f = fdopen(fd, "w");
      if (f == nullptr) return SolverAnswer::Unknown;
      std::fputs(query.c_str(), f);
      std::fclose(f);
    }
    std::string full = "(" + command_ + ") < '" + templ + "' 2>/dev/null";
    std::string output;
    if (FILE* pipe = popen(full.c_str(), "r")) {
      std::array<char, 256> buf{};
      while (std::fgets(buf.data(), static_cast<int>(buf.size()), pipe) != nullptr) output += buf.data();
      pclose(pipe);
    }
    fs::remove(templ, ec);

    auto token = detail::trim(std::string_view(output).substr(0, output.find('\n')));
    if (token == "unsat") return SolverAnswer::Unsat;
    if (token == "sat") return SolverAnswer::Sat;
    return SolverAnswer::Unknown;
  }

 private:
  std::string command_;
};

// Equivalence of invariant atoms. Canonical forms decide; when both atoms are
// linear, their forms differ, and a solver hook is configured, an `unsat`
// answer upgrades the verdict to equivalent. Cross-kind pairs never match.
class EquivalenceChecker {
 public:
  EquivalenceChecker() = default;
  explicit EquivalenceChecker(std::optional<SolverHook> hook) : hook_(std::move(hook)) {}

  bool has_solver() const noexcept { return hook_.has_value(); }

  bool operator()(const InvariantAtom& a, const InvariantAtom& b) const {
    if (normalize(a) == normalize(b)) return true;
    return solver_says_equivalent(a, b);
  }

  // Whether `set` holds an invariant equivalent to `inv`.
  bool contains(const InvariantSet& set, const Invariant& inv) const {
    auto canon = normalize(inv.atom);
    if (set.find(canon) != nullptr) return true;
    if (!hook_ || !is_linear(inv.atom)) return false;
    for (const auto& [key, other] : set) {
      if (solver_says_equivalent(inv.atom, other.atom)) return true;
    }
    return false;
  }

 private:
  bool solver_says_equivalent(const InvariantAtom& a, const InvariantAtom& b) const {
    if (!hook_ || !is_linear(a) || !is_linear(b)) return false;
    std::string query;
    try {
      query = emit_equivalence_query(a, b);
    } catch (const Error&) {
      return false;
    }
    return hook_->check(query) == SolverAnswer::Unsat;
  }

  std::optional<SolverHook> hook_;
};

inline bool equivalent(const InvariantAtom& a, const InvariantAtom& b) { return EquivalenceChecker{}(a, b); }

}  // namespace patchcheck
