#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "patchcheck/error.hpp"
#include "patchcheck/invariant.hpp"

namespace patchcheck {

struct CoverageMap {
  std::map<std::string, std::set<MethodId>> tests;
};

// Reads `{"tests": {"<testId>": ["<Class>.<method>(<params>)", ...], ...}}`.
inline CoverageMap parse_coverage_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::InvalidFormat, std::string("coverage file: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("tests") || !doc["tests"].is_object()) {
    throw Error(ErrorCode::InvalidFormat, "coverage file: expected object with a \"tests\" object");
  }
  CoverageMap out;
  for (const auto& [test_id, methods] : doc["tests"].items()) {
    if (!methods.is_array()) throw Error(ErrorCode::InvalidFormat, "coverage entry for " + test_id + " is not a list");
    auto& covered = out.tests[test_id];
    for (const auto& m : methods) {
      if (!m.is_string()) throw Error(ErrorCode::InvalidFormat, "non-string method in coverage of " + test_id);
      auto id = parse_method_id(m.get<std::string>());
      if (!id) throw Error(ErrorCode::InvalidFormat, "bad method name '" + m.get<std::string>() + "'");
      covered.insert(std::move(*id));
    }
  }
  return out;
}

// Passing tests covering at least one modified method, in identifier order.
inline std::vector<std::string> select_related_tests(const CoverageMap& coverage,
                                                     const std::set<MethodId>& modified_methods) {
  if (modified_methods.empty()) throw Error(ErrorCode::EmptyModifiedSet, "no modified methods given");
  std::vector<std::string> selected;
  for (const auto& [test, covered] : coverage.tests) {
    // Walk the smaller set, probe the larger.
    const auto& small = covered.size() < modified_methods.size() ? covered : modified_methods;
    const auto& large = &small == &covered ? modified_methods : covered;
    for (const auto& m : small) {
      if (large.contains(m)) {
        selected.push_back(test);
        break;
      }
    }
  }
  return selected;
}

}  // namespace patchcheck
