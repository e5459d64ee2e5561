#pragma once

// Patch manifests and dataset preparation: leakage removal against the
// evaluation set and the seeded train/validation split.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "patchcheck/error.hpp"
#include "patchcheck/invariant.hpp"
#include "patchcheck/logistic.hpp"

namespace patchcheck {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << contents;
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

enum class CodeRole { Buggy, Patched, GroundTruth };

inline std::string_view to_string(CodeRole r) {
  switch (r) {
    case CodeRole::Buggy: return "buggy";
    case CodeRole::Patched: return "patched";
    case CodeRole::GroundTruth: return "groundtruth";
  }
  return "?";
}

struct CodePaths {
  std::filesystem::path buggy;
  std::filesystem::path patched;
  std::filesystem::path groundtruth;

  const std::filesystem::path& at(CodeRole r) const {
    switch (r) {
      case CodeRole::Buggy: return buggy;
      case CodeRole::Patched: return patched;
      case CodeRole::GroundTruth: return groundtruth;
    }
    return patched;
  }
};

struct PatchRecord {
  std::string id;
  std::string project;
  std::string bug_id;
  std::string tool;
  std::optional<Verdict> label;
  CodePaths code_paths;
  // (variant, partition) -> invariant dump file; all six are needed for the
  // semantic stage.
  std::map<std::pair<Variant, Partition>, std::filesystem::path> invariant_paths;
  std::map<CodeRole, std::string> embedding_ids;
  std::optional<std::filesystem::path> coverage_path;
  std::set<MethodId> modified_methods;

  std::string embedding_id(CodeRole role) const {
    auto it = embedding_ids.find(role);
    if (it != embedding_ids.end()) return it->second;
    return id + ":" + std::string(to_string(role));
  }

  bool has_all_invariant_paths() const { return invariant_paths.size() == 6; }
};

namespace detail {

inline std::optional<Verdict> parse_label(const nlohmann::json& j, const std::string& id) {
  if (!j.contains("label") || j["label"].is_null()) return std::nullopt;
  auto s = j["label"].get<std::string>();
  if (s == "correct") return Verdict::Correct;
  if (s == "overfitting") return Verdict::Overfitting;
  throw Error(ErrorCode::InvalidFormat, "record " + id + ": label must be \"correct\" or \"overfitting\"");
}

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace detail

// Reads a JSON array of patch records. Relative paths resolve against
// `base_dir` (normally the manifest's directory).
inline std::vector<PatchRecord> parse_manifest(std::string_view text, const std::filesystem::path& base_dir) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::InvalidFormat, std::string("manifest: ") + e.what());
  }
  if (!doc.is_array()) throw Error(ErrorCode::InvalidFormat, "manifest must be a JSON array");

  std::vector<PatchRecord> records;
  std::set<std::string> seen;
  for (const auto& j : doc) {
    try {
      PatchRecord r;
      r.id = j.at("id").get<std::string>();
      if (r.id.empty()) throw Error(ErrorCode::InvalidFormat, "record with empty id");
      if (!seen.insert(r.id).second) throw Error(ErrorCode::InvalidFormat, "duplicate record id " + r.id);
      r.project = j.value("project", "");
      r.bug_id = j.value("bug_id", "");
      r.tool = j.value("tool", "");
      r.label = detail::parse_label(j, r.id);
      if (j.contains("code_paths")) {
        const auto& c = j["code_paths"];
        r.code_paths.buggy = detail::resolve(base_dir, c.value("buggy", ""));
        r.code_paths.patched = detail::resolve(base_dir, c.value("patched", ""));
        r.code_paths.groundtruth = detail::resolve(base_dir, c.value("groundtruth", ""));
      }
      if (j.contains("invariant_paths") && !j["invariant_paths"].is_null()) {
        for (auto v : kAllVariants) {
          auto vname = std::string(to_string(v));
          if (!j["invariant_paths"].contains(vname)) continue;
          const auto& per_variant = j["invariant_paths"][vname];
          for (auto p : kAllPartitions) {
            auto pname = std::string(to_string(p));
            if (per_variant.contains(pname)) {
              r.invariant_paths[{v, p}] = detail::resolve(base_dir, per_variant[pname].get<std::string>());
            }
          }
        }
      }
      if (j.contains("embedding_ids") && !j["embedding_ids"].is_null()) {
        for (auto role : {CodeRole::Buggy, CodeRole::Patched, CodeRole::GroundTruth}) {
          auto name = std::string(to_string(role));
          if (j["embedding_ids"].contains(name)) r.embedding_ids[role] = j["embedding_ids"][name].get<std::string>();
        }
      }
      if (j.contains("coverage_path") && j["coverage_path"].is_string()) {
        r.coverage_path = detail::resolve(base_dir, j["coverage_path"].get<std::string>());
      }
      if (j.contains("modified_methods")) {
        for (const auto& m : j["modified_methods"]) {
          auto id = parse_method_id(m.get<std::string>());
          if (!id) throw Error(ErrorCode::InvalidFormat, "record " + r.id + ": bad method " + m.get<std::string>());
          r.modified_methods.insert(*id);
        }
      }
      records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::InvalidFormat, std::string("manifest record: ") + e.what());
    }
  }
  return records;
}

inline std::vector<PatchRecord> load_manifest(const std::filesystem::path& path) {
  return parse_manifest(read_file(path), path.parent_path());
}

// ---------------------------------------------------------------------------
// Leakage removal

// Token sequence of source text with comments dropped: identifiers and
// numbers as maximal runs, string/char literals whole, other symbols singly.
inline std::vector<std::string> normalized_code_tokens(std::string_view code) {
  std::vector<std::string> out;
  auto is_word = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$'; };
  std::size_t i = 0;
  while (i < code.size()) {
    char c = code[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (code.substr(i, 2) == "//") {
      while (i < code.size() && code[i] != '\n') ++i;
    } else if (code.substr(i, 2) == "/*") {
      auto end = code.find("*/", i + 2);
      i = end == std::string_view::npos ? code.size() : end + 2;
    } else if (c == '"' || c == '\'') {
      std::size_t start = i++;
      while (i < code.size() && code[i] != c) i += code[i] == '\\' ? 2 : 1;
      i = std::min(i + 1, code.size());
      out.emplace_back(code.substr(start, i - start));
    } else if (is_word(c)) {
      std::size_t start = i;
      while (i < code.size() && is_word(code[i])) ++i;
      out.emplace_back(code.substr(start, i - start));
    } else {
      out.emplace_back(1, c);
      ++i;
    }
  }
  return out;
}

struct DedupResult {
  std::vector<PatchRecord> kept;
  std::vector<std::string> removed_ids;
};

// Drops training records whose patched code is syntactically equal (same
// normalized token sequence) to some evaluation record's patched code.
inline DedupResult dedup_against_eval(const std::vector<PatchRecord>& train, const std::vector<PatchRecord>& eval) {
  auto tokens_of = [](const PatchRecord& r) {
    std::string text;
    try {
      text = read_file(r.code_paths.patched);
    } catch (const Error&) {
      throw Error(ErrorCode::MissingCodeFile, r.id + " (" + r.code_paths.patched.string() + ")");
    }
    return normalized_code_tokens(text);
  };
  std::set<std::vector<std::string>> eval_tokens;
  for (const auto& r : eval) eval_tokens.insert(tokens_of(r));
  DedupResult out;
  for (const auto& r : train) {
    if (eval_tokens.contains(tokens_of(r))) {
      out.removed_ids.push_back(r.id);
    } else {
      out.kept.push_back(r);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Train / validation split

template <typename T>
struct Split {
  std::vector<T> train;
  std::vector<T> validation;
};

// Seeded Fisher–Yates shuffle, then floor(n * fraction) records to training.
template <typename T>
Split<T> split_train_valid(std::vector<T> records, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw Error(ErrorCode::InvalidArgument, "fraction must be in (0, 1)");
  const std::size_t n = records.size();
  auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * fraction + 1e-9));
  if (n_train == 0 || n_train >= n) {
    throw Error(ErrorCode::TooFewRecords, std::to_string(n) + " records cannot be split at " + std::to_string(fraction));
  }
  std::mt19937_64 gen(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    // Rejection-free bounded draw; bias is negligible at 64 bits.
    auto j = static_cast<std::size_t>(gen() % (i + 1));
    std::swap(records[i], records[j]);
  }
  Split<T> out;
  out.train.assign(std::make_move_iterator(records.begin()), std::make_move_iterator(records.begin() + n_train));
  out.validation.assign(std::make_move_iterator(records.begin() + n_train), std::make_move_iterator(records.end()));
  return out;
}

}  // namespace patchcheck
