#pragma once

// Code embeddings and the comparison features built from them.
//
// For a patched-program embedding p and another embedding o of dimension k
// the pair features are laid out as
//
//   [ p - o (k) | p ⊙ o (k) | ||p - o||_2 (1) | cos(p, o) (1) ]
//
// and a patch is described by D(P,B) ⊕ D(P,G), 4k + 4 values.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "patchcheck/error.hpp"

namespace patchcheck {

inline constexpr std::size_t kDefaultEmbeddingDim = 768;

struct EmbeddingVector {
  std::string id;
  std::vector<double> values;

  std::size_t dim() const noexcept { return values.size(); }
};

struct DistancePair {
  std::vector<double> values;  // 2k + 2
  bool zero_norm = false;      // cosine undefined, stored as 0
};

struct DistanceFeatures {
  std::vector<double> pair_pb;   // D(P,B)
  std::vector<double> pair_pg;   // D(P,G)
  std::vector<double> combined;  // pair_pb ⊕ pair_pg
  std::vector<std::string> warnings;
};

inline std::size_t pair_feature_length(std::size_t k) { return 2 * k + 2; }
inline std::size_t combined_feature_length(std::size_t k) { return 4 * k + 4; }

inline DistancePair distance_pair(std::span<const double> patched, std::span<const double> other) {
  if (patched.size() != other.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                std::to_string(patched.size()) + " vs " + std::to_string(other.size()));
  }
  const std::size_t k = patched.size();
  DistancePair out;
  out.values.resize(pair_feature_length(k));
  double sq_dist = 0.0;
  double dot = 0.0;
  double norm_p = 0.0;
  double norm_o = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    double diff = patched[i] - other[i];
    out.values[i] = diff;
    out.values[k + i] = patched[i] * other[i];
    sq_dist += diff * diff;
    dot += patched[i] * other[i];
    norm_p += patched[i] * patched[i];
    norm_o += other[i] * other[i];
  }
  out.values[2 * k] = std::sqrt(sq_dist);
  if (norm_p == 0.0 || norm_o == 0.0) {
    out.zero_norm = true;
    out.values[2 * k + 1] = 0.0;
  } else {
    double cosine = dot / (std::sqrt(norm_p) * std::sqrt(norm_o));
    out.values[2 * k + 1] = std::clamp(cosine, -1.0, 1.0);
  }
  return out;
}

inline DistancePair distance_pair(const EmbeddingVector& patched, const EmbeddingVector& other) {
  return distance_pair(std::span<const double>(patched.values), std::span<const double>(other.values));
}

inline DistanceFeatures feature_vector(const EmbeddingVector& buggy, const EmbeddingVector& patched,
                                       const EmbeddingVector& ground_truth) {
  if (buggy.dim() != patched.dim() || ground_truth.dim() != patched.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "buggy/patched/groundtruth embeddings differ in dimension");
  }
  auto pb = distance_pair(patched, buggy);
  auto pg = distance_pair(patched, ground_truth);
  DistanceFeatures out;
  if (pb.zero_norm) out.warnings.push_back("ZeroNormVector: " + patched.id + " vs " + buggy.id);
  if (pg.zero_norm) out.warnings.push_back("ZeroNormVector: " + patched.id + " vs " + ground_truth.id);
  out.pair_pb = std::move(pb.values);
  out.pair_pg = std::move(pg.values);
  out.combined.reserve(out.pair_pb.size() + out.pair_pg.size());
  out.combined.insert(out.combined.end(), out.pair_pb.begin(), out.pair_pb.end());
  out.combined.insert(out.combined.end(), out.pair_pg.begin(), out.pair_pg.end());
  return out;
}

// ---------------------------------------------------------------------------
// Hashing fallback embedder

namespace detail {

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

// Maximal runs of ASCII alphanumerics; everything else separates.
inline std::vector<std::string_view> code_tokens(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && !std::isalnum(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && std::isalnum(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) out.push_back(text.substr(start, i - start));
  }
  return out;
}

// Signed token counts per bucket, before normalization.
inline std::vector<double> hashing_counts(std::string_view code_text, std::size_t k) {
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "embedding dimension must be positive");
  std::vector<double> v(k, 0.0);
  for (auto tok : code_tokens(code_text)) {
    auto h = detail::fnv1a64(tok);
    auto bucket = static_cast<std::size_t>(h % k);
    v[bucket] += (h >> 63) != 0 ? -1.0 : 1.0;
  }
  return v;
}

inline EmbeddingVector hashing_embed(std::string_view code_text, std::size_t k, std::string id = {}) {
  auto v = hashing_counts(code_text, k);
  double norm = 0.0;
  for (double x : v) norm += x * x;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
  }
  return EmbeddingVector{std::move(id), std::move(v)};
}

// ---------------------------------------------------------------------------
// Exchange file: JSON Lines of {"id": "<patchId>:<role>", "dim": k, "vector": [...]}

struct EmbeddingTable {
  std::size_t dim = 0;
  std::map<std::string, EmbeddingVector> vectors;
  std::vector<std::string> warnings;

  const EmbeddingVector* find(const std::string& id) const {
    auto it = vectors.find(id);
    return it == vectors.end() ? nullptr : &it->second;
  }
};

inline EmbeddingTable parse_embeddings_jsonl(std::string_view text) {
  EmbeddingTable table;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto nl = text.find('\n', start);
    auto line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    start = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.remove_suffix(1);
    if (line.empty()) continue;

    auto where = "embedding line " + std::to_string(line_no);
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::InvalidFormat, where + ": " + e.what());
    }
    if (!rec.is_object() || !rec.contains("id") || !rec["id"].is_string() || !rec.contains("vector") ||
        !rec["vector"].is_array()) {
      throw Error(ErrorCode::InvalidFormat, where + ": expected {id, dim, vector}");
    }
    EmbeddingVector ev;
    ev.id = rec["id"].get<std::string>();
    ev.values.reserve(rec["vector"].size());
    for (const auto& x : rec["vector"]) {
      if (!x.is_number()) throw Error(ErrorCode::InvalidFormat, where + ": non-numeric vector entry");
      double v = x.get<double>();
      if (!std::isfinite(v)) throw Error(ErrorCode::InvalidFormat, where + ": non-finite vector entry");
      ev.values.push_back(v);
    }
    if (ev.values.empty()) throw Error(ErrorCode::InvalidFormat, where + ": empty vector");
    if (rec.contains("dim")) {
      if (!rec["dim"].is_number_unsigned() || rec["dim"].get<std::size_t>() != ev.values.size()) {
        throw Error(ErrorCode::DimensionMismatch, where + ": dim field disagrees with vector length");
      }
    } else {
      table.warnings.push_back(where + ": missing dim field");
    }
    if (table.dim == 0) table.dim = ev.values.size();
    if (ev.values.size() != table.dim) {
      throw Error(ErrorCode::DimensionMismatch,
                  where + ": dimension " + std::to_string(ev.values.size()) + " != " + std::to_string(table.dim));
    }
    if (std::all_of(ev.values.begin(), ev.values.end(), [](double v) { return v == 0.0; })) {
      table.warnings.push_back(where + ": ZeroNormVector " + ev.id);
    }
    auto id = ev.id;
    if (!table.vectors.emplace(id, std::move(ev)).second) {
      table.warnings.push_back(where + ": duplicate id " + id + " ignored");
    }
  }
  return table;
}

inline std::string to_jsonl(const EmbeddingVector& ev) {
  nlohmann::json rec;
  rec["id"] = ev.id;
  rec["dim"] = ev.values.size();
  rec["vector"] = ev.values;
  return rec.dump();
}

}  // namespace patchcheck
