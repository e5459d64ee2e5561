#pragma once

// Likely invariants grouped by program point, and the reader/writer for
// invariant dump text:
//
//   Daikon version ...                      <- optional preamble, ignored
//   ===========================================================
//   pkg.Foo.bar(int, java.lang.String):::ENTER
//   x >= 0
//   this.count == orig(this.count) + 1
//   ===========================================================
//   pkg.Foo.bar(int, java.lang.String):::EXIT12
//   ...
//
// A separator is any line of at least 40 '=' characters.

#include <array>
#include <compare>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "patchcheck/atom.hpp"
#include "patchcheck/canonical.hpp"
#include "patchcheck/error.hpp"

namespace patchcheck {

// (class, method signature) as written by the coverage and invariant tools.
struct MethodId {
  std::string class_name;
  std::string method_signature;

  auto operator<=>(const MethodId&) const = default;
  bool operator==(const MethodId&) const = default;

  std::string to_string() const { return class_name + "." + method_signature; }
};

// Splits `pkg.Cls.method(java.lang.String,int)` at the last '.' before the
// parameter list. Returns nullopt when either part would be empty.
inline std::optional<MethodId> parse_method_id(std::string_view text) {
  auto paren = text.find('(');
  if (paren == std::string_view::npos || text.back() != ')') return std::nullopt;
  auto dot = text.rfind('.', paren);
  if (dot == std::string_view::npos || dot == 0 || dot + 1 >= paren) return std::nullopt;
  return MethodId{std::string(text.substr(0, dot)), std::string(text.substr(dot + 1))};
}

enum class PointKind { Enter, Exit };

struct ProgramPoint {
  std::string class_name;
  std::string method_signature;
  PointKind kind = PointKind::Enter;
  std::optional<int> exit_index;  // only meaningful for Exit

  auto operator<=>(const ProgramPoint&) const = default;
  bool operator==(const ProgramPoint&) const = default;

  MethodId method() const { return {class_name, method_signature}; }

  std::string to_string() const {
    std::string out = class_name + "." + method_signature + ":::";
    if (kind == PointKind::Enter) return out + "ENTER";
    out += "EXIT";
    if (exit_index) out += std::to_string(*exit_index);
    return out;
  }
};

struct Invariant {
  ProgramPoint point;
  std::string raw_text;
  InvariantAtom atom;

  bool operator==(const Invariant&) const = default;
};

inline Invariant make_invariant(ProgramPoint point, std::string_view text) {
  std::string raw = normalize_whitespace(text);
  InvariantAtom atom = parse_atom(raw);
  return Invariant{std::move(point), std::move(raw), std::move(atom)};
}

// Invariants at one program point, unique up to canonical form and ordered
// by canonical key. The first invariant inserted for a key is retained.
class InvariantSet {
 public:
  using Storage = std::map<std::string, Invariant>;

  bool insert(Invariant inv) {
    auto key = normalize(inv.atom).key();
    return items_.try_emplace(std::move(key), std::move(inv)).second;
  }

  bool contains_key(const std::string& key) const { return items_.contains(key); }
  const Invariant* find(const CanonicalAtom& canon) const {
    auto it = items_.find(canon.key());
    return it == items_.end() ? nullptr : &it->second;
  }

  std::size_t size() const noexcept { return items_.size(); }
  bool empty() const noexcept { return items_.empty(); }

  // Iterates (canonical key, invariant) pairs in key order.
  Storage::const_iterator begin() const { return items_.begin(); }
  Storage::const_iterator end() const { return items_.end(); }

  bool operator==(const InvariantSet& other) const {
    if (items_.size() != other.items_.size()) return false;
    for (auto a = items_.begin(), b = other.items_.begin(); a != items_.end(); ++a, ++b) {
      if (a->first != b->first || a->second.atom != b->second.atom || a->second.point != b->second.point) {
        return false;
      }
    }
    return true;
  }

 private:
  Storage items_;
};

using PointMap = std::map<ProgramPoint, InvariantSet>;

enum class Variant { Buggy, GroundTruth, Patched };
enum class Partition { PassingTraces, FailingTraces };

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Buggy: return "buggy";
    case Variant::GroundTruth: return "groundtruth";
    case Variant::Patched: return "patched";
  }
  return "?";
}

inline std::string_view to_string(Partition p) {
  return p == Partition::PassingTraces ? "passing" : "failing";
}

inline constexpr std::array<Variant, 3> kAllVariants{Variant::Buggy, Variant::GroundTruth, Variant::Patched};
inline constexpr std::array<Partition, 2> kAllPartitions{Partition::PassingTraces, Partition::FailingTraces};

// I^P_B, I^F_B, I^P_G, I^F_G, I^P_P, I^F_P. All six slots always exist.
class InvariantCorpus {
 public:
  PointMap& at(Variant v, Partition p) { return slots_[index(v, p)]; }
  const PointMap& at(Variant v, Partition p) const { return slots_[index(v, p)]; }

  bool operator==(const InvariantCorpus&) const = default;

 private:
  static std::size_t index(Variant v, Partition p) {
    return static_cast<std::size_t>(v) * 2 + static_cast<std::size_t>(p);
  }

  std::array<PointMap, 6> slots_;
};

namespace detail {

inline constexpr std::size_t kMinSeparatorLength = 40;
inline constexpr std::size_t kWrittenSeparatorLength = 75;

inline bool is_separator(std::string_view line) {
  return line.size() >= kMinSeparatorLength && line.find_first_not_of('=') == std::string_view::npos;
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto nl = text.find('\n', start);
    auto end = nl == std::string_view::npos ? text.size() : nl;
    auto line = text.substr(start, end - start);
    if (line.ends_with('\r')) line.remove_suffix(1);
    lines.push_back(line);
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return lines;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

enum class HeaderKind { Method, NonMethod, Invalid };

struct ParsedHeader {
  HeaderKind kind = HeaderKind::Invalid;
  ProgramPoint point;
};

inline ParsedHeader parse_header(std::string_view line) {
  constexpr std::string_view kMarker = ":::";
  auto at = line.rfind(kMarker);
  if (at == std::string_view::npos) return {};
  auto location = line.substr(0, at);
  auto tag = line.substr(at + kMarker.size());
  // Object- and class-level points carry no method; they are skipped.
  if ((tag == "OBJECT" || tag == "CLASS") && !location.empty()) return {HeaderKind::NonMethod, {}};

  auto method = parse_method_id(location);
  if (!method) return {};
  ProgramPoint point{method->class_name, method->method_signature, PointKind::Enter, std::nullopt};
  if (tag == "ENTER") return {HeaderKind::Method, point};
  if (!tag.starts_with("EXIT")) return {};
  point.kind = PointKind::Exit;
  auto digits = tag.substr(4);
  if (!digits.empty()) {
    if (digits.size() > 9 || digits.find_first_not_of("0123456789") != std::string_view::npos) return {};
    point.exit_index = std::stoi(std::string(digits));
  }
  return {HeaderKind::Method, point};
}

// Parses records from lines[first, last). Line numbers in errors are 1-based
// positions within the whole document.
inline std::size_t parse_records(const std::vector<std::string_view>& lines, std::size_t first, std::size_t last,
                                 PointMap& out) {
  std::size_t records = 0;
  std::size_t i = first;
  bool leading_block = true;
  while (i < last) {
    std::size_t block_end = i;
    while (block_end < last && !is_separator(lines[block_end])) ++block_end;

    std::size_t h = i;
    while (h < block_end && trim(lines[h]).empty()) ++h;
    if (h < block_end) {
      auto header = parse_header(trim(lines[h]));
      if (header.kind == HeaderKind::Invalid) {
        // Text ahead of the first separator is a tool preamble.
        if (!leading_block) throw Error(ErrorCode::MalformedHeader, "line " + std::to_string(h + 1));
      } else {
        ++records;
        if (header.kind == HeaderKind::Method) {
          auto& set = out[header.point];
          for (std::size_t j = h + 1; j < block_end; ++j) {
            auto body = trim(lines[j]);
            if (body.empty() || body == "Exiting Daikon.") continue;
            set.insert(make_invariant(header.point, body));
          }
        }
      }
    }
    leading_block = false;
    i = block_end + 1;
  }
  return records;
}

}  // namespace detail

inline PointMap parse_invariant_file(std::string_view text) {
  auto lines = detail::split_lines(text);
  PointMap out;
  if (detail::parse_records(lines, 0, lines.size(), out) == 0) {
    throw Error(ErrorCode::EmptyInput, "no invariant records found");
  }
  return out;
}

// Daikon-style text for one point map, points in map order and invariants in
// canonical-key order.
inline std::string serialize_points(const PointMap& points) {
  const std::string separator(detail::kWrittenSeparatorLength, '=');
  std::string out;
  for (const auto& [point, set] : points) {
    out += separator;
    out += '\n';
    out += point.to_string();
    out += '\n';
    for (const auto& [key, inv] : set) {
      out += inv.raw_text;
      out += '\n';
    }
  }
  return out;
}

inline constexpr std::string_view kCorpusHeader = "# patchcheck invariant corpus v1";
inline constexpr std::string_view kSlotMarker = "%%% ";

// Whole-corpus document: a header line, then one `%%% <variant> <partition>`
// section per non-empty slot holding Daikon-style records.
inline std::string serialize_corpus(const InvariantCorpus& corpus) {
  std::string out(kCorpusHeader);
  out += '\n';
  for (auto v : kAllVariants) {
    for (auto p : kAllPartitions) {
      const auto& slot = corpus.at(v, p);
      if (slot.empty()) continue;
      out += kSlotMarker;
      out += to_string(v);
      out += ' ';
      out += to_string(p);
      out += '\n';
      out += serialize_points(slot);
    }
  }
  return out;
}

inline InvariantCorpus parse_corpus(std::string_view text) {
  auto lines = detail::split_lines(text);
  if (lines.empty() || detail::trim(lines.front()) != kCorpusHeader) {
    throw Error(ErrorCode::InvalidFormat, "missing corpus header on line 1");
  }
  InvariantCorpus corpus;
  std::size_t i = 1;
  while (i < lines.size() && detail::trim(lines[i]).empty()) ++i;
  while (i < lines.size()) {
    auto marker = detail::trim(lines[i]);
    if (!marker.starts_with(kSlotMarker)) {
      throw Error(ErrorCode::InvalidFormat, "expected slot marker on line " + std::to_string(i + 1));
    }
    std::istringstream fields{std::string(marker.substr(kSlotMarker.size()))};
    std::string variant_name, partition_name;
    fields >> variant_name >> partition_name;
    std::optional<Variant> variant;
    std::optional<Partition> partition;
    for (auto v : kAllVariants) {
      if (to_string(v) == variant_name) variant = v;
    }
    for (auto p : kAllPartitions) {
      if (to_string(p) == partition_name) partition = p;
    }
    if (!variant || !partition) {
      throw Error(ErrorCode::InvalidFormat, "unknown slot on line " + std::to_string(i + 1));
    }
    std::size_t end = i + 1;
    while (end < lines.size() && !detail::trim(lines[end]).starts_with(kSlotMarker)) ++end;
    detail::parse_records(lines, i + 1, end, corpus.at(*variant, *partition));
    i = end;
  }
  return corpus;
}

enum class Granularity { ExecutedMethods, BuggyMethods };

inline PointMap filter_by_methods(const PointMap& points, const std::set<MethodId>& methods,
                                  Granularity granularity = Granularity::BuggyMethods) {
  if (granularity == Granularity::ExecutedMethods) return points;
  PointMap out;
  for (const auto& [point, set] : points) {
    if (methods.contains(point.method())) out.emplace(point, set);
  }
  return out;
}

}  // namespace patchcheck
