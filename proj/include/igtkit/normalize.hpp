#pragma once

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "igtkit/core.hpp"
#include "igtkit/detail/strings.hpp"

namespace igt {

struct EmptyInventory : Error {
  EmptyInventory() : Error("gloss inventory is empty") {}
};

struct ChainDetected : Error {
  ChainDetected(const std::string& a, const std::string& b, const std::string& c)
      : Error("normalization chain: " + a + " -> " + b + " -> " + c) {}
};

struct CycleDetected : Error {
  CycleDetected(const std::string& a, const std::string& b)
      : Error("normalization cycle: " + a + " <-> " + b) {}
};

struct DuplicateSource : Error {
  explicit DuplicateSource(const std::string& label)
      : Error("duplicate normalization source: " + label) {}
};

struct GlossInventory {
  std::map<std::string, std::size_t> counts;  // grammatical label -> occurrences
  std::size_t total = 0;
};

struct SkippedExample {
  std::string id;
  std::string reason;
};

struct InventoryResult {
  GlossInventory inventory;
  std::vector<SkippedExample> skipped;
};

namespace detail {

inline bool has_label_content(std::string_view token) {
  for (char c : token) {
    unsigned char b = static_cast<unsigned char>(c);
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
        b >= 0x80)
      return true;
  }
  return false;
}

}  // namespace detail

// Counts grammatical sub-gloss occurrences across the corpus. Tokens with
// no letter or digit cannot yield a countable label, so they are dropped
// before parsing rather than tripping the strict parser. Derived
// unsegmented duplicates share a gloss line with their source sentence and
// are skipped. Unparseable examples land on the skip list.
inline InventoryResult extract_inventory(const std::vector<IgtExample>& corpus,
                                         ParserOptions opts = {}) {
  InventoryResult result;
  for (const auto& ex : corpus) {
    if (ex.derived_unsegmented) continue;
    std::vector<std::string_view> tokens;
    for (std::string_view token : detail::split_ws(ex.gloss_text))
      if (detail::has_label_content(token)) tokens.push_back(token);
    if (tokens.empty()) {
      result.skipped.push_back({ex.id, "no gloss labels"});
      continue;
    }
    GlossLine line;
    try {
      line = parse_gloss_line(detail::join(tokens, " "), opts);
    } catch (const Error& e) {
      result.skipped.push_back({ex.id, e.what()});
      continue;
    }
    for (const auto& word : line.words)
      for (const auto& morpheme : word.morphemes)
        for (const auto& sub : morpheme.subglosses)
          if (sub.kind == GlossKind::grammatical) {
            ++result.inventory.counts[sub.text];
            ++result.inventory.total;
          }
  }
  return result;
}

struct CoverageReport {
  std::size_t unique_count = 0;
  double topk_fraction = 0;
  std::vector<std::pair<std::string, std::size_t>> ranked;  // count desc, label asc
};

inline CoverageReport coverage_report(const GlossInventory& inventory, std::size_t k) {
  if (k < 1) throw Error("coverage_report: k must be at least 1");
  if (inventory.counts.empty() || inventory.total == 0) throw EmptyInventory();
  CoverageReport report;
  report.unique_count = inventory.counts.size();
  report.ranked.assign(inventory.counts.begin(), inventory.counts.end());
  std::stable_sort(report.ranked.begin(), report.ranked.end(),
                   [](const auto& a, const auto& b) {
                     if (a.second != b.second) return a.second > b.second;
                     return a.first < b.first;
                   });
  std::size_t covered = 0;
  for (std::size_t i = 0; i < report.ranked.size() && i < k; ++i)
    covered += report.ranked[i].second;
  report.topk_fraction = static_cast<double>(covered) / static_cast<double>(inventory.total);
  return report;
}

struct NormalizationMap {
  std::map<std::string, std::string> entries;  // fixed point: targets map to themselves
  std::map<std::string, std::string> notes;
};

inline const std::string kKeepSentinel = "*KEEP";

namespace detail {

inline bool valid_label(std::string_view label) {
  if (label.empty()) return false;
  for (char c : label)
    if (is_space(c) || c == '-' || c == '.' || c == '=') return false;
  return true;
}

}  // namespace detail

// TSV rows: source<TAB>target(<TAB>note). Target "*KEEP" records an
// explicitly reviewed identity (ambiguous or not expressible in the target
// schema). Lines starting with "#" are comments.
inline NormalizationMap parse_normalization_map(std::string_view text) {
  NormalizationMap map;
  std::size_t line_no = 0;
  for (std::string_view raw : detail::split(text, '\n')) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    std::string_view line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto fields = detail::split(raw, '\t');
    if (fields.size() < 2)
      throw Error("normalization map line " + std::to_string(line_no) +
                  ": expected source<TAB>target");
    std::string source(detail::trim(fields[0]));
    std::string target(detail::trim(fields[1]));
    if (target == kKeepSentinel) target = source;
    if (!detail::valid_label(source) || !detail::valid_label(target))
      throw Error("normalization map line " + std::to_string(line_no) +
                  ": labels must be nonempty without whitespace, '-', '.', '='");
    if (map.entries.count(source)) throw DuplicateSource(source);
    map.entries[source] = target;
    if (fields.size() > 2) {
      std::string note(detail::trim(fields[2]));
      if (!note.empty()) map.notes[source] = note;
    }
  }
  for (const auto& [source, target] : map.entries) {
    if (source == target) continue;
    auto it = map.entries.find(target);
    if (it != map.entries.end() && it->second != target) {
      if (it->second == source) throw CycleDetected(source, target);
      throw ChainDetected(source, target, it->second);
    }
  }
  return map;
}

inline NormalizationMap load_map(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open normalization map: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_normalization_map(buf.str());
}

// Rewrites grammatical sub-glosses in place, preserving every separator
// and whitespace byte. Sub-gloss spans are maximal runs without
// whitespace, '-', '=', or '.'.
inline std::string apply_map(std::string_view gloss_line, const NormalizationMap& map) {
  std::string out;
  out.reserve(gloss_line.size());
  std::size_t i = 0;
  while (i < gloss_line.size()) {
    char c = gloss_line[i];
    if (detail::is_space(c) || c == '-' || c == '=' || c == '.') {
      out += c;
      ++i;
      continue;
    }
    std::size_t start = i;
    while (i < gloss_line.size() && !detail::is_space(gloss_line[i]) &&
           gloss_line[i] != '-' && gloss_line[i] != '=' && gloss_line[i] != '.')
      ++i;
    std::string_view span = gloss_line.substr(start, i - start);
    if (classify_subgloss(span) == GlossKind::grammatical) {
      auto it = map.entries.find(std::string(span));
      if (it != map.entries.end()) {
        out += it->second;
        continue;
      }
    }
    out += span;
  }
  return out;
}

inline IgtExample apply_map(const IgtExample& example, const NormalizationMap& map) {
  IgtExample out = example;
  out.gloss_text = apply_map(example.gloss_text, map);
  return out;
}

inline std::vector<IgtExample> apply_map(const std::vector<IgtExample>& corpus,
                                         const NormalizationMap& map) {
  std::vector<IgtExample> out;
  out.reserve(corpus.size());
  for (const auto& ex : corpus) out.push_back(apply_map(ex, map));
  return out;
}

}  // namespace igt
