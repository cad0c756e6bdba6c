#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "igtkit/core.hpp"
#include "igtkit/detail/strings.hpp"

namespace igt {

struct EmptyAfterFiltering : Error {
  explicit EmptyAfterFiltering(const std::string& what_emptied)
      : Error("no " + what_emptied + " survive filtering") {}
};

struct AllMissingFeature : Error {
  explicit AllMissingFeature(const std::string& feature)
      : Error("feature has no observed values: " + feature) {}
};

struct ZeroTotalWeight : Error {
  ZeroTotalWeight() : Error("total weight over matrix languages is zero") {}
};

struct ZeroNorm : Error {
  ZeroNorm() : Error("cosine undefined for a zero-norm vector") {}
};

struct DimensionMismatch : Error {
  DimensionMismatch(std::size_t a, std::size_t b)
      : Error("feature dimensions differ: " + std::to_string(a) + " vs " + std::to_string(b)) {}
};

inline constexpr std::int8_t kMissingCell = -1;

// Dense language-by-feature table; cells hold small non-negative values
// (0/1 once binarized) or kMissingCell.
struct FeatureMatrix {
  std::vector<std::string> languages;
  std::vector<std::string> features;
  std::vector<std::vector<std::int8_t>> values;  // [language][feature]
  double imputed_fraction = 0.0;

  std::int8_t at(std::size_t lang, std::size_t feat) const { return values[lang][feat]; }
};

namespace detail {

// RFC-4180-style row splitter; quotes only matter for comma separators.
inline std::vector<std::string> split_delimited_row(std::string_view line, char sep) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current += c;
      }
    } else if (c == '"' && sep == ',' && current.empty()) {
      quoted = true;
    } else if (c == sep) {
      fields.push_back(std::move(current));
      current.clear();
    } else {
      current += c;
    }
  }
  fields.push_back(std::move(current));
  return fields;
}

inline bool missing_marker(std::string_view value) {
  return value.empty() || value == "?" || value == "NA" || value == "na";
}

}  // namespace detail

// Sparse observed cells straight from a value file.
struct RawFeatureTable {
  std::map<std::pair<std::string, std::string>, std::int8_t> cells;  // (language, feature)
};

// Accepts a bare (language, feature, value) table or a CLDF-style values
// file with a header naming those columns. Separator inferred from the
// first line; "?", "NA", and empty values are missing and dropped.
inline RawFeatureTable parse_feature_values(std::string_view text) {
  RawFeatureTable table;
  char sep = text.substr(0, text.find('\n')).find('\t') != std::string_view::npos ? '\t' : ',';

  std::size_t line_no = 0;
  std::size_t col_lang = 0, col_feat = 1, col_value = 2;
  bool saw_header = false;
  for (std::string_view raw : detail::split(text, '\n')) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    if (detail::trim(raw).empty() || detail::trim(raw).front() == '#') continue;
    auto fields = detail::split_delimited_row(raw, sep);

    if (line_no == 1 || (!saw_header && table.cells.empty())) {
      std::optional<std::size_t> h_lang, h_feat, h_value;
      for (std::size_t i = 0; i < fields.size(); ++i) {
        std::string name = detail::lower_ascii(detail::trim(fields[i]));
        if (name == "language" || name == "language_id" || name == "glottocode")
          h_lang = i;
        else if (name == "feature" || name == "feature_id" || name == "parameter"
                 || name == "parameter_id")
          h_feat = i;
        else if (name == "value")
          h_value = i;
      }
      if (h_lang && h_feat && h_value) {
        col_lang = *h_lang;
        col_feat = *h_feat;
        col_value = *h_value;
        saw_header = true;
        continue;
      }
    }

    std::size_t needed = std::max({col_lang, col_feat, col_value}) + 1;
    if (fields.size() < needed)
      throw Error("feature table line " + std::to_string(line_no) + ": expected " +
                  std::to_string(needed) + " columns, got " + std::to_string(fields.size()));

    std::string lang(detail::trim(fields[col_lang]));
    std::string feat(detail::trim(fields[col_feat]));
    std::string value(detail::trim(fields[col_value]));
    if (lang.empty() || feat.empty())
      throw Error("feature table line " + std::to_string(line_no) + ": empty key field");
    if (detail::missing_marker(value)) continue;
    if (value.size() > 2 ||
        !std::all_of(value.begin(), value.end(), [](char c) { return c >= '0' && c <= '9'; }))
      throw Error("feature table line " + std::to_string(line_no) +
                  ": non-numeric feature value '" + value + "'");
    auto parsed = static_cast<std::int8_t>(std::stoi(value));

    auto key = std::make_pair(std::move(lang), std::move(feat));
    auto [it, inserted] = table.cells.emplace(key, parsed);
    if (!inserted && it->second != parsed)
      throw Error("feature table line " + std::to_string(line_no) +
                  ": conflicting duplicate for (" + key.first + ", " + key.second + ")");
  }
  return table;
}

inline RawFeatureTable read_feature_values(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open feature value table: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_feature_values(buf.str());
}

// One feature id per line; '#' comments allowed.
inline std::vector<std::string> parse_feature_list(std::string_view text) {
  std::vector<std::string> out;
  for (std::string_view raw : detail::split(text, '\n')) {
    std::string_view line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    out.emplace_back(line);
  }
  return out;
}

inline std::vector<std::string> read_feature_list(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open feature list: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_feature_list(buf.str());
}

// Dense matrix over the sorted language and feature sets of the table.
inline FeatureMatrix to_matrix(const RawFeatureTable& table) {
  std::set<std::string> langs, feats;
  for (const auto& [key, value] : table.cells) {
    langs.insert(key.first);
    feats.insert(key.second);
  }
  FeatureMatrix matrix;
  matrix.languages.assign(langs.begin(), langs.end());
  matrix.features.assign(feats.begin(), feats.end());
  std::map<std::string, std::size_t> lang_of, feat_of;
  for (std::size_t i = 0; i < matrix.languages.size(); ++i) lang_of[matrix.languages[i]] = i;
  for (std::size_t i = 0; i < matrix.features.size(); ++i) feat_of[matrix.features[i]] = i;
  matrix.values.assign(matrix.languages.size(),
                       std::vector<std::int8_t>(matrix.features.size(), kMissingCell));
  for (const auto& [key, value] : table.cells)
    matrix.values[lang_of[key.first]][feat_of[key.second]] = value;
  return matrix;
}

enum class BinarizeScheme {
  // One indicator column per distinct observed value, lettered in value
  // order (domain {1,2,3} -> Fa, Fb, Fc).
  onehot,
  // Grambank convention: Fa = value 1 or 3, Fb = value 2 or 3; value 0
  // clears both.
  paired,
};

struct PrepareOptions {
  double lang_missing_max = 0.36;
  double feat_missing_max = 0.36;
  std::vector<std::string> multistate_features;
  BinarizeScheme scheme = BinarizeScheme::onehot;
  std::map<std::string, std::string> dialect_of;  // dialect code -> parent language
};

inline FeatureMatrix prepare_matrix(const FeatureMatrix& raw, PrepareOptions options = {}) {
  // 1. Drop languages with too much missing data.
  std::vector<std::size_t> kept_langs;
  for (std::size_t l = 0; l < raw.languages.size(); ++l) {
    std::size_t missing = 0;
    for (std::size_t f = 0; f < raw.features.size(); ++f)
      if (raw.at(l, f) == kMissingCell) ++missing;
    double fraction =
        raw.features.empty() ? 1.0 : static_cast<double>(missing) / raw.features.size();
    if (fraction <= options.lang_missing_max) kept_langs.push_back(l);
  }
  if (kept_langs.empty()) throw EmptyAfterFiltering("languages");

  // 2. Drop features with too much missing data among the kept languages.
  std::vector<std::size_t> kept_feats;
  for (std::size_t f = 0; f < raw.features.size(); ++f) {
    std::size_t missing = 0;
    for (std::size_t l : kept_langs)
      if (raw.at(l, f) == kMissingCell) ++missing;
    double fraction = static_cast<double>(missing) / kept_langs.size();
    if (fraction <= options.feat_missing_max) kept_feats.push_back(f);
  }
  if (kept_feats.empty()) throw EmptyAfterFiltering("features");

  // 3. Binarize multistate features into lettered indicator columns.
  std::set<std::string> multistate(options.multistate_features.begin(),
                                   options.multistate_features.end());
  struct Column {
    std::string name;
    std::vector<std::int8_t> cells;  // parallel to kept_langs
  };
  std::vector<Column> columns;
  for (std::size_t f : kept_feats) {
    const std::string& name = raw.features[f];
    std::vector<std::int8_t> source;
    source.reserve(kept_langs.size());
    for (std::size_t l : kept_langs) source.push_back(raw.at(l, f));

    if (!multistate.count(name)) {
      for (std::int8_t v : source)
        if (v != kMissingCell && v != 0 && v != 1)
          throw Error("feature " + name + " has multistate value " + std::to_string(v) +
                      " but is not listed as multistate");
      columns.push_back({name, std::move(source)});
      continue;
    }

    if (options.scheme == BinarizeScheme::paired) {
      Column a{name + "a", {}}, b{name + "b", {}};
      for (std::int8_t v : source) {
        if (v == kMissingCell) {
          a.cells.push_back(kMissingCell);
          b.cells.push_back(kMissingCell);
        } else {
          a.cells.push_back(v == 1 || v == 3 ? 1 : 0);
          b.cells.push_back(v == 2 || v == 3 ? 1 : 0);
        }
      }
      columns.push_back(std::move(a));
      columns.push_back(std::move(b));
      continue;
    }

    std::set<std::int8_t> domain;
    for (std::int8_t v : source)
      if (v != kMissingCell) domain.insert(v);
    if (domain.size() > 26)
      throw Error("feature " + name + " has too many distinct values to letter");
    std::size_t index = 0;
    for (std::int8_t candidate : domain) {
      Column col{name + static_cast<char>('a' + index), {}};
      for (std::int8_t v : source)
        col.cells.push_back(v == kMissingCell ? kMissingCell
                                              : static_cast<std::int8_t>(v == candidate));
      columns.push_back(std::move(col));
      ++index;
    }
  }

  // 4. Keep one dialect per language: the lexicographically first code.
  auto parent_of = [&](const std::string& lang) {
    auto it = options.dialect_of.find(lang);
    return it == options.dialect_of.end() ? lang : it->second;
  };
  std::map<std::string, std::string> chosen;  // parent -> dialect code
  for (std::size_t i = 0; i < kept_langs.size(); ++i) {
    const std::string& lang = raw.languages[kept_langs[i]];
    std::string parent = parent_of(lang);
    auto it = chosen.find(parent);
    if (it == chosen.end() || lang < it->second) chosen[parent] = lang;
  }

  FeatureMatrix out;
  std::vector<std::size_t> final_rows;
  for (std::size_t i = 0; i < kept_langs.size(); ++i) {
    const std::string& lang = raw.languages[kept_langs[i]];
    if (chosen.at(parent_of(lang)) != lang) continue;
    out.languages.push_back(lang);
    final_rows.push_back(i);
  }

  std::sort(columns.begin(), columns.end(),
            [](const Column& a, const Column& b) { return a.name < b.name; });
  for (const auto& col : columns) out.features.push_back(col.name);
  out.values.assign(out.languages.size(),
                    std::vector<std::int8_t>(out.features.size(), kMissingCell));
  for (std::size_t c = 0; c < columns.size(); ++c)
    for (std::size_t r = 0; r < final_rows.size(); ++r)
      out.values[r][c] = columns[c].cells[final_rows[r]];
  return out;
}

struct ImputeOptions {
  enum class Strategy { mode, knn };
  Strategy strategy = Strategy::mode;
  std::size_t k = 5;
};

namespace detail {

// Majority observed value; ties break toward the smaller value, so binary
// ties resolve to 0.
inline std::int8_t majority(const std::map<std::int8_t, std::size_t>& counts) {
  std::int8_t best = 0;
  std::size_t best_count = 0;
  for (const auto& [value, count] : counts) {
    if (count > best_count) {
      best = value;
      best_count = count;
    }
  }
  return best;
}

}  // namespace detail

inline FeatureMatrix impute(const FeatureMatrix& matrix, ImputeOptions options = {}) {
  std::vector<std::int8_t> modes(matrix.features.size());
  for (std::size_t f = 0; f < matrix.features.size(); ++f) {
    std::map<std::int8_t, std::size_t> counts;
    for (std::size_t l = 0; l < matrix.languages.size(); ++l)
      if (matrix.at(l, f) != kMissingCell) ++counts[matrix.at(l, f)];
    if (counts.empty()) throw AllMissingFeature(matrix.features[f]);
    modes[f] = detail::majority(counts);
  }

  FeatureMatrix out = matrix;
  std::size_t filled = 0;
  for (std::size_t l = 0; l < matrix.languages.size(); ++l) {
    for (std::size_t f = 0; f < matrix.features.size(); ++f) {
      if (matrix.at(l, f) != kMissingCell) continue;
      ++filled;
      if (options.strategy == ImputeOptions::Strategy::mode) {
        out.values[l][f] = modes[f];
        continue;
      }

      // kNN: languages observing f, ranked by normalized Hamming distance
      // over co-observed features; language order breaks ties. Falls back
      // to the mode when no language shares an observed feature.
      std::vector<std::pair<double, std::size_t>> candidates;
      for (std::size_t m = 0; m < matrix.languages.size(); ++m) {
        if (m == l || matrix.at(m, f) == kMissingCell) continue;
        std::size_t shared = 0, differing = 0;
        for (std::size_t g = 0; g < matrix.features.size(); ++g) {
          if (matrix.at(l, g) == kMissingCell || matrix.at(m, g) == kMissingCell) continue;
          ++shared;
          if (matrix.at(l, g) != matrix.at(m, g)) ++differing;
        }
        if (shared == 0) continue;
        candidates.emplace_back(static_cast<double>(differing) / shared, m);
      }
      std::sort(candidates.begin(), candidates.end());
      std::map<std::int8_t, std::size_t> votes;
      for (std::size_t i = 0; i < candidates.size() && i < options.k; ++i)
        ++votes[matrix.at(candidates[i].second, f)];
      out.values[l][f] = votes.empty() ? modes[f] : detail::majority(votes);
    }
  }

  std::size_t total = matrix.languages.size() * matrix.features.size();
  out.imputed_fraction = total == 0 ? 0.0 : static_cast<double>(filled) / total;
  return out;
}

struct WeightedVector {
  std::vector<std::string> features;
  std::vector<double> values;  // each in [0, 1]
  double weight_total = 0;
};

// How much corpus mass the matrix covers; languages absent from the
// matrix are excluded from averaging but reported here.
struct WeightCoverage {
  double covered_weight = 0;
  double excluded_weight = 0;
  std::vector<std::string> excluded_languages;
};

inline WeightCoverage weight_coverage(const FeatureMatrix& matrix,
                                      const std::map<std::string, double>& weights) {
  WeightCoverage coverage;
  std::set<std::string> known(matrix.languages.begin(), matrix.languages.end());
  for (const auto& [lang, weight] : weights) {
    if (known.count(lang)) {
      coverage.covered_weight += weight;
    } else {
      coverage.excluded_weight += weight;
      coverage.excluded_languages.push_back(lang);
    }
  }
  return coverage;
}

// Drop features observed (pre-imputation) in languages holding less than
// `min_coverage` of the total matrix-language weight.
inline FeatureMatrix filter_features_by_coverage(const FeatureMatrix& matrix,
                                                 const std::map<std::string, double>& weights,
                                                 double min_coverage) {
  double total = 0;
  for (const auto& lang : matrix.languages) {
    auto it = weights.find(lang);
    if (it != weights.end()) total += it->second;
  }
  if (total <= 0) throw ZeroTotalWeight();

  std::vector<std::size_t> kept;
  for (std::size_t f = 0; f < matrix.features.size(); ++f) {
    double observed = 0;
    for (std::size_t l = 0; l < matrix.languages.size(); ++l) {
      if (matrix.at(l, f) == kMissingCell) continue;
      auto it = weights.find(matrix.languages[l]);
      if (it != weights.end()) observed += it->second;
    }
    if (observed / total >= min_coverage) kept.push_back(f);
  }
  if (kept.empty()) throw EmptyAfterFiltering("features");

  FeatureMatrix out;
  out.languages = matrix.languages;
  for (std::size_t f : kept) out.features.push_back(matrix.features[f]);
  out.values.assign(matrix.languages.size(), {});
  for (std::size_t l = 0; l < matrix.languages.size(); ++l) {
    out.values[l].reserve(kept.size());
    for (std::size_t f : kept) out.values[l].push_back(matrix.at(l, f));
  }
  out.imputed_fraction = matrix.imputed_fraction;
  return out;
}

inline WeightedVector weighted_average(const FeatureMatrix& matrix,
                                       const std::map<std::string, double>& weights) {
  WeightedVector vec;
  vec.features = matrix.features;
  vec.values.assign(matrix.features.size(), 0.0);

  double total = 0;
  for (std::size_t l = 0; l < matrix.languages.size(); ++l) {
    auto it = weights.find(matrix.languages[l]);
    double w = it == weights.end() ? 0.0 : it->second;
    if (w == 0) continue;
    total += w;
    for (std::size_t f = 0; f < matrix.features.size(); ++f) {
      std::int8_t v = matrix.at(l, f);
      if (v == kMissingCell || v < 0 || v > 1)
        throw Error("weighted_average needs an imputed binary matrix (feature " +
                    matrix.features[f] + ", language " + matrix.languages[l] + ")");
      vec.values[f] += w * v;
    }
  }
  if (total <= 0) throw ZeroTotalWeight();
  for (double& v : vec.values) v /= total;
  vec.weight_total = total;
  return vec;
}

// Uniform weights over every matrix language: the global reference vector.
inline WeightedVector global_average(const FeatureMatrix& matrix) {
  std::map<std::string, double> uniform;
  for (const auto& lang : matrix.languages) uniform[lang] = 1.0;
  return weighted_average(matrix, uniform);
}

inline double cosine(const WeightedVector& a, const WeightedVector& b) {
  if (a.features != b.features) throw DimensionMismatch(a.features.size(), b.features.size());
  double dot = 0, norm_a = 0, norm_b = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    dot += a.values[i] * b.values[i];
    norm_a += a.values[i] * a.values[i];
    norm_b += b.values[i] * b.values[i];
  }
  if (norm_a == 0 || norm_b == 0) throw ZeroNorm();
  return dot / (std::sqrt(norm_a) * std::sqrt(norm_b));
}

struct FeatureGap {
  std::string feature;
  double dataset_value = 0;
  double global_value = 0;
  double gap = 0;  // |dataset - global|
};

inline std::vector<FeatureGap> underrepresented(const WeightedVector& dataset,
                                                const WeightedVector& global, std::size_t n) {
  if (dataset.features != global.features)
    throw DimensionMismatch(dataset.features.size(), global.features.size());
  std::vector<FeatureGap> gaps;
  gaps.reserve(dataset.features.size());
  for (std::size_t i = 0; i < dataset.features.size(); ++i)
    gaps.push_back({dataset.features[i], dataset.values[i], global.values[i],
                    std::fabs(dataset.values[i] - global.values[i])});
  std::sort(gaps.begin(), gaps.end(), [](const FeatureGap& a, const FeatureGap& b) {
    if (a.gap != b.gap) return a.gap > b.gap;
    return a.feature < b.feature;
  });
  if (gaps.size() > n) gaps.resize(n);
  return gaps;
}

inline std::string format_feature_gaps(const std::vector<FeatureGap>& gaps) {
  std::string out = "feature\tdataset\tglobal\tgap\n";
  char buffer[128];
  for (const auto& gap : gaps) {
    std::snprintf(buffer, sizeof buffer, "%s\t%.4f\t%.4f\t%.4f\n", gap.feature.c_str(),
                  gap.dataset_value, gap.global_value, gap.gap);
    out += buffer;
  }
  return out;
}

inline std::string format_weighted_vector(const WeightedVector& vec) {
  std::string out = "feature\tvalue\n";
  char buffer[96];
  for (std::size_t i = 0; i < vec.features.size(); ++i) {
    std::snprintf(buffer, sizeof buffer, "%s\t%.4f\n", vec.features[i].c_str(), vec.values[i]);
    out += buffer;
  }
  return out;
}

}  // namespace igt
