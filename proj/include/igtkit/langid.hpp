#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "igtkit/core.hpp"
#include "igtkit/detail/strings.hpp"

namespace igt {

struct NoProfiles : Error {
  NoProfiles() : Error("no language profiles supplied") {}
};

// Rank-ordered character n-gram profile (Cavnar-Trenkle). Index in
// `ngrams` is the rank.
struct LangIdProfile {
  std::string lang;
  std::vector<std::string> ngrams;
};

struct LangIdOptions {
  std::size_t min_length = 20;  // codepoints; shorter texts classify as "unknown"
  std::size_t profile_size = 300;
  std::size_t max_n = 3;
};

inline const std::string kUnknownLanguage = "unknown";

namespace detail {

// Letters survive, case-folded for ASCII; digits and punctuation drop;
// whitespace runs become single '_' word markers.
inline std::vector<std::string> langid_units(std::string_view text) {
  std::vector<char32_t> cps;
  if (!utf8_decode(text, &cps)) {
    cps.clear();
    for (char c : text) {
      unsigned char b = static_cast<unsigned char>(c);
      cps.push_back(b < 0x80 ? b : 0xFFFD);
    }
  }
  std::vector<std::string> units;
  bool pending_boundary = false;
  for (char32_t cp : cps) {
    if (cp < 0x80) {
      char c = static_cast<char>(cp);
      if (is_space(c)) {
        pending_boundary = true;
        continue;
      }
      if (!((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'))) continue;
      if (c >= 'A' && c <= 'Z') cp = static_cast<char32_t>(c - 'A' + 'a');
    }
    if (pending_boundary && !units.empty()) units.push_back("_");
    pending_boundary = false;
    std::string unit;
    utf8_encode(cp, unit);
    units.push_back(unit);
  }
  return units;
}

inline std::vector<std::string> ranked_ngrams(std::string_view text, std::size_t max_n,
                                              std::size_t profile_size) {
  std::vector<std::string> units = langid_units(text);
  std::map<std::string, std::size_t> counts;
  for (std::size_t n = 1; n <= max_n; ++n) {
    if (units.size() < n) break;
    for (std::size_t i = 0; i + n <= units.size(); ++i) {
      std::string gram;
      for (std::size_t k = 0; k < n; ++k) gram += units[i + k];
      ++counts[gram];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> out;
  for (const auto& [gram, count] : ranked) {
    if (out.size() == profile_size) break;
    out.push_back(gram);
  }
  return out;
}

inline std::size_t codepoint_length(std::string_view text) {
  std::vector<char32_t> cps;
  if (utf8_decode(text, &cps)) return cps.size();
  return text.size();
}

}  // namespace detail

inline std::vector<LangIdProfile> train_langid(
    const std::vector<std::pair<std::string, std::vector<std::string>>>& seeds,
    LangIdOptions options = {}) {
  if (seeds.empty()) throw NoProfiles();
  std::vector<LangIdProfile> profiles;
  for (const auto& [lang, texts] : seeds) {
    std::string joined;
    for (const auto& text : texts) {
      joined += text;
      joined += '\n';
    }
    LangIdProfile profile;
    profile.lang = lang;
    profile.ngrams = detail::ranked_ngrams(joined, options.max_n, options.profile_size);
    if (profile.ngrams.empty()) throw Error("empty language profile for: " + lang);
    profiles.push_back(std::move(profile));
  }
  return profiles;
}

struct LanguageVerdict {
  std::string lang = kUnknownLanguage;
  double score = 0;  // 1 = perfect rank agreement, 0 = nothing shared
};

// Out-of-place distance: for each text n-gram, the rank difference against
// the profile, with a full-profile penalty for absent n-grams. Ties on
// distance break toward the lexicographically smaller language code.
inline LanguageVerdict classify_language(std::string_view text,
                                         const std::vector<LangIdProfile>& profiles,
                                         LangIdOptions options = {}) {
  if (profiles.empty()) throw NoProfiles();
  if (detail::codepoint_length(text) < options.min_length) return {};
  std::vector<std::string> text_profile =
      detail::ranked_ngrams(text, options.max_n, options.profile_size);
  if (text_profile.empty()) return {};

  LanguageVerdict best;
  long long best_distance = -1;
  for (const auto& profile : profiles) {
    std::map<std::string_view, std::size_t> ranks;
    for (std::size_t r = 0; r < profile.ngrams.size(); ++r)
      ranks.emplace(profile.ngrams[r], r);
    const long long penalty = static_cast<long long>(options.profile_size);
    long long distance = 0;
    for (std::size_t r = 0; r < text_profile.size(); ++r) {
      auto it = ranks.find(text_profile[r]);
      if (it == ranks.end())
        distance += penalty;
      else
        distance += std::llabs(static_cast<long long>(r) - static_cast<long long>(it->second));
    }
    if (best_distance < 0 || distance < best_distance ||
        (distance == best_distance && profile.lang < best.lang)) {
      best_distance = distance;
      best.lang = profile.lang;
    }
  }
  long long worst = static_cast<long long>(options.profile_size) *
                    static_cast<long long>(text_profile.size());
  best.score = worst == 0 ? 0.0 : 1.0 - static_cast<double>(best_distance) / worst;
  return best;
}

}  // namespace igt
