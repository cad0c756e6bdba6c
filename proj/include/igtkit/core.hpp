#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "igtkit/detail/strings.hpp"

namespace igt {

class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class EmptyGlossLine : public Error {
public:
  EmptyGlossLine() : Error("gloss line is empty or whitespace-only") {}
};

class DegenerateToken : public Error {
public:
  DegenerateToken(std::size_t word_index, std::string_view token)
      : Error("word " + std::to_string(word_index) + " (\"" + std::string(token) +
              "\") has no sub-glosses"),
        word_index(word_index) {}
  std::size_t word_index;
};

class NotSegmented : public Error {
public:
  explicit NotSegmented(const std::string& id)
      : Error("example \"" + id + "\" is not segmented") {}
};

enum class Segmented { yes, no, unknown };

inline std::string_view to_string(Segmented s) {
  switch (s) {
    case Segmented::yes: return "yes";
    case Segmented::no: return "no";
    default: return "unknown";
  }
}

inline std::optional<Segmented> segmented_from_string(std::string_view s) {
  if (s == "yes") return Segmented::yes;
  if (s == "no") return Segmented::no;
  if (s == "unknown") return Segmented::unknown;
  return std::nullopt;
}

enum class GlossKind { grammatical, lexical };

/// One IGT record. Empty strings mean "not recorded" for the optional
/// metadata fields; `extras` carries unknown canonical-file fields opaquely
/// (values are serialized JSON fragments).
struct IgtExample {
  std::string id;
  std::string glottocode;
  std::string language_name;
  std::string metalang;
  std::string source;
  std::string transcription;
  Segmented segmented = Segmented::unknown;
  std::string gloss_text;
  std::optional<std::string> translation;
  bool derived_unsegmented = false;
  std::map<std::string, std::string> extras;

  bool operator==(const IgtExample&) const = default;
};

struct SubGloss {
  std::string text;
  GlossKind kind;
  bool operator==(const SubGloss&) const = default;
};

struct MorphemeGloss {
  std::vector<SubGloss> subglosses;
  bool operator==(const MorphemeGloss&) const = default;

  std::string text() const {
    std::string out;
    for (std::size_t i = 0; i < subglosses.size(); ++i) {
      if (i) out += '.';
      out += subglosses[i].text;
    }
    return out;
  }
};

struct GlossWord {
  std::vector<MorphemeGloss> morphemes;
  /// separators[i] joins morphemes[i] and morphemes[i+1]; '-' or '='.
  std::string separators;
  bool operator==(const GlossWord&) const = default;

  std::string text() const {
    std::string out;
    for (std::size_t i = 0; i < morphemes.size(); ++i) {
      if (i) out += i - 1 < separators.size() ? separators[i - 1] : '-';
      out += morphemes[i].text();
    }
    return out;
  }
};

struct GlossLine {
  std::vector<GlossWord> words;
  bool operator==(const GlossLine&) const = default;

  std::string text() const {
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (i) out += ' ';
      out += words[i].text();
    }
    return out;
  }
};

struct AlignmentReport {
  std::size_t word_count_transcription = 0;
  std::size_t word_count_gloss = 0;
  bool words_aligned = false;
  std::optional<bool> morphemes_aligned;  // set only for segmented examples
  std::vector<std::size_t> mismatch_positions;
};

struct ParserOptions {
  /// Treat the clitic boundary '=' as a morpheme separator alongside '-'.
  bool clitic_boundaries = true;
  /// A '-' marks a morpheme boundary only when not adjacent to another
  /// separator character; turn off to count every interior dash.
  bool strict_dash_boundaries = true;

  bool is_separator(char c) const {
    return c == '-' || (clitic_boundaries && c == '=');
  }
};

/// Grammatical iff the token has no lowercase ASCII letter and at least one
/// uppercase letter or digit; everything else (stems, "???", punctuation)
/// is lexical. Non-ASCII bytes count as neither.
inline GlossKind classify_subgloss(std::string_view token) {
  bool has_upper_or_digit = false;
  for (char c : token) {
    if (c >= 'a' && c <= 'z') return GlossKind::lexical;
    if ((c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9')) has_upper_or_digit = true;
  }
  return has_upper_or_digit ? GlossKind::grammatical : GlossKind::lexical;
}

struct MorphemeSplit {
  std::vector<std::string> pieces;
  std::string separators;  // between consecutive kept pieces
};

/// Split a word token into morphemes on '-' (and '=' per options). Empty
/// pieces from doubled or edge separators are suppressed; a word that is all
/// separators yields no pieces.
inline MorphemeSplit split_morphemes(std::string_view word, const ParserOptions& opts = {}) {
  MorphemeSplit out;
  std::string current;
  char pending = '-';
  for (char c : word) {
    if (opts.is_separator(c)) {
      if (!current.empty()) {
        if (!out.pieces.empty()) out.separators += pending;
        out.pieces.push_back(std::move(current));
        current.clear();
      }
      pending = c;
    } else {
      current += c;
    }
  }
  if (!current.empty()) {
    if (!out.pieces.empty()) out.separators += pending;
    out.pieces.push_back(std::move(current));
  }
  return out;
}

/// Parse a whitespace-delimited gloss line into words / morphemes /
/// sub-glosses. Throws EmptyGlossLine for whitespace-only input and
/// DegenerateToken when a word reduces to zero sub-glosses ("--", "..").
inline GlossLine parse_gloss_line(std::string_view text, const ParserOptions& opts = {}) {
  auto tokens = detail::split_ws(text);
  if (tokens.empty()) throw EmptyGlossLine();
  GlossLine line;
  for (std::size_t wi = 0; wi < tokens.size(); ++wi) {
    auto split = split_morphemes(tokens[wi], opts);
    GlossWord word;
    for (std::size_t mi = 0; mi < split.pieces.size(); ++mi) {
      MorphemeGloss morpheme;
      for (auto part : detail::split(split.pieces[mi], '.')) {
        if (part.empty()) continue;
        morpheme.subglosses.push_back({std::string(part), classify_subgloss(part)});
      }
      if (morpheme.subglosses.empty()) continue;  // all-period piece, drop it
      if (!word.morphemes.empty())
        word.separators += mi > 0 ? split.separators[mi - 1] : '-';
      word.morphemes.push_back(std::move(morpheme));
    }
    if (word.morphemes.empty()) throw DegenerateToken(wi, tokens[wi]);
    line.words.push_back(std::move(word));
  }
  return line;
}

inline std::string serialize(const GlossLine& line) { return line.text(); }

/// Heuristic used when a source does not declare segmentation: a word with a
/// morpheme-boundary dash makes the line segmented. In strict mode a dash
/// adjacent to another separator ("a--b") does not count.
inline Segmented detect_segmentation(std::string_view transcription,
                                     const ParserOptions& opts = {}) {
  for (auto word : detail::split_ws(transcription)) {
    for (std::size_t i = 1; i + 1 < word.size(); ++i) {
      if (word[i] != '-') continue;
      if (!opts.strict_dash_boundaries) return Segmented::yes;
      if (!opts.is_separator(word[i - 1]) && !opts.is_separator(word[i + 1]))
        return Segmented::yes;
    }
  }
  return Segmented::no;
}

/// Remove morpheme boundary markers from every word token. Tokens that are
/// nothing but separators (standalone "-" punctuation) are kept verbatim.
/// Output whitespace is normalized to single spaces.
inline std::string strip_boundary_markers(std::string_view text, const ParserOptions& opts = {}) {
  std::string out;
  for (auto word : detail::split_ws(text)) {
    std::string stripped;
    for (char c : word)
      if (!opts.is_separator(c)) stripped += c;
    if (!out.empty()) out += ' ';
    out += stripped.empty() ? std::string(word) : stripped;
  }
  return out;
}

/// Derive the unsegmented sibling of a segmented record: markers removed from
/// the transcription, gloss and translation untouched, id suffixed "-unseg".
inline IgtExample strip_segmentation(const IgtExample& example, const ParserOptions& opts = {}) {
  if (example.segmented != Segmented::yes) throw NotSegmented(example.id);
  IgtExample out = example;
  out.transcription = strip_boundary_markers(example.transcription, opts);
  out.segmented = Segmented::no;
  out.derived_unsegmented = true;
  out.id += "-unseg";
  return out;
}

namespace detail {

inline bool is_always_padded(char c) {
  switch (c) {
    case ',': case '!': case '?': case '"': case ';': case ':':
    case '(': case ')': case '[': case ']': case '{': case '}':
      return true;
    default:
      return false;
  }
}

inline bool is_token_char(char c) {
  return !is_space(c) && !is_always_padded(c) && c != '.';
}

}  // namespace detail

/// Pad sentence punctuation with spaces and collapse whitespace runs.
/// Periods flanked by token characters (fusional "when.PAST") and morpheme
/// dashes are left alone. Idempotent.
inline std::string normalize_spacing(std::string_view text) {
  std::string padded;
  padded.reserve(text.size() + 8);
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (detail::is_always_padded(c)) {
      padded += ' ';
      padded += c;
      padded += ' ';
    } else if (c == '.') {
      bool interior = i > 0 && detail::is_token_char(text[i - 1]) &&
                      i + 1 < text.size() && detail::is_token_char(text[i + 1]);
      if (interior) {
        padded += c;
      } else {
        padded += ' ';
        padded += c;
        padded += ' ';
      }
    } else {
      padded += c;
    }
  }
  return detail::join(detail::split_ws(padded), " ");
}

/// Compare word counts between transcription and gloss line, and (for
/// segmented examples) per-word morpheme counts. Gloss parse errors
/// propagate.
inline AlignmentReport check_alignment(const IgtExample& example,
                                       const ParserOptions& opts = {}) {
  AlignmentReport report;
  auto twords = detail::split_ws(example.transcription);
  GlossLine gloss = parse_gloss_line(example.gloss_text, opts);
  report.word_count_transcription = twords.size();
  report.word_count_gloss = gloss.words.size();
  report.words_aligned = twords.size() == gloss.words.size();

  bool segmented = example.segmented == Segmented::yes;
  bool morphemes_ok = report.words_aligned;
  std::size_t common = std::min(twords.size(), gloss.words.size());
  std::size_t extent = std::max(twords.size(), gloss.words.size());
  for (std::size_t i = 0; i < extent; ++i) {
    if (i >= common) {
      report.mismatch_positions.push_back(i);
      continue;
    }
    if (segmented) {
      std::size_t tm = split_morphemes(twords[i], opts).pieces.size();
      if (tm != gloss.words[i].morphemes.size()) {
        report.mismatch_positions.push_back(i);
        morphemes_ok = false;
      }
    }
  }
  if (segmented) report.morphemes_aligned = morphemes_ok;
  return report;
}

}  // namespace igt
