#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "igtkit/core.hpp"
#include "igtkit/detail/strings.hpp"
#include "json.hpp"

namespace igt {

struct NoUsableExamples : Error {
  NoUsableExamples() : Error("no usable training examples") {}
};

struct LevelMismatch : Error {
  explicit LevelMismatch(const std::string& what) : Error(what) {}
};

enum class LexiconLevel { morpheme, word };

inline std::string to_string(LexiconLevel level) {
  return level == LexiconLevel::morpheme ? "morpheme" : "word";
}

inline LexiconLevel lexicon_level_from_string(std::string_view s) {
  if (s == "morpheme") return LexiconLevel::morpheme;
  if (s == "word") return LexiconLevel::word;
  throw Error("unknown lexicon level: " + std::string(s));
}

// Most-frequent-label lexicon. The unit definition matches the scorer:
// words are whitespace tokens, morphemes are their nonempty dash-split
// pieces, so "a=b" trains and predicts as a single unit.
struct GlossLexicon {
  LexiconLevel level = LexiconLevel::morpheme;
  std::map<std::string, std::map<std::string, std::uint64_t>> counts;
  std::uint64_t trained_on = 0;  // XOR of per-example fingerprints, mergeable
  std::uint64_t skipped_examples = 0;
};

namespace detail {

inline std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 1469598103934665603ull) {
  for (char c : data) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t example_fingerprint(const IgtExample& ex) {
  std::uint64_t h = fnv1a(ex.id);
  h = fnv1a("\x1f", h);
  h = fnv1a(ex.transcription, h);
  h = fnv1a("\x1f", h);
  h = fnv1a(ex.gloss_text, h);
  return h;
}

inline std::vector<std::string_view> lexicon_pieces(std::string_view token) {
  std::vector<std::string_view> out;
  for (std::string_view piece : split(token, '-'))
    if (!piece.empty()) out.push_back(piece);
  return out;
}

}  // namespace detail

inline GlossLexicon train_top_choice(const std::vector<IgtExample>& corpus,
                                     LexiconLevel level) {
  GlossLexicon lexicon;
  lexicon.level = level;
  bool any_usable = false;
  for (const auto& ex : corpus) {
    if (level == LexiconLevel::morpheme && ex.segmented != Segmented::yes) {
      ++lexicon.skipped_examples;
      continue;
    }
    any_usable = true;
    lexicon.trained_on ^= detail::example_fingerprint(ex);
    auto forms = detail::split_ws(ex.transcription);
    auto glosses = detail::split_ws(ex.gloss_text);
    std::size_t n = std::min(forms.size(), glosses.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (level == LexiconLevel::word) {
        ++lexicon.counts[std::string(forms[i])][std::string(glosses[i])];
        continue;
      }
      auto form_pieces = detail::lexicon_pieces(forms[i]);
      auto gloss_pieces = detail::lexicon_pieces(glosses[i]);
      if (form_pieces.size() != gloss_pieces.size()) continue;  // misaligned word
      for (std::size_t k = 0; k < form_pieces.size(); ++k)
        ++lexicon.counts[std::string(form_pieces[k])][std::string(gloss_pieces[k])];
    }
  }
  if (!any_usable) throw NoUsableExamples();
  return lexicon;
}

inline GlossLexicon merge_lexicons(const GlossLexicon& a, const GlossLexicon& b) {
  if (a.level != b.level)
    throw LevelMismatch("cannot merge " + to_string(a.level) + " lexicon with " +
                        to_string(b.level) + " lexicon");
  GlossLexicon out = a;
  for (const auto& [form, labels] : b.counts)
    for (const auto& [label, count] : labels) out.counts[form][label] += count;
  out.trained_on ^= b.trained_on;
  out.skipped_examples += b.skipped_examples;
  return out;
}

inline const std::string kUnseenGloss = "???";

namespace detail {

inline std::string top_label(const GlossLexicon& lexicon, std::string_view unit) {
  auto it = lexicon.counts.find(std::string(unit));
  if (it == lexicon.counts.end() || it->second.empty()) return kUnseenGloss;
  const std::string* best = nullptr;
  std::uint64_t best_count = 0;
  for (const auto& [label, count] : it->second) {
    // map order is ascending, so '>' keeps the lexicographically
    // smallest label among tied counts
    if (count > best_count) {
      best = &label;
      best_count = count;
    }
  }
  return *best;
}

}  // namespace detail

inline std::string predict_top_choice(const GlossLexicon& lexicon, const IgtExample& example) {
  if (lexicon.level == LexiconLevel::morpheme && example.segmented != Segmented::yes)
    throw LevelMismatch("morpheme-level lexicon needs segmented input, example " +
                        example.id + " is " + std::string(to_string(example.segmented)));
  std::vector<std::string> words;
  for (std::string_view form : detail::split_ws(example.transcription)) {
    if (lexicon.level == LexiconLevel::word) {
      words.push_back(detail::top_label(lexicon, form));
      continue;
    }
    auto pieces = detail::lexicon_pieces(form);
    if (pieces.empty()) {
      words.push_back(kUnseenGloss);
      continue;
    }
    std::vector<std::string> labels;
    for (std::string_view piece : pieces) labels.push_back(detail::top_label(lexicon, piece));
    words.push_back(detail::join(labels, "-"));
  }
  return detail::join(words, " ");
}

// Deterministic TSV: header comments carry the metadata, then one
// form<TAB>label<TAB>count row per pair in (form, label) order.
inline std::string format_lexicon(const GlossLexicon& lexicon) {
  std::ostringstream out;
  out << "# igtkit lexicon\n";
  out << "# level: " << to_string(lexicon.level) << "\n";
  out << "# fingerprint: " << std::hex << lexicon.trained_on << std::dec << "\n";
  out << "# skipped: " << lexicon.skipped_examples << "\n";
  for (const auto& [form, labels] : lexicon.counts)
    for (const auto& [label, count] : labels)
      out << form << '\t' << label << '\t' << count << '\n';
  return out.str();
}

inline GlossLexicon parse_lexicon(std::string_view text) {
  GlossLexicon lexicon;
  std::size_t line_no = 0;
  for (std::string_view raw : detail::split(text, '\n')) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    std::string_view line = detail::trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      std::string_view rest = detail::trim(line.substr(1));
      if (detail::starts_with(rest, "level:"))
        lexicon.level = lexicon_level_from_string(detail::trim(rest.substr(6)));
      else if (detail::starts_with(rest, "fingerprint:"))
        lexicon.trained_on = std::stoull(std::string(detail::trim(rest.substr(12))), nullptr, 16);
      else if (detail::starts_with(rest, "skipped:"))
        lexicon.skipped_examples = std::stoull(std::string(detail::trim(rest.substr(8))));
      continue;
    }
    auto fields = detail::split(raw, '\t');
    if (fields.size() != 3)
      throw Error("lexicon line " + std::to_string(line_no) +
                  ": expected form<TAB>label<TAB>count");
    if (fields[0].empty()) throw Error("lexicon line " + std::to_string(line_no) + ": empty form");
    std::uint64_t count = std::stoull(std::string(fields[2]));
    if (count == 0) throw Error("lexicon line " + std::to_string(line_no) + ": zero count");
    lexicon.counts[std::string(fields[0])][std::string(fields[1])] += count;
  }
  return lexicon;
}

inline void save_lexicon(const GlossLexicon& lexicon, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write lexicon: " + path);
  out << format_lexicon(lexicon);
}

inline GlossLexicon load_lexicon(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open lexicon: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_lexicon(buf.str());
}

struct PromptRecord {
  std::string example_id;
  std::string prompt;
  std::string target;
};

struct PromptOptions {
  // Display-name overrides keyed by glottocode / metalang code; the
  // default is the recorded language name, falling back to the code.
  std::map<std::string, std::string> language_names;
  std::map<std::string, std::string> metalang_names;
  bool normalize_target_spacing = true;
};

namespace detail {

inline const std::map<std::string, std::string>& builtin_metalang_names() {
  static const std::map<std::string, std::string> names = {
      {"eng", "English"},  {"spa", "Spanish"},  {"fra", "French"},
      {"deu", "German"},   {"por", "Portuguese"}, {"rus", "Russian"},
      {"ind", "Indonesian"}, {"cmn", "Mandarin"}, {"zho", "Mandarin"},
  };
  return names;
}

inline std::string language_display(const IgtExample& ex, const PromptOptions& options) {
  auto it = options.language_names.find(ex.glottocode);
  if (it != options.language_names.end()) return it->second;
  if (!ex.language_name.empty()) return ex.language_name;
  return ex.glottocode;
}

inline std::string metalang_display(const IgtExample& ex, const PromptOptions& options) {
  auto it = options.metalang_names.find(ex.metalang);
  if (it != options.metalang_names.end()) return it->second;
  const auto& builtin = builtin_metalang_names();
  auto bit = builtin.find(ex.metalang);
  if (bit != builtin.end()) return bit->second;
  return ex.metalang;
}

}  // namespace detail

inline std::string build_prompt(const IgtExample& ex, const PromptOptions& options = {}) {
  std::string lang = detail::language_display(ex, options);
  std::string prompt = "Provide the glosses for the following transcription in " + lang + ".\n";
  prompt += "\n";
  prompt += "Transcription in " + lang + ": " + ex.transcription + "\n";
  prompt += "Transcription segmented: " + std::string(to_string(ex.segmented)) + "\n";
  if (ex.translation && !detail::trim(*ex.translation).empty())
    prompt += "Translation in " + detail::metalang_display(ex, options) + ": " +
              *ex.translation + "\n";
  prompt += "Glosses: ";
  return prompt;
}

inline std::vector<PromptRecord> export_prompts(const std::vector<IgtExample>& corpus,
                                                const PromptOptions& options = {}) {
  std::vector<PromptRecord> out;
  out.reserve(corpus.size());
  for (const auto& ex : corpus) {
    PromptRecord rec;
    rec.example_id = ex.id;
    rec.prompt = build_prompt(ex, options);
    rec.target =
        options.normalize_target_spacing ? normalize_spacing(ex.gloss_text) : ex.gloss_text;
    out.push_back(std::move(rec));
  }
  return out;
}

// Prompt files are JSON lines; prompts embed newlines so a plain
// line-oriented text format cannot hold them.
inline std::string format_prompts(const std::vector<PromptRecord>& records) {
  std::string out;
  for (const auto& rec : records) {
    nlohmann::ordered_json j;
    j["example_id"] = rec.example_id;
    j["prompt"] = rec.prompt;
    j["target"] = rec.target;
    out += j.dump();
    out += '\n';
  }
  return out;
}

inline std::vector<PromptRecord> parse_prompts(std::string_view text) {
  std::vector<PromptRecord> out;
  std::size_t line_no = 0;
  for (std::string_view line : detail::split(text, '\n')) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error("prompt file line " + std::to_string(line_no) + ": " + e.what());
    }
    PromptRecord rec;
    rec.example_id = j.at("example_id").get<std::string>();
    rec.prompt = j.at("prompt").get<std::string>();
    rec.target = j.value("target", std::string{});
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace igt
