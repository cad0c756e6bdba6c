#pragma once

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include "igtkit/core.hpp"
#include "igtkit/detail/strings.hpp"
#include "igtkit/langid.hpp"
#include "json.hpp"

namespace igt {

struct SchemaViolation : Error {
  SchemaViolation(const std::string& field, const std::string& record_id,
                  const std::string& detail)
      : Error("schema violation in field '" + field + "' of record '" + record_id +
              "': " + detail) {}
};

struct MalformedRecord : Error {
  MalformedRecord(std::size_t line, const std::string& detail)
      : Error("malformed record at line " + std::to_string(line) + ": " + detail) {}
};

struct EncodingError : Error {
  EncodingError(std::size_t line, std::size_t byte_offset)
      : Error("invalid UTF-8 at line " + std::to_string(line) + ", byte " +
              std::to_string(byte_offset)) {}
};

struct Corpus {
  std::vector<IgtExample> examples;
  std::map<std::string, std::vector<std::string>> index;  // glottocode -> example ids
  std::vector<std::pair<std::string, std::size_t>> provenance;  // (source, count)
};

namespace detail {

inline std::string nfc(std::string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* norm = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw Error("ICU NFC instance unavailable");
  icu::UnicodeString input = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  icu::UnicodeString normalized = norm->normalize(input, status);
  if (U_FAILURE(status)) throw Error("NFC normalization failed");
  std::string out;
  normalized.toUTF8String(out);
  return out;
}

inline void index_corpus(Corpus& corpus) {
  corpus.index.clear();
  std::map<std::string, std::size_t> per_source;
  for (const auto& ex : corpus.examples) {
    std::string key = ex.glottocode.empty() ? "unknown" : ex.glottocode;
    corpus.index[key].push_back(ex.id);
    ++per_source[ex.source];
  }
  corpus.provenance.assign(per_source.begin(), per_source.end());
}

}  // namespace detail

// Canonical record: one JSON object per line with this exact field order;
// fields beyond the schema ride along in IgtExample::extras.
inline const std::vector<std::string>& canonical_fields() {
  static const std::vector<std::string> fields = {
      "id",     "glottocode",  "language_name", "metalang",           "source",
      "transcription", "segmented", "derived_unsegmented", "gloss_text", "translation"};
  return fields;
}

inline nlohmann::ordered_json to_canonical_json(const IgtExample& ex) {
  nlohmann::ordered_json j;
  j["id"] = ex.id;
  j["glottocode"] = ex.glottocode;
  j["language_name"] = ex.language_name;
  j["metalang"] = ex.metalang;
  j["source"] = ex.source;
  j["transcription"] = ex.transcription;
  j["segmented"] = std::string(to_string(ex.segmented));
  j["derived_unsegmented"] = ex.derived_unsegmented;
  j["gloss_text"] = ex.gloss_text;
  if (ex.translation)
    j["translation"] = *ex.translation;
  else
    j["translation"] = nullptr;
  for (const auto& [key, fragment] : ex.extras)
    j[key] = nlohmann::ordered_json::parse(fragment);
  return j;
}

inline IgtExample from_canonical_json(const nlohmann::ordered_json& j) {
  IgtExample ex;
  auto record_label = [&]() -> std::string {
    auto it = j.find("id");
    return it != j.end() && it->is_string() ? it->get<std::string>() : "<missing>";
  };
  auto need_string = [&](const char* field, bool required) -> std::string {
    auto it = j.find(field);
    if (it == j.end()) {
      if (required) throw SchemaViolation(field, record_label(), "field absent");
      return {};
    }
    if (!it->is_string()) throw SchemaViolation(field, record_label(), "not a string");
    return it->get<std::string>();
  };

  ex.id = need_string("id", true);
  if (ex.id.empty()) throw SchemaViolation("id", "<empty>", "empty id");
  ex.glottocode = need_string("glottocode", false);
  ex.language_name = need_string("language_name", false);
  ex.metalang = need_string("metalang", false);
  ex.source = need_string("source", false);
  ex.transcription = need_string("transcription", true);
  ex.gloss_text = need_string("gloss_text", true);

  if (auto it = j.find("segmented"); it != j.end()) {
    if (!it->is_string()) throw SchemaViolation("segmented", ex.id, "not a string");
    auto parsed = segmented_from_string(it->get<std::string>());
    if (!parsed)
      throw SchemaViolation("segmented", ex.id,
                            "expected yes, no or unknown, got '" + it->get<std::string>() + "'");
    ex.segmented = *parsed;
  } else {
    ex.segmented = Segmented::unknown;
  }

  if (auto it = j.find("derived_unsegmented"); it != j.end()) {
    if (!it->is_boolean()) throw SchemaViolation("derived_unsegmented", ex.id, "not a bool");
    ex.derived_unsegmented = it->get<bool>();
  }

  if (auto it = j.find("translation"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw SchemaViolation("translation", ex.id, "not a string or null");
    ex.translation = it->get<std::string>();
  }

  static const std::set<std::string> known(canonical_fields().begin(), canonical_fields().end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) ex.extras[it.key()] = it.value().dump();
  return ex;
}

inline std::string format_canonical(const std::vector<IgtExample>& examples) {
  std::string out;
  for (const auto& ex : examples) {
    out += to_canonical_json(ex).dump();
    out += '\n';
  }
  return out;
}

inline std::vector<IgtExample> parse_canonical(std::string_view text) {
  std::vector<IgtExample> out;
  std::size_t line_no = 0;
  std::set<std::string> seen_ids;
  for (std::string_view line : detail::split(text, '\n')) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    nlohmann::ordered_json j;
    try {
      j = nlohmann::ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw MalformedRecord(line_no, e.what());
    }
    IgtExample ex = from_canonical_json(j);
    if (!seen_ids.insert(ex.id).second)
      throw SchemaViolation("id", ex.id, "duplicate id in canonical file");
    out.push_back(std::move(ex));
  }
  return out;
}

inline void write_canonical(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write corpus: " + path);
  out << format_canonical(corpus.examples);
}

inline Corpus read_canonical(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open corpus: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  Corpus corpus;
  corpus.examples = parse_canonical(buf.str());
  detail::index_corpus(corpus);
  return corpus;
}

// Caller-supplied metadata for a SIGMORPHON shared-task file; the format
// itself carries no language information.
struct SigmorphonMeta {
  std::string glottocode;
  std::string language_name;
  std::string metalang;
  std::string source;
  std::string id_prefix;
};

inline std::vector<IgtExample> parse_sigmorphon(std::string_view text,
                                                const SigmorphonMeta& meta) {
  struct RawRecord {
    std::optional<std::string> t, m, g, l;
    std::size_t start_line = 0;
  };

  std::vector<IgtExample> out;
  RawRecord record;
  std::size_t line_no = 0;
  std::size_t record_no = 0;
  bool in_record = false;

  auto flush = [&] {
    if (!in_record) return;
    if (!record.t) throw MalformedRecord(record.start_line, "record lacks a \\t line");
    if (!record.g) throw MalformedRecord(record.start_line, "record lacks a \\g line");
    ++record_no;
    std::string base_id = meta.id_prefix + std::to_string(record_no);

    IgtExample ex;
    ex.glottocode = meta.glottocode;
    ex.language_name = meta.language_name;
    ex.metalang = meta.metalang;
    ex.source = meta.source;
    ex.gloss_text = *record.g;
    if (record.l) ex.translation = *record.l;

    if (record.m) {
      ex.id = base_id;
      ex.transcription = *record.m;
      ex.segmented = Segmented::yes;
      out.push_back(ex);

      IgtExample sibling = ex;
      sibling.id = base_id + "-unseg";
      sibling.transcription = *record.t;
      sibling.segmented = Segmented::no;
      sibling.derived_unsegmented = true;
      out.push_back(std::move(sibling));
    } else {
      ex.id = base_id;
      ex.transcription = *record.t;
      ex.segmented = detect_segmentation(ex.transcription);
      out.push_back(std::move(ex));
    }
    record = RawRecord{};
    in_record = false;
  };

  for (std::string_view raw : detail::split(text, '\n')) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    if (detail::trim(raw).empty()) {
      flush();
      continue;
    }
    std::size_t bad_offset = 0;
    if (!detail::utf8_decode(raw, nullptr, &bad_offset)) throw EncodingError(line_no, bad_offset);
    if (raw.size() < 2 || raw[0] != '\\')
      throw MalformedRecord(line_no, "expected a \\t, \\m, \\g or \\l prefix");
    char tag = raw[1];
    std::string content(detail::trim(raw.substr(2)));
    if (!in_record) {
      in_record = true;
      record.start_line = line_no;
    }
    std::optional<std::string>* slot = nullptr;
    switch (tag) {
      case 't': slot = &record.t; break;
      case 'm': slot = &record.m; break;
      case 'g': slot = &record.g; break;
      case 'l': slot = &record.l; break;
      default: throw MalformedRecord(line_no, std::string("unknown prefix \\") + tag);
    }
    if (*slot) throw MalformedRecord(line_no, std::string("repeated prefix \\") + tag);
    *slot = std::move(content);
  }
  flush();
  return out;
}

inline std::vector<IgtExample> read_sigmorphon(const std::string& path,
                                               const SigmorphonMeta& meta) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open SIGMORPHON file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_sigmorphon(buf.str(), meta);
}

struct LanguageTable {
  std::map<std::string, std::string> names;     // glottocode -> display name
  std::map<std::string, std::string> families;  // glottocode -> family
};

inline LanguageTable parse_language_table(std::string_view text) {
  LanguageTable table;
  std::size_t line_no = 0;
  for (std::string_view raw : detail::split(text, '\n')) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    std::string_view line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto fields = detail::split(raw, '\t');
    if (fields.size() < 2)
      throw Error("language table line " + std::to_string(line_no) +
                  ": expected glottocode<TAB>name(<TAB>family)");
    std::string code(detail::trim(fields[0]));
    table.names[code] = std::string(detail::trim(fields[1]));
    if (fields.size() > 2) table.families[code] = std::string(detail::trim(fields[2]));
  }
  return table;
}

inline LanguageTable read_language_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open language table: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_language_table(buf.str());
}

// Blank the translation only on a confident disagreement; "unknown"
// verdicts (short or inscrutable text) keep it. The blanking leaves an
// audit trail in extras.
inline IgtExample verify_translation(const IgtExample& example,
                                     const std::vector<LangIdProfile>& profiles,
                                     LangIdOptions options = {}) {
  IgtExample out = example;
  if (!out.translation || detail::trim(*out.translation).empty() || out.metalang.empty())
    return out;
  LanguageVerdict verdict = classify_language(*out.translation, profiles, options);
  if (verdict.lang == kUnknownLanguage || verdict.lang == out.metalang) return out;
  out.translation.reset();
  out.extras["translation_blanked"] = "true";
  out.extras["translation_langid"] = nlohmann::json(verdict.lang).dump();
  return out;
}

struct BuildOptions {
  bool normalize_unicode = true;   // NFC
  bool normalize_spaces = true;    // pad punctuation, collapse runs
  bool detect_segmentation = true; // only where segmented = unknown
  bool duplicate_unsegmented = true;
  std::vector<LangIdProfile> langid_profiles;  // empty = skip verification
  LangIdOptions langid;
  ParserOptions parser;
};

struct SkippedRecord {
  std::size_t input_index;
  std::string id;
  std::string reason;
};

struct BuildReport {
  std::vector<SkippedRecord> skipped;
  std::vector<std::pair<std::string, std::string>> rekeyed;  // (old id, new id)
};

struct BuildResult {
  Corpus corpus;
  BuildReport report;
};

inline BuildResult build_corpus(const std::vector<IgtExample>& raw, BuildOptions options = {}) {
  BuildResult result;
  std::set<std::string> used_ids;
  // Siblings already present in the input (reader output pairs them by id
  // convention); each one satisfies the duplication rule for one source.
  std::map<std::string, std::size_t> sibling_pool;
  for (const auto& ex : raw)
    if (ex.derived_unsegmented && ex.id.size() > 6 && ex.id.ends_with("-unseg"))
      ++sibling_pool[ex.id.substr(0, ex.id.size() - 6)];

  std::size_t running = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    IgtExample ex = raw[i];
    ++running;
    try {
      for (std::string* field : {&ex.transcription, &ex.gloss_text}) {
        std::size_t bad = 0;
        if (!detail::utf8_decode(*field, nullptr, &bad)) throw EncodingError(i + 1, bad);
        if (options.normalize_unicode) *field = detail::nfc(*field);
        if (options.normalize_spaces) *field = normalize_spacing(*field);
      }
      if (ex.translation) {
        std::size_t bad = 0;
        if (!detail::utf8_decode(*ex.translation, nullptr, &bad)) throw EncodingError(i + 1, bad);
        if (options.normalize_unicode) ex.translation = detail::nfc(*ex.translation);
        if (options.normalize_spaces) ex.translation = normalize_spacing(*ex.translation);
      }
    } catch (const Error& e) {
      result.report.skipped.push_back({i, ex.id, e.what()});
      continue;
    }

    if (options.detect_segmentation && ex.segmented == Segmented::unknown &&
        !ex.transcription.empty())
      ex.segmented = detect_segmentation(ex.transcription, options.parser);

    if (!options.langid_profiles.empty())
      ex = verify_translation(ex, options.langid_profiles, options.langid);

    if (ex.id.empty())
      ex.id = (ex.source.empty() ? std::string("record") : ex.source) + "-" +
              std::to_string(running);
    if (used_ids.count(ex.id)) {
      std::string base = ex.id;
      int suffix = 2;
      std::string candidate;
      do {
        candidate = base + "-dup" + std::to_string(suffix++);
      } while (used_ids.count(candidate));
      result.report.rekeyed.emplace_back(base, candidate);
      ex.id = candidate;
    }
    used_ids.insert(ex.id);

    result.corpus.examples.push_back(ex);

    if (options.duplicate_unsegmented && ex.segmented == Segmented::yes &&
        !ex.derived_unsegmented) {
      bool had_input_sibling = false;
      if (auto it = sibling_pool.find(raw[i].id); it != sibling_pool.end() && it->second > 0) {
        --it->second;
        had_input_sibling = true;
      }
      if (!had_input_sibling) {
        IgtExample sibling = strip_segmentation(ex, options.parser);
        while (used_ids.count(sibling.id)) sibling.id += "-dup";
        used_ids.insert(sibling.id);
        result.corpus.examples.push_back(std::move(sibling));
      }
    }
  }

  detail::index_corpus(result.corpus);
  return result;
}

// A source file plus how to parse it; metadata applies to SIGMORPHON files
// (the canonical format is self-describing).
struct IngestSource {
  enum class Kind { sigmorphon, canonical };
  Kind kind = Kind::canonical;
  std::string path;
  SigmorphonMeta meta;
};

inline BuildResult build_corpus(const std::vector<IngestSource>& sources,
                                BuildOptions options = {}) {
  std::vector<IgtExample> raw;
  for (const auto& src : sources) {
    std::vector<IgtExample> part = src.kind == IngestSource::Kind::sigmorphon
                                       ? read_sigmorphon(src.path, src.meta)
                                       : read_canonical(src.path).examples;
    raw.insert(raw.end(), std::make_move_iterator(part.begin()),
               std::make_move_iterator(part.end()));
  }
  return build_corpus(raw, std::move(options));
}

struct CorpusStats {
  std::size_t total = 0;
  std::size_t segmented = 0;
  std::size_t derived_unsegmented = 0;
  std::size_t with_translation = 0;
  std::map<std::string, std::size_t> per_language;  // glottocode or "unknown"
  std::map<std::string, std::size_t> per_family;    // via language table, or "unknown"
  std::size_t language_count = 0;
  double p25_per_language = 0;
  double p50_per_language = 0;
  double p75_per_language = 0;
};

inline CorpusStats corpus_stats(const Corpus& corpus, const LanguageTable& table = {}) {
  CorpusStats stats;
  stats.total = corpus.examples.size();
  for (const auto& ex : corpus.examples) {
    if (ex.segmented == Segmented::yes) ++stats.segmented;
    if (ex.derived_unsegmented) ++stats.derived_unsegmented;
    if (ex.translation && !detail::trim(*ex.translation).empty()) ++stats.with_translation;
    std::string lang = ex.glottocode.empty() ? "unknown" : ex.glottocode;
    ++stats.per_language[lang];
    auto fam = table.families.find(ex.glottocode);
    std::string family =
        fam != table.families.end() && !fam->second.empty() ? fam->second : "unknown";
    ++stats.per_family[family];
  }
  stats.language_count = stats.per_language.size();

  if (!stats.per_language.empty()) {
    std::vector<std::size_t> sizes;
    for (const auto& [lang, count] : stats.per_language) sizes.push_back(count);
    std::sort(sizes.begin(), sizes.end());
    auto quantile = [&](double q) {
      std::size_t idx = static_cast<std::size_t>(q * static_cast<double>(sizes.size() - 1));
      return static_cast<double>(sizes[idx]);
    };
    stats.p25_per_language = quantile(0.25);
    stats.p50_per_language = quantile(0.50);
    stats.p75_per_language = quantile(0.75);
  }
  return stats;
}

}  // namespace igt
