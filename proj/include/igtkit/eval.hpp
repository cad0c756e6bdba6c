#pragma once

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "igtkit/core.hpp"
#include "igtkit/detail/strings.hpp"

namespace igt {

struct EmptyGold : Error {
  EmptyGold() : Error("gold side has no scoring units") {}
  explicit EmptyGold(const std::string& what) : Error(what) {}
};

struct UnknownPredictionId : Error {
  explicit UnknownPredictionId(const std::string& id)
      : Error("prediction for unknown example id: " + id) {}
};

// Tokens made solely of these characters are dropped before scoring.
// '?' is deliberately absent: "???" is the conventional unknown-gloss
// placeholder and must stay in place to count as a wrong unit.
inline bool is_eval_punct(char c) {
  static constexpr std::string_view punct = "!\"#$%&'()*+,-./:;<=>@[\\]^_`{|}~";
  return punct.find(c) != std::string_view::npos;
}

inline std::vector<std::string_view> eval_words(std::string_view line) {
  std::vector<std::string_view> out;
  for (std::string_view token : detail::split_ws(line)) {
    bool all_punct =
        std::all_of(token.begin(), token.end(), [](char c) { return is_eval_punct(c); });
    if (!all_punct) out.push_back(token);
  }
  return out;
}

inline std::string strip_eval_punctuation(std::string_view line) {
  return detail::join(eval_words(line), " ");
}

// Morpheme units: surviving tokens split on "-" only. "=" and "." stay
// inside the unit so clitics and fused glosses compare as written.
inline std::vector<std::string_view> eval_morphemes(std::string_view line) {
  std::vector<std::string_view> out;
  for (std::string_view token : eval_words(line))
    for (std::string_view piece : detail::split(token, '-'))
      if (!piece.empty()) out.push_back(piece);
  return out;
}

struct UnitCounts {
  std::size_t correct = 0;
  std::size_t total = 0;

  UnitCounts& operator+=(const UnitCounts& other) {
    correct += other.correct;
    total += other.total;
    return *this;
  }
  double fraction() const {
    if (total == 0) throw EmptyGold();
    return static_cast<double>(correct) / static_cast<double>(total);
  }
};

namespace detail {

inline UnitCounts positional_counts(const std::vector<std::string_view>& gold,
                                    const std::vector<std::string_view>& pred) {
  UnitCounts counts;
  counts.total = gold.size();
  std::size_t overlap = std::min(gold.size(), pred.size());
  for (std::size_t i = 0; i < overlap; ++i)
    if (gold[i] == pred[i]) ++counts.correct;
  return counts;
}

}  // namespace detail

// Denominator is the gold unit count; predicted units beyond it score
// nothing, and insertions or deletions shift every later position.
inline UnitCounts morpheme_counts(std::string_view gold, std::string_view pred) {
  return detail::positional_counts(eval_morphemes(gold), eval_morphemes(pred));
}

inline UnitCounts word_counts(std::string_view gold, std::string_view pred) {
  return detail::positional_counts(eval_words(gold), eval_words(pred));
}

inline double morpheme_accuracy(std::string_view gold, std::string_view pred) {
  return morpheme_counts(gold, pred).fraction();
}

inline double word_accuracy(std::string_view gold, std::string_view pred) {
  return word_counts(gold, pred).fraction();
}

struct ChrfParams {
  int char_n = 6;
  int word_n = 2;
  double beta = 2.0;
};

namespace detail {

// Lenient codepoint split for n-gram purposes: invalid UTF-8 degrades to
// one unit per byte instead of failing, since scoring must not throw.
inline std::vector<char32_t> chrf_codepoints(std::string_view text) {
  std::vector<char32_t> cps;
  if (!utf8_decode(text, &cps)) {
    cps.clear();
    for (char c : text) cps.push_back(static_cast<unsigned char>(c));
  }
  std::vector<char32_t> out;
  for (char32_t cp : cps)
    if (!(cp < 0x80 && is_space(static_cast<char>(cp)))) out.push_back(cp);
  return out;
}

template <class Unit>
void count_ngrams(const std::vector<Unit>& units, std::size_t n,
                  std::map<std::vector<Unit>, long long>& counts) {
  if (units.size() < n) return;
  std::vector<Unit> key(n);
  for (std::size_t i = 0; i + n <= units.size(); ++i) {
    std::copy(units.begin() + i, units.begin() + i + n, key.begin());
    ++counts[key];
  }
}

}  // namespace detail

class ChrfAccumulator {
 public:
  explicit ChrfAccumulator(ChrfParams params = {}) : params_(params) {
    orders_.resize(static_cast<std::size_t>(params_.char_n + params_.word_n));
  }

  void add(std::string_view gold, std::string_view pred) {
    std::vector<char32_t> gold_chars = detail::chrf_codepoints(gold);
    std::vector<char32_t> pred_chars = detail::chrf_codepoints(pred);
    for (int n = 1; n <= params_.char_n; ++n)
      accumulate(orders_[static_cast<std::size_t>(n - 1)], gold_chars, pred_chars,
                 static_cast<std::size_t>(n));

    std::vector<std::string> gold_words, pred_words;
    for (auto t : detail::split_ws(gold)) gold_words.emplace_back(t);
    for (auto t : detail::split_ws(pred)) pred_words.emplace_back(t);
    for (int n = 1; n <= params_.word_n; ++n)
      accumulate(orders_[static_cast<std::size_t>(params_.char_n + n - 1)], gold_words,
                 pred_words, static_cast<std::size_t>(n));
  }

  // Counts pool across added pairs before the F computation; orders with
  // no n-grams on either side are left out of the precision/recall means.
  double score() const {
    double precision_sum = 0, recall_sum = 0;
    std::size_t counted = 0;
    for (const auto& s : orders_) {
      if (s.total_gold + s.total_pred == 0) continue;
      ++counted;
      if (s.total_pred) precision_sum += static_cast<double>(s.matches) / s.total_pred;
      if (s.total_gold) recall_sum += static_cast<double>(s.matches) / s.total_gold;
    }
    if (counted == 0) return 100.0;
    double precision = precision_sum / static_cast<double>(counted);
    double recall = recall_sum / static_cast<double>(counted);
    double b2 = params_.beta * params_.beta;
    double denom = b2 * precision + recall;
    if (denom == 0) return 0.0;
    return 100.0 * (1 + b2) * precision * recall / denom;
  }

 private:
  struct OrderStats {
    long long matches = 0;
    long long total_gold = 0;
    long long total_pred = 0;
  };

  template <class Unit>
  static void accumulate(OrderStats& stats, const std::vector<Unit>& gold,
                         const std::vector<Unit>& pred, std::size_t n) {
    std::map<std::vector<Unit>, long long> gold_counts, pred_counts;
    detail::count_ngrams(gold, n, gold_counts);
    detail::count_ngrams(pred, n, pred_counts);
    for (const auto& [gram, count] : gold_counts) stats.total_gold += count;
    for (const auto& [gram, count] : pred_counts) {
      stats.total_pred += count;
      auto it = gold_counts.find(gram);
      if (it != gold_counts.end()) stats.matches += std::min(count, it->second);
    }
  }

  ChrfParams params_;
  std::vector<OrderStats> orders_;
};

inline double chrf(std::string_view gold, std::string_view pred, ChrfParams params = {}) {
  ChrfAccumulator acc(params);
  acc.add(gold, pred);
  return acc.score();
}

struct MetricReport {
  double morpheme_accuracy = 0;
  double word_accuracy = 0;
  double chrf = 0;
  std::size_t n_examples = 0;
};

struct Prediction {
  std::string example_id;
  std::string gloss;
};

struct EvalOptions {
  ChrfParams chrf;
  // Strict mode scores length-mismatched lines as fully wrong instead of
  // comparing the overlapping prefix.
  bool strict_length = false;
};

struct EvalResult {
  MetricReport overall;
  std::map<std::string, MetricReport> per_language;  // keyed by glottocode
};

inline EvalResult evaluate(const std::vector<IgtExample>& gold,
                           const std::vector<Prediction>& predictions,
                           EvalOptions options = {}) {
  if (gold.empty()) throw EmptyGold("evaluate: empty gold corpus");

  std::set<std::string> gold_ids;
  for (const auto& ex : gold) gold_ids.insert(ex.id);
  std::unordered_map<std::string, const std::string*> by_id;
  for (const auto& p : predictions) {
    if (!gold_ids.count(p.example_id)) throw UnknownPredictionId(p.example_id);
    by_id[p.example_id] = &p.gloss;  // duplicate ids: last record wins
  }

  struct Pool {
    UnitCounts morphemes, words;
    ChrfAccumulator chrf;
    std::size_t n = 0;
    explicit Pool(ChrfParams params) : chrf(params) {}
    MetricReport report() const {
      MetricReport r;
      r.morpheme_accuracy = morphemes.total ? morphemes.fraction() : 0.0;
      r.word_accuracy = words.total ? words.fraction() : 0.0;
      r.chrf = chrf.score();
      r.n_examples = n;
      return r;
    }
  };

  Pool overall(options.chrf);
  std::map<std::string, Pool> per_language;

  static const std::string kEmpty;
  for (const auto& ex : gold) {
    auto it = by_id.find(ex.id);
    const std::string& pred_raw = it == by_id.end() ? kEmpty : *it->second;
    std::string gold_line = strip_eval_punctuation(ex.gloss_text);
    std::string pred_line = strip_eval_punctuation(pred_raw);

    UnitCounts m = morpheme_counts(gold_line, pred_line);
    UnitCounts w = word_counts(gold_line, pred_line);
    if (options.strict_length) {
      std::size_t pred_m = eval_morphemes(pred_line).size();
      std::size_t pred_w = eval_words(pred_line).size();
      if (pred_m != m.total) m.correct = 0;
      if (pred_w != w.total) w.correct = 0;
    }

    auto lang = per_language.try_emplace(ex.glottocode, Pool(options.chrf)).first;
    for (Pool* pool : {&overall, &lang->second}) {
      pool->morphemes += m;
      pool->words += w;
      pool->chrf.add(gold_line, pred_line);
      ++pool->n;
    }
  }

  EvalResult result;
  result.overall = overall.report();
  for (const auto& [code, pool] : per_language) result.per_language[code] = pool.report();
  return result;
}

// Predictions file: one record per line, "example_id<TAB>gloss". Blank
// lines are skipped; a missing tab means an empty prediction.
inline std::vector<Prediction> parse_predictions(std::string_view text) {
  std::vector<Prediction> out;
  for (std::string_view line : detail::split(text, '\n')) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (detail::trim(line).empty()) continue;
    std::size_t tab = line.find('\t');
    Prediction p;
    if (tab == std::string_view::npos) {
      p.example_id = std::string(line);
    } else {
      p.example_id = std::string(line.substr(0, tab));
      p.gloss = std::string(line.substr(tab + 1));
    }
    out.push_back(std::move(p));
  }
  return out;
}

inline std::string format_predictions(const std::vector<Prediction>& predictions) {
  std::string out;
  for (const auto& p : predictions) {
    out += p.example_id;
    out += '\t';
    out += p.gloss;
    out += '\n';
  }
  return out;
}

struct OovReport {
  double pct_oov_words = 0;
  double iv_word_accuracy = 0;
  double oov_word_accuracy = 0;
  double pct_oov_morphemes = 0;
  double oov_token_recall = 0;
};

namespace detail {

inline std::vector<std::string_view> dash_pieces(std::string_view token) {
  std::vector<std::string_view> out;
  for (std::string_view piece : split(token, '-'))
    if (!piece.empty()) out.push_back(piece);
  return out;
}

inline bool contains_ci(std::string_view haystack, std::string_view needle) {
  std::string h = lower_ascii(haystack);
  std::string n = lower_ascii(needle);
  return h.find(n) != std::string::npos;
}

}  // namespace detail

// Vocabulary membership is a joint condition: the transcribed form and its
// gold gloss must co-occur at the same word position somewhere in training.
inline OovReport oov_analysis(const std::vector<IgtExample>& train,
                              const std::vector<IgtExample>& test,
                              const std::vector<Prediction>& predictions) {
  std::unordered_map<std::string, const std::string*> pred_by_id;
  for (const auto& p : predictions) pred_by_id[p.example_id] = &p.gloss;

  std::set<std::pair<std::string, std::string>> word_pairs;
  std::set<std::pair<std::string, std::string>> morpheme_pairs;
  for (const auto& ex : train) {
    auto forms = detail::split_ws(ex.transcription);
    auto glosses = detail::split_ws(ex.gloss_text);
    std::size_t n = std::min(forms.size(), glosses.size());
    for (std::size_t i = 0; i < n; ++i) {
      word_pairs.emplace(std::string(forms[i]), std::string(glosses[i]));
      if (ex.segmented != Segmented::yes) continue;
      auto form_pieces = detail::dash_pieces(forms[i]);
      auto gloss_pieces = detail::dash_pieces(glosses[i]);
      std::size_t m = std::min(form_pieces.size(), gloss_pieces.size());
      for (std::size_t k = 0; k < m; ++k)
        morpheme_pairs.emplace(std::string(form_pieces[k]), std::string(gloss_pieces[k]));
    }
  }

  std::size_t words_total = 0, words_oov = 0;
  std::size_t iv_correct = 0, iv_total = 0, oov_correct = 0, oov_total = 0;
  std::size_t morphemes_total = 0, morphemes_oov = 0;
  std::size_t lexical_total = 0, lexical_recalled = 0;

  for (const auto& ex : test) {
    auto forms = detail::split_ws(ex.transcription);
    auto glosses = detail::split_ws(ex.gloss_text);
    auto pred_it = pred_by_id.find(ex.id);
    std::vector<std::string_view> pred_words =
        pred_it == pred_by_id.end() ? std::vector<std::string_view>{}
                                    : detail::split_ws(*pred_it->second);

    std::size_t n = std::min(forms.size(), glosses.size());
    for (std::size_t i = 0; i < n; ++i) {
      ++words_total;
      bool iv = word_pairs.count({std::string(forms[i]), std::string(glosses[i])}) > 0;
      bool correct = i < pred_words.size() && pred_words[i] == glosses[i];
      if (iv) {
        ++iv_total;
        if (correct) ++iv_correct;
      } else {
        ++words_oov;
        ++oov_total;
        if (correct) ++oov_correct;
      }
      if (ex.segmented == Segmented::yes) {
        auto form_pieces = detail::dash_pieces(forms[i]);
        auto gloss_pieces = detail::dash_pieces(glosses[i]);
        std::size_t m = std::min(form_pieces.size(), gloss_pieces.size());
        for (std::size_t k = 0; k < m; ++k) {
          ++morphemes_total;
          if (!morpheme_pairs.count(
                  {std::string(form_pieces[k]), std::string(gloss_pieces[k])}))
            ++morphemes_oov;
        }
      }
    }

    // Token recall needs a translation to look in; examples without one
    // are excluded from this statistic only.
    if (!ex.translation || detail::trim(*ex.translation).empty()) continue;
    for (std::string_view token : glosses) {
      for (std::string_view morpheme : detail::dash_pieces(token)) {
        for (std::string_view piece : detail::split(morpheme, '=')) {
          for (std::string_view sub : detail::split(piece, '.')) {
            if (sub.empty()) continue;
            if (classify_subgloss(sub) != GlossKind::lexical) continue;
            ++lexical_total;
            if (detail::contains_ci(*ex.translation, sub)) ++lexical_recalled;
          }
        }
      }
    }
  }

  auto pct = [](std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : 100.0 * static_cast<double>(num) / static_cast<double>(den);
  };
  OovReport report;
  report.pct_oov_words = pct(words_oov, words_total);
  report.iv_word_accuracy = pct(iv_correct, iv_total);
  report.oov_word_accuracy = pct(oov_correct, oov_total);
  report.pct_oov_morphemes = pct(morphemes_oov, morphemes_total);
  report.oov_token_recall = pct(lexical_recalled, lexical_total);
  return report;
}

}  // namespace igt
