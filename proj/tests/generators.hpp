#pragma once

// Random-structure generators shared by the property and acceptance suites.

#include <random>
#include <string>

#include "igtkit/core.hpp"

namespace igttest {

inline std::string random_subgloss(std::mt19937& rng) {
  static const std::string alphabet =
      "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789'";
  std::uniform_int_distribution<std::size_t> len(1, 6);
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::string out;
  std::size_t n = len(rng);
  for (std::size_t i = 0; i < n; ++i) out += alphabet[pick(rng)];
  return out;
}

inline igt::GlossLine random_gloss_line(std::mt19937& rng,
                                        const igt::ParserOptions& opts = {}) {
  std::uniform_int_distribution<std::size_t> n_words(1, 5);
  std::uniform_int_distribution<std::size_t> n_morphemes(1, 4);
  std::uniform_int_distribution<std::size_t> n_subglosses(1, 3);
  std::uniform_int_distribution<int> sep_pick(0, 1);

  igt::GlossLine line;
  std::size_t words = n_words(rng);
  for (std::size_t w = 0; w < words; ++w) {
    igt::GlossWord word;
    std::size_t morphemes = n_morphemes(rng);
    for (std::size_t m = 0; m < morphemes; ++m) {
      igt::MorphemeGloss morpheme;
      std::size_t subs = n_subglosses(rng);
      for (std::size_t s = 0; s < subs; ++s) {
        std::string text = random_subgloss(rng);
        morpheme.subglosses.push_back({text, igt::classify_subgloss(text)});
      }
      if (m > 0)
        word.separators += opts.clitic_boundaries && sep_pick(rng) ? '=' : '-';
      word.morphemes.push_back(std::move(morpheme));
    }
    line.words.push_back(std::move(word));
  }
  return line;
}

inline igt::IgtExample random_igt_example(std::mt19937& rng, std::string id) {
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_int_distribution<int> lang_pick(0, 3);
  static const char* kGlottocodes[] = {"arap1274", "uspa1245", "gitx1241", ""};

  igt::IgtExample ex;
  ex.id = std::move(id);
  ex.glottocode = kGlottocodes[lang_pick(rng)];
  ex.language_name = "Testlang";
  ex.metalang = "eng";
  ex.source = coin(rng) ? "alpha" : "beta";

  igt::GlossLine gloss = random_gloss_line(rng);
  ex.gloss_text = igt::serialize(gloss);

  bool segmented = coin(rng) == 1;
  std::string transcription;
  for (std::size_t w = 0; w < gloss.words.size(); ++w) {
    if (w) transcription += ' ';
    const auto& word = gloss.words[w];
    for (std::size_t m = 0; m < word.morphemes.size(); ++m) {
      if (m && segmented) transcription += word.separators[m - 1];
      transcription += random_subgloss(rng);
    }
  }
  ex.transcription = transcription;
  ex.segmented = segmented ? igt::Segmented::yes : igt::Segmented::no;
  if (coin(rng)) ex.translation = "they said " + random_subgloss(rng) + " quietly";
  return ex;
}

}  // namespace igttest
