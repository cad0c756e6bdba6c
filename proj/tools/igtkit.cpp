// igtkit: command-line surface for the interlinear gloss toolkit.
//
// Subcommands compose via files only; every run writes a manifest
// (inputs, outputs, config, checksums, no timestamps) next to its
// primary output so identical inputs yield byte-identical artifacts.
//
// Exit codes: 0 success, 1 operational error, 2 partial success
// (skipped records beyond --skip-threshold), 64 usage error.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "igtkit/core.hpp"
#include "igtkit/eval.hpp"
#include "igtkit/glosser.hpp"
#include "igtkit/ingest.hpp"
#include "igtkit/langid.hpp"
#include "igtkit/manifest.hpp"
#include "igtkit/normalize.hpp"
#include "igtkit/remote.hpp"
#include "igtkit/typology.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitPartial = 2;
constexpr int kExitUsage = 64;

bool g_quiet = false;

void info(const std::string& line) {
  if (!g_quiet) std::cout << line << "\n";
}

std::string fmt(const char* spec, double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, value);
  return buf;
}

void require_file(const std::string& path) {
  if (!std::filesystem::is_regular_file(path))
    throw igt::Error("no such file: " + path);
}

std::string slurp(const std::string& path) {
  require_file(path);
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spew(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw igt::Error("cannot write: " + path);
  out << text;
  if (!out) throw igt::Error("write failed: " + path);
}

// Accumulates one run's manifest; written next to the primary output
// after all outputs exist so their checksums can be recorded.
struct RunRecorder {
  igt::RunManifest manifest;

  explicit RunRecorder(std::string command) { manifest.command = std::move(command); }

  void input(const std::string& path) { manifest.inputs[path] = igt::sha256_file(path); }
  void output(const std::string& path) { manifest.outputs[path] = igt::sha256_file(path); }
  void config(const std::string& key, const std::string& value) { manifest.config[key] = value; }
  void config(const std::string& key, bool value) { manifest.config[key] = value ? "true" : "false"; }
  void config(const std::string& key, double value) { manifest.config[key] = fmt("%g", value); }
  void config(const std::string& key, std::size_t value) { manifest.config[key] = std::to_string(value); }
  void config(const std::string& key, int value) { manifest.config[key] = std::to_string(value); }

  void write(const std::string& path) {
    igt::write_manifest(manifest, path);
    info("manifest: " + path);
  }
  // Manifests live next to the artifact they describe.
  void write_beside(const std::string& output_path) { write(output_path + ".manifest.json"); }
};

igt::Corpus load_corpus(const std::string& path) {
  require_file(path);
  return igt::read_canonical(path);
}

igt::LanguageTable load_language_table(const std::string& path) {
  require_file(path);
  return igt::read_language_table(path);
}

// --- ingest -----------------------------------------------------------

struct IngestArgs {
  std::vector<std::string> inputs;
  std::string output;
  std::string format = "sigmorphon";
  std::string glottocode;
  std::string language_name;
  std::string metalang = "eng";
  std::string source;
  std::string id_prefix;
  std::vector<std::string> langid_seeds;  // lang=path
  std::size_t langid_min_length = 20;
  double skip_threshold = 0.0;
  bool no_nfc = false;
  bool no_spacing = false;
  bool no_detect = false;
  bool no_duplicate = false;
};

std::vector<igt::LangIdProfile> train_seed_profiles(const std::vector<std::string>& seeds) {
  std::map<std::string, std::vector<std::string>> texts;
  for (const auto& seed : seeds) {
    auto eq = seed.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == seed.size())
      throw igt::Error("--langid-seed expects lang=path, got: " + seed);
    texts[seed.substr(0, eq)].push_back(slurp(seed.substr(eq + 1)));
  }
  std::vector<std::pair<std::string, std::vector<std::string>>> samples(texts.begin(), texts.end());
  return igt::train_langid(samples);
}

int run_ingest(const IngestArgs& args) {
  for (const auto& path : args.inputs) require_file(path);

  igt::BuildOptions options;
  options.normalize_unicode = !args.no_nfc;
  options.normalize_spaces = !args.no_spacing;
  options.detect_segmentation = !args.no_detect;
  options.duplicate_unsegmented = !args.no_duplicate;
  options.langid.min_length = args.langid_min_length;
  if (!args.langid_seeds.empty()) options.langid_profiles = train_seed_profiles(args.langid_seeds);

  std::vector<igt::IngestSource> sources;
  for (const auto& path : args.inputs) {
    igt::IngestSource src;
    src.path = path;
    if (args.format == "sigmorphon") {
      src.kind = igt::IngestSource::Kind::sigmorphon;
      std::string stem = std::filesystem::path(path).stem().string();
      src.meta.glottocode = args.glottocode;
      src.meta.language_name = args.language_name;
      src.meta.metalang = args.metalang;
      src.meta.source = args.source.empty() ? stem : args.source;
      src.meta.id_prefix = args.id_prefix.empty() ? src.meta.source + "-" : args.id_prefix;
    } else {
      src.kind = igt::IngestSource::Kind::canonical;
    }
    sources.push_back(std::move(src));
  }

  igt::BuildResult result = igt::build_corpus(sources, options);
  igt::write_canonical(result.corpus, args.output);

  for (const auto& [source, count] : result.corpus.provenance)
    info("source " + source + ": " + std::to_string(count) + " records");
  info("total: " + std::to_string(result.corpus.examples.size()) + " records");
  for (const auto& [old_id, new_id] : result.report.rekeyed)
    info("rekeyed: " + old_id + " -> " + new_id);
  for (const auto& skip : result.report.skipped)
    info("skipped input record " + std::to_string(skip.input_index) +
         (skip.id.empty() ? "" : " (" + skip.id + ")") + ": " + skip.reason);
  info("skipped: " + std::to_string(result.report.skipped.size()) + " records");

  RunRecorder rec("ingest");
  for (const auto& path : args.inputs) rec.input(path);
  rec.output(args.output);
  rec.config("format", args.format);
  rec.config("metalang", args.metalang);
  if (!args.glottocode.empty()) rec.config("glottocode", args.glottocode);
  if (!args.language_name.empty()) rec.config("language_name", args.language_name);
  if (!args.source.empty()) rec.config("source", args.source);
  if (!args.id_prefix.empty()) rec.config("id_prefix", args.id_prefix);
  rec.config("normalize_unicode", options.normalize_unicode);
  rec.config("normalize_spaces", options.normalize_spaces);
  rec.config("detect_segmentation", options.detect_segmentation);
  rec.config("duplicate_unsegmented", options.duplicate_unsegmented);
  rec.config("skip_threshold", args.skip_threshold);
  if (!args.langid_seeds.empty()) {
    rec.config("langid_min_length", args.langid_min_length);
    rec.config("langid_seeds", std::to_string(args.langid_seeds.size()));
  }
  rec.write_beside(args.output);

  std::size_t attempted = result.corpus.examples.size() + result.report.skipped.size();
  double skipped_fraction =
      attempted == 0 ? 0.0 : static_cast<double>(result.report.skipped.size()) / attempted;
  return skipped_fraction > args.skip_threshold && !result.report.skipped.empty() ? kExitPartial
                                                                                  : kExitOk;
}

// --- stats ------------------------------------------------------------

struct StatsArgs {
  std::string corpus;
  std::string languages;
  std::string output;
};

int run_stats(const StatsArgs& args) {
  igt::Corpus corpus = load_corpus(args.corpus);
  igt::LanguageTable table;
  if (!args.languages.empty()) table = load_language_table(args.languages);
  igt::CorpusStats stats = igt::corpus_stats(corpus, table);

  std::ostringstream out;
  out << "total\t" << stats.total << "\n";
  out << "segmented\t" << stats.segmented << "\n";
  out << "derived_unsegmented\t" << stats.derived_unsegmented << "\n";
  out << "with_translation\t" << stats.with_translation << "\n";
  out << "languages\t" << stats.language_count << "\n";
  out << "p25_per_language\t" << fmt("%g", stats.p25_per_language) << "\n";
  out << "p50_per_language\t" << fmt("%g", stats.p50_per_language) << "\n";
  out << "p75_per_language\t" << fmt("%g", stats.p75_per_language) << "\n";
  for (const auto& [code, count] : stats.per_language)
    out << "language\t" << code << "\t" << count << "\n";
  for (const auto& [family, count] : stats.per_family)
    out << "family\t" << family << "\t" << count << "\n";

  if (args.output.empty()) {
    std::cout << out.str();
    return kExitOk;
  }
  spew(args.output, out.str());
  info("stats: " + args.output);

  RunRecorder rec("stats");
  rec.input(args.corpus);
  if (!args.languages.empty()) rec.input(args.languages);
  rec.output(args.output);
  rec.write_beside(args.output);
  return kExitOk;
}

// --- gloss-dist -------------------------------------------------------

struct GlossDistArgs {
  std::string corpus;
  std::string output;
  std::size_t k = 200;
};

int run_gloss_dist(const GlossDistArgs& args) {
  igt::Corpus corpus = load_corpus(args.corpus);
  igt::InventoryResult inv = igt::extract_inventory(corpus.examples);
  igt::CoverageReport report = igt::coverage_report(inv.inventory, args.k);

  std::ostringstream out;
  out << "unique\t" << report.unique_count << "\n";
  out << "total\t" << inv.inventory.total << "\n";
  out << "k\t" << args.k << "\n";
  out << "coverage_pct\t" << fmt("%.1f", report.topk_fraction * 100.0) << "\n";
  out << "label\tcount\n";
  for (const auto& [label, count] : report.ranked) out << label << "\t" << count << "\n";

  info("unique grammatical glosses: " + std::to_string(report.unique_count));
  info("top-" + std::to_string(args.k) +
       " coverage: " + fmt("%.1f", report.topk_fraction * 100.0) + "%");
  if (!inv.skipped.empty())
    info("skipped " + std::to_string(inv.skipped.size()) + " unparsable gloss lines");

  if (args.output.empty()) {
    std::cout << out.str();
    return kExitOk;
  }
  spew(args.output, out.str());

  RunRecorder rec("gloss-dist");
  rec.input(args.corpus);
  rec.output(args.output);
  rec.config("k", args.k);
  rec.write_beside(args.output);
  return kExitOk;
}

// --- normalize --------------------------------------------------------

struct NormalizeArgs {
  std::string corpus;
  std::string map;
  std::string output;
};

int run_normalize(const NormalizeArgs& args) {
  igt::Corpus corpus = load_corpus(args.corpus);
  require_file(args.map);
  igt::NormalizationMap map = igt::load_map(args.map);

  std::size_t changed = 0;
  igt::Corpus mapped;
  mapped.examples.reserve(corpus.examples.size());
  for (const auto& ex : corpus.examples) {
    igt::IgtExample out = igt::apply_map(ex, map);
    if (out.gloss_text != ex.gloss_text) ++changed;
    mapped.examples.push_back(std::move(out));
  }
  mapped.index = corpus.index;
  mapped.provenance = corpus.provenance;
  igt::write_canonical(mapped, args.output);
  info("normalized " + std::to_string(mapped.examples.size()) + " examples (" +
       std::to_string(changed) + " changed)");

  RunRecorder rec("normalize");
  rec.input(args.corpus);
  rec.input(args.map);
  rec.output(args.output);
  rec.config("map_entries", map.entries.size());
  rec.write_beside(args.output);
  return kExitOk;
}

// --- train ------------------------------------------------------------

struct TrainArgs {
  std::string corpus;
  std::string lexicon;
  std::string level = "morpheme";
  std::string language;
};

std::vector<igt::IgtExample> filter_language(std::vector<igt::IgtExample> examples,
                                                const std::string& glottocode) {
  if (glottocode.empty()) return examples;
  std::vector<igt::IgtExample> out;
  for (auto& ex : examples)
    if (ex.glottocode == glottocode) out.push_back(std::move(ex));
  return out;
}

std::vector<igt::IgtExample> filter_segmented(std::vector<igt::IgtExample> examples,
                                              const std::string& state) {
  if (state == "any") return examples;
  auto want = igt::segmented_from_string(state);
  if (!want) throw igt::Error("unknown segmentation filter: " + state);
  std::vector<igt::IgtExample> out;
  for (auto& ex : examples)
    if (ex.segmented == *want) out.push_back(std::move(ex));
  return out;
}

int run_train(const TrainArgs& args) {
  igt::Corpus corpus = load_corpus(args.corpus);
  igt::LexiconLevel level = igt::lexicon_level_from_string(args.level);

  std::vector<igt::IgtExample> examples =
      filter_language(std::move(corpus.examples), args.language);
  igt::GlossLexicon lexicon = igt::train_top_choice(examples, level);
  igt::save_lexicon(lexicon, args.lexicon);
  info("trained " + std::to_string(lexicon.counts.size()) + " forms (skipped " +
       std::to_string(lexicon.skipped_examples) + " examples)");

  RunRecorder rec("train");
  rec.input(args.corpus);
  rec.output(args.lexicon);
  rec.config("level", args.level);
  if (!args.language.empty()) rec.config("language", args.language);
  rec.write_beside(args.lexicon);
  return kExitOk;
}

// --- predict ----------------------------------------------------------

struct PredictArgs {
  std::string lexicon;
  std::string corpus;
  std::string output;
  std::string language;
  std::string segmented = "any";
};

int run_predict(const PredictArgs& args) {
  require_file(args.lexicon);
  igt::GlossLexicon lexicon = igt::load_lexicon(args.lexicon);
  igt::Corpus corpus = load_corpus(args.corpus);
  std::vector<igt::IgtExample> examples = filter_segmented(
      filter_language(std::move(corpus.examples), args.language), args.segmented);

  std::vector<igt::Prediction> predictions;
  predictions.reserve(examples.size());
  for (const auto& ex : examples)
    predictions.push_back({ex.id, igt::predict_top_choice(lexicon, ex)});
  spew(args.output, igt::format_predictions(predictions));
  info("predicted " + std::to_string(predictions.size()) + " examples");

  RunRecorder rec("predict");
  rec.input(args.lexicon);
  rec.input(args.corpus);
  rec.output(args.output);
  if (!args.language.empty()) rec.config("language", args.language);
  rec.config("segmented", args.segmented);
  rec.write_beside(args.output);
  return kExitOk;
}

// --- eval -------------------------------------------------------------

struct EvalArgs {
  std::string gold;
  std::string pred;
  std::string output;
  std::string oov_train;
  std::string language;
  std::string segmented = "any";
  bool strict_length = false;
};

std::string format_metric_row(const std::string& scope, const igt::MetricReport& r) {
  std::ostringstream row;
  row << scope << "\t" << r.n_examples << "\t" << fmt("%.4f", r.morpheme_accuracy) << "\t"
      << fmt("%.4f", r.word_accuracy) << "\t" << fmt("%.2f", r.chrf) << "\n";
  return row.str();
}

int run_eval(const EvalArgs& args) {
  igt::Corpus gold = load_corpus(args.gold);
  std::vector<igt::IgtExample> examples = filter_segmented(
      filter_language(std::move(gold.examples), args.language), args.segmented);
  require_file(args.pred);
  std::vector<igt::Prediction> predictions = igt::parse_predictions(slurp(args.pred));

  igt::EvalOptions options;
  options.strict_length = args.strict_length;
  igt::EvalResult result = igt::evaluate(examples, predictions, options);

  std::ostringstream out;
  out << "scope\tn\tmorpheme_acc\tword_acc\tchrf\n";
  out << format_metric_row("overall", result.overall);
  for (const auto& [code, report] : result.per_language)
    out << format_metric_row(code, report);

  if (!args.oov_train.empty()) {
    igt::Corpus train = load_corpus(args.oov_train);
    igt::OovReport oov = igt::oov_analysis(train.examples, examples, predictions);
    out << "oov_pct_words\t" << fmt("%.2f", oov.pct_oov_words) << "\n";
    out << "oov_pct_morphemes\t" << fmt("%.2f", oov.pct_oov_morphemes) << "\n";
    out << "iv_word_accuracy\t" << fmt("%.2f", oov.iv_word_accuracy) << "\n";
    out << "oov_word_accuracy\t" << fmt("%.2f", oov.oov_word_accuracy) << "\n";
    out << "oov_token_recall\t" << fmt("%.2f", oov.oov_token_recall) << "\n";
  }

  std::cout << out.str();
  if (!args.output.empty()) {
    spew(args.output, out.str());
    RunRecorder rec("eval");
    rec.input(args.gold);
    rec.input(args.pred);
    if (!args.oov_train.empty()) rec.input(args.oov_train);
    rec.output(args.output);
    rec.config("strict_length", args.strict_length);
    rec.config("segmented", args.segmented);
    rec.write_beside(args.output);
  }
  return kExitOk;
}

// --- export-prompts ---------------------------------------------------

struct ExportPromptsArgs {
  std::string corpus;
  std::string output;
  std::string languages;
  bool raw_target = false;
};

int run_export_prompts(const ExportPromptsArgs& args) {
  igt::Corpus corpus = load_corpus(args.corpus);
  igt::PromptOptions options;
  options.normalize_target_spacing = !args.raw_target;
  if (!args.languages.empty()) {
    igt::LanguageTable table = load_language_table(args.languages);
    options.language_names = table.names;
  }
  std::vector<igt::PromptRecord> records = igt::export_prompts(corpus.examples, options);
  spew(args.output, igt::format_prompts(records));
  info("exported " + std::to_string(records.size()) + " prompts");

  RunRecorder rec("export-prompts");
  rec.input(args.corpus);
  if (!args.languages.empty()) rec.input(args.languages);
  rec.output(args.output);
  rec.config("raw_target", args.raw_target);
  rec.write_beside(args.output);
  return kExitOk;
}

// --- remote-predict ---------------------------------------------------

struct RemotePredictArgs {
  std::string prompts;
  std::string output;
  igt::RemoteConfig remote;
};

int run_remote_predict(const RemotePredictArgs& args) {
  std::vector<igt::PromptRecord> records = igt::parse_prompts(slurp(args.prompts));
  igt::RemoteConfig config = args.remote;
  if (const char* token = std::getenv("IGTKIT_AUTH_TOKEN")) config.auth_token = token;

  std::vector<igt::Prediction> predictions = igt::remote_predict(config, records);
  spew(args.output, igt::format_predictions(predictions));
  info("received " + std::to_string(predictions.size()) + " predictions");

  RunRecorder rec("remote-predict");
  rec.input(args.prompts);
  rec.output(args.output);
  rec.config("endpoint", config.endpoint);
  rec.config("timeout_seconds", config.timeout_seconds);
  rec.config("retries", config.retries);
  rec.config("max_new_tokens", config.max_new_tokens);
  rec.config("max_in_flight", config.max_in_flight);
  rec.config("backoff_ms", config.backoff_ms);
  rec.write_beside(args.output);
  return kExitOk;
}

// --- typology ---------------------------------------------------------

struct TypologyArgs {
  std::string values;
  std::string multistate;
  std::string weights;
  std::string corpus;
  std::string dialects;
  std::string out_dir;
  std::string scheme = "onehot";
  std::string impute = "knn";
  std::size_t knn_k = 5;
  double lang_missing_max = 0.36;
  double feat_missing_max = 0.36;
  double min_coverage = 0.64;
  std::size_t top_n = 5;
};

std::map<std::string, double> load_weights(const TypologyArgs& args) {
  std::map<std::string, double> weights;
  if (!args.weights.empty()) {
    std::string text = slurp(args.weights);
    std::size_t line_no = 0;
    for (std::string_view line : igt::detail::split(text, '\n')) {
      ++line_no;
      line = igt::detail::trim(line);
      if (line.empty() || line.front() == '#') continue;
      auto fields = igt::detail::split(line, '\t');
      if (fields.size() != 2)
        throw igt::Error("weights line " + std::to_string(line_no) +
                            ": expected language<TAB>weight");
      try {
        weights[std::string(igt::detail::trim(fields[0]))] =
            std::stod(std::string(fields[1]));
      } catch (const std::exception&) {
        throw igt::Error("weights line " + std::to_string(line_no) + ": bad number");
      }
    }
  } else {
    igt::Corpus corpus = load_corpus(args.corpus);
    for (const auto& [code, ids] : corpus.index)
      if (code != "unknown") weights[code] = static_cast<double>(ids.size());
  }
  if (weights.empty()) throw igt::Error("no language weights found");
  return weights;
}

std::map<std::string, std::string> load_dialects(const std::string& path) {
  std::map<std::string, std::string> dialect_of;
  std::string text = slurp(path);
  std::size_t line_no = 0;
  for (std::string_view line : igt::detail::split(text, '\n')) {
    ++line_no;
    line = igt::detail::trim(line);
    if (line.empty() || line.front() == '#') continue;
    auto fields = igt::detail::split(line, '\t');
    if (fields.size() != 2)
      throw igt::Error("dialects line " + std::to_string(line_no) +
                          ": expected dialect<TAB>parent");
    dialect_of[std::string(igt::detail::trim(fields[0]))] =
        std::string(igt::detail::trim(fields[1]));
  }
  return dialect_of;
}

int run_typology(const TypologyArgs& args) {
  require_file(args.values);
  if (args.weights.empty() == args.corpus.empty())
    throw igt::Error("typology needs exactly one of --weights or --corpus");

  igt::PrepareOptions prepare;
  prepare.lang_missing_max = args.lang_missing_max;
  prepare.feat_missing_max = args.feat_missing_max;
  if (args.scheme == "onehot") {
    prepare.scheme = igt::BinarizeScheme::onehot;
  } else if (args.scheme == "paired") {
    prepare.scheme = igt::BinarizeScheme::paired;
  } else {
    throw igt::Error("unknown binarize scheme: " + args.scheme);
  }
  if (!args.multistate.empty()) {
    require_file(args.multistate);
    prepare.multistate_features = igt::read_feature_list(args.multistate);
  }
  if (!args.dialects.empty()) prepare.dialect_of = load_dialects(args.dialects);

  igt::ImputeOptions impute;
  if (args.impute == "mode") {
    impute.strategy = igt::ImputeOptions::Strategy::mode;
  } else if (args.impute == "knn") {
    impute.strategy = igt::ImputeOptions::Strategy::knn;
  } else {
    throw igt::Error("unknown impute strategy: " + args.impute);
  }
  impute.k = args.knn_k;

  std::map<std::string, double> weights = load_weights(args);

  igt::FeatureMatrix matrix =
      igt::prepare_matrix(igt::to_matrix(igt::read_feature_values(args.values)), prepare);
  igt::WeightCoverage coverage = igt::weight_coverage(matrix, weights);
  matrix = igt::filter_features_by_coverage(matrix, weights, args.min_coverage);
  igt::FeatureMatrix imputed = igt::impute(matrix, impute);

  igt::WeightedVector dataset = igt::weighted_average(imputed, weights);
  igt::WeightedVector global = igt::global_average(imputed);
  double similarity = igt::cosine(dataset, global);
  std::vector<igt::FeatureGap> gaps = igt::underrepresented(dataset, global, args.top_n);

  std::filesystem::create_directories(args.out_dir);
  auto out_path = [&](const char* name) {
    return (std::filesystem::path(args.out_dir) / name).string();
  };
  spew(out_path("dataset_vector.tsv"), igt::format_weighted_vector(dataset));
  spew(out_path("global_vector.tsv"), igt::format_weighted_vector(global));
  spew(out_path("gaps.tsv"), igt::format_feature_gaps(gaps));

  double total_weight = coverage.covered_weight + coverage.excluded_weight;
  double excluded_fraction = total_weight == 0 ? 0.0 : coverage.excluded_weight / total_weight;
  std::ostringstream summary;
  summary << "cosine\t" << fmt("%.4f", similarity) << "\n";
  summary << "languages\t" << imputed.languages.size() << "\n";
  summary << "features\t" << imputed.features.size() << "\n";
  summary << "imputed_fraction\t" << fmt("%.4f", imputed.imputed_fraction) << "\n";
  summary << "excluded_weight_fraction\t" << fmt("%.4f", excluded_fraction) << "\n";
  spew(out_path("summary.tsv"), summary.str());

  info("cosine similarity: " + fmt("%.4f", similarity));
  info("languages: " + std::to_string(imputed.languages.size()) +
       ", binary features: " + std::to_string(imputed.features.size()));
  info("imputed fraction: " + fmt("%.4f", imputed.imputed_fraction));
  info("weight excluded (no typology row): " + fmt("%.4f", excluded_fraction));
  for (const auto& gap : gaps)
    info("gap " + gap.feature + ": dataset " + fmt("%.4f", gap.dataset_value) + " vs global " +
         fmt("%.4f", gap.global_value));

  RunRecorder rec("typology");
  rec.input(args.values);
  if (!args.multistate.empty()) rec.input(args.multistate);
  if (!args.weights.empty()) rec.input(args.weights);
  if (!args.corpus.empty()) rec.input(args.corpus);
  if (!args.dialects.empty()) rec.input(args.dialects);
  rec.output(out_path("dataset_vector.tsv"));
  rec.output(out_path("global_vector.tsv"));
  rec.output(out_path("gaps.tsv"));
  rec.output(out_path("summary.tsv"));
  rec.config("scheme", args.scheme);
  rec.config("impute", args.impute);
  rec.config("knn_k", args.knn_k);
  rec.config("lang_missing_max", args.lang_missing_max);
  rec.config("feat_missing_max", args.feat_missing_max);
  rec.config("min_coverage", args.min_coverage);
  rec.config("top_n", args.top_n);
  rec.write(out_path("manifest.json"));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"interlinear gloss corpus toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value file; command-line flags take precedence");
  app.add_flag("--quiet,-q", g_quiet, "suppress progress output");
  int seed = 0;
  app.add_option("--seed", seed, "seed for any sampling (recorded in manifests)");

  IngestArgs ingest;
  auto* cmd_ingest = app.add_subcommand("ingest", "build a canonical corpus from source files");
  cmd_ingest->add_option("--input,-i,input", ingest.inputs, "source files")->required();
  cmd_ingest->add_option("--output,-o", ingest.output, "canonical corpus output")->required();
  cmd_ingest->add_option("--format,-f", ingest.format, "input format")
      ->check(CLI::IsMember({"sigmorphon", "canonical"}))
      ->capture_default_str();
  cmd_ingest->add_option("--glottocode", ingest.glottocode, "glottocode for all records");
  cmd_ingest->add_option("--language", ingest.language_name, "language display name");
  cmd_ingest->add_option("--metalang", ingest.metalang, "metalanguage code")
      ->capture_default_str();
  cmd_ingest->add_option("--source", ingest.source, "source label (default: file stem)");
  cmd_ingest->add_option("--id-prefix", ingest.id_prefix, "record id prefix (default: source-)");
  cmd_ingest->add_option("--langid-seed", ingest.langid_seeds,
                         "lang=path seed text for translation verification (repeatable)");
  cmd_ingest->add_option("--langid-min-length", ingest.langid_min_length,
                         "min codepoints before language id applies")
      ->capture_default_str();
  cmd_ingest->add_option("--skip-threshold", ingest.skip_threshold,
                         "max tolerated skipped-record fraction before exit 2")
      ->capture_default_str();
  cmd_ingest->add_flag("--no-nfc", ingest.no_nfc, "skip unicode NFC normalization");
  cmd_ingest->add_flag("--no-spacing", ingest.no_spacing, "skip punctuation spacing");
  cmd_ingest->add_flag("--no-detect", ingest.no_detect, "skip segmentation detection");
  cmd_ingest->add_flag("--no-duplicate", ingest.no_duplicate,
                       "skip unsegmented sibling duplication");

  StatsArgs stats;
  auto* cmd_stats = app.add_subcommand("stats", "corpus composition summary");
  cmd_stats->add_option("--corpus,-c", stats.corpus, "canonical corpus")->required();
  cmd_stats->add_option("--languages", stats.languages, "language table TSV");
  cmd_stats->add_option("--output,-o", stats.output, "stats TSV (default: stdout)");

  GlossDistArgs gloss_dist;
  auto* cmd_gloss_dist =
      app.add_subcommand("gloss-dist", "grammatical gloss inventory and coverage");
  cmd_gloss_dist->add_option("--corpus,-c", gloss_dist.corpus, "canonical corpus")->required();
  cmd_gloss_dist->add_option("--output,-o", gloss_dist.output, "report TSV (default: stdout)");
  cmd_gloss_dist->add_option("-k", gloss_dist.k, "top-k for coverage")->capture_default_str();

  NormalizeArgs normalize;
  auto* cmd_normalize = app.add_subcommand("normalize", "rewrite gloss labels via a mapping");
  cmd_normalize->add_option("--corpus,-c", normalize.corpus, "canonical corpus")->required();
  cmd_normalize->add_option("--map,-m", normalize.map, "label mapping TSV")->required();
  cmd_normalize->add_option("--output,-o", normalize.output, "normalized corpus")->required();

  TrainArgs train;
  auto* cmd_train = app.add_subcommand("train", "train the most-frequent-gloss baseline");
  cmd_train->add_option("--corpus,-c", train.corpus, "training corpus")->required();
  cmd_train->add_option("--lexicon,-o", train.lexicon, "lexicon output")->required();
  cmd_train->add_option("--level", train.level, "lexicon unit")
      ->check(CLI::IsMember({"morpheme", "word"}))
      ->capture_default_str();
  cmd_train->add_option("--language", train.language, "restrict to one glottocode");

  PredictArgs predict;
  auto* cmd_predict = app.add_subcommand("predict", "gloss a corpus with a trained lexicon");
  cmd_predict->add_option("--lexicon,-l", predict.lexicon, "trained lexicon")->required();
  cmd_predict->add_option("--corpus,-c", predict.corpus, "corpus to gloss")->required();
  cmd_predict->add_option("--output,-o", predict.output, "predictions TSV")->required();
  cmd_predict->add_option("--language", predict.language, "restrict to one glottocode");
  cmd_predict->add_option("--segmented", predict.segmented, "filter by segmentation state")
      ->check(CLI::IsMember({"yes", "no", "unknown", "any"}))
      ->capture_default_str();

  EvalArgs eval;
  auto* cmd_eval = app.add_subcommand("eval", "score predictions against gold glosses");
  cmd_eval->add_option("--gold,-g", eval.gold, "gold canonical corpus")->required();
  cmd_eval->add_option("--pred,-p", eval.pred, "predictions TSV")->required();
  cmd_eval->add_option("--output,-o", eval.output, "report TSV (default: stdout only)");
  cmd_eval->add_option("--oov-train", eval.oov_train, "training corpus for OOV analysis");
  cmd_eval->add_option("--language", eval.language, "restrict to one glottocode");
  cmd_eval->add_option("--segmented", eval.segmented, "filter by segmentation state")
      ->check(CLI::IsMember({"yes", "no", "unknown", "any"}))
      ->capture_default_str();
  cmd_eval->add_flag("--strict-length", eval.strict_length,
                     "zero credit when predicted unit count mismatches gold");

  ExportPromptsArgs export_prompts;
  auto* cmd_export =
      app.add_subcommand("export-prompts", "emit instruction prompts for a remote glosser");
  cmd_export->add_option("--corpus,-c", export_prompts.corpus, "canonical corpus")->required();
  cmd_export->add_option("--output,-o", export_prompts.output, "prompts JSONL")->required();
  cmd_export->add_option("--languages", export_prompts.languages,
                         "language table TSV for display names");
  cmd_export->add_flag("--raw-target", export_prompts.raw_target,
                       "keep gold gloss spacing untouched in targets");

  RemotePredictArgs remote;
  auto* cmd_remote =
      app.add_subcommand("remote-predict", "gloss prompts against a generation endpoint");
  cmd_remote->add_option("--prompts,-p", remote.prompts, "prompts JSONL")->required();
  cmd_remote->add_option("--endpoint,-e", remote.remote.endpoint, "generation URL")->required();
  cmd_remote->add_option("--output,-o", remote.output, "predictions TSV")->required();
  cmd_remote->add_option("--timeout", remote.remote.timeout_seconds, "per-request seconds")
      ->capture_default_str();
  cmd_remote->add_option("--retries", remote.remote.retries, "retries after first attempt")
      ->capture_default_str();
  cmd_remote->add_option("--max-new-tokens", remote.remote.max_new_tokens, "generation budget")
      ->capture_default_str();
  cmd_remote->add_option("--max-in-flight", remote.remote.max_in_flight, "parallel requests")
      ->capture_default_str();
  cmd_remote->add_option("--backoff-ms", remote.remote.backoff_ms, "initial retry backoff")
      ->capture_default_str();

  TypologyArgs typology;
  auto* cmd_typology =
      app.add_subcommand("typology", "corpus-weighted typological feature comparison");
  cmd_typology->add_option("--values", typology.values, "feature value table (CSV/TSV)")
      ->required();
  cmd_typology->add_option("--out-dir,-o", typology.out_dir, "output directory")->required();
  cmd_typology->add_option("--multistate", typology.multistate, "multistate feature list");
  cmd_typology->add_option("--weights", typology.weights, "language<TAB>weight TSV");
  cmd_typology->add_option("--corpus", typology.corpus,
                           "canonical corpus (weights from per-language counts)");
  cmd_typology->add_option("--dialects", typology.dialects, "dialect<TAB>parent TSV");
  cmd_typology->add_option("--scheme", typology.scheme, "multistate binarization")
      ->check(CLI::IsMember({"onehot", "paired"}))
      ->capture_default_str();
  cmd_typology->add_option("--impute", typology.impute, "imputation strategy")
      ->check(CLI::IsMember({"mode", "knn"}))
      ->capture_default_str();
  cmd_typology->add_option("--knn-k", typology.knn_k, "neighbours for knn imputation")
      ->capture_default_str();
  cmd_typology->add_option("--lang-missing-max", typology.lang_missing_max,
                           "drop languages missing more than this fraction")
      ->capture_default_str();
  cmd_typology->add_option("--feat-missing-max", typology.feat_missing_max,
                           "drop features missing more than this fraction")
      ->capture_default_str();
  cmd_typology->add_option("--min-coverage", typology.min_coverage,
                           "drop features observed for less than this weight fraction")
      ->capture_default_str();
  cmd_typology->add_option("--top-n", typology.top_n, "underrepresented features to report")
      ->capture_default_str();

  for (auto* sub : app.get_subcommands(nullptr)) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "igtkit: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (cmd_ingest->parsed()) return run_ingest(ingest);
    if (cmd_stats->parsed()) return run_stats(stats);
    if (cmd_gloss_dist->parsed()) return run_gloss_dist(gloss_dist);
    if (cmd_normalize->parsed()) return run_normalize(normalize);
    if (cmd_train->parsed()) return run_train(train);
    if (cmd_predict->parsed()) return run_predict(predict);
    if (cmd_eval->parsed()) return run_eval(eval);
    if (cmd_export->parsed()) return run_export_prompts(export_prompts);
    if (cmd_remote->parsed()) return run_remote_predict(remote);
    if (cmd_typology->parsed()) return run_typology(typology);
  } catch (const igt::Error& e) {
    std::cerr << "igtkit: " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "igtkit: " << e.what() << "\n";
    return kExitError;
  }
  return kExitUsage;
}
