#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "doctest.h"
#include "httplib.h"
#include "igtkit/glosser.hpp"
#include "igtkit/ingest.hpp"
#include "igtkit/manifest.hpp"
#include "json.hpp"

using namespace igt;
namespace fs = std::filesystem;

namespace {

const std::string kCli = IGTKIT_CLI_PATH;
const std::string kData = IGTKIT_TEST_DATA_DIR;
const std::string kShipped = IGTKIT_DATA_DIR;

fs::path fresh_dir(const std::string& name) {
  fs::path dir =
      fs::temp_directory_path() / ("igtkit-cli-" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spew(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  REQUIRE(out.good());
}

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

RunResult run_cli(const std::string& args, const fs::path& dir) {
  fs::path out_file = dir / "stdout.txt";
  fs::path err_file = dir / "stderr.txt";
  std::string cmd = kCli + " " + args + " >" + out_file.string() + " 2>" + err_file.string();
  int status = std::system(cmd.c_str());
  RunResult result;
  REQUIRE(WIFEXITED(status));
  result.code = WEXITSTATUS(status);
  result.out = slurp(out_file);
  result.err = slurp(err_file);
  return result;
}

std::string sigmorphon_fixture() { return kData + "/sigmorphon_sample.txt"; }

// Ingests the bundled three-record file; five canonical examples.
fs::path ingest_fixture(const fs::path& dir) {
  fs::path corpus = dir / "corpus.jsonl";
  RunResult r = run_cli("ingest -i " + sigmorphon_fixture() + " -o " + corpus.string() +
                            " --glottocode arap1274 --language Arapaho --source st2023",
                        dir);
  REQUIRE(r.code == 0);
  return corpus;
}

IgtExample make_example(const std::string& id, const std::string& transcription,
                        const std::string& gloss) {
  IgtExample ex;
  ex.id = id;
  ex.glottocode = "arap1274";
  ex.language_name = "Arapaho";
  ex.metalang = "eng";
  ex.source = "fixture";
  ex.transcription = transcription;
  ex.segmented = Segmented::yes;
  ex.gloss_text = gloss;
  return ex;
}

}  // namespace

TEST_CASE("usage errors exit 64") {
  fs::path dir = fresh_dir("usage");
  CHECK(run_cli("", dir).code == 64);
  CHECK(run_cli("frobnicate", dir).code == 64);
  CHECK(run_cli("ingest -i in.txt -o out.jsonl --format jpeg", dir).code == 64);
  CHECK(run_cli("ingest", dir).code == 64);  // missing required options
  CHECK(run_cli("--help", dir).code == 0);
}

TEST_CASE("missing input file exits 1") {
  fs::path dir = fresh_dir("missing");
  RunResult r = run_cli("ingest -i " + (dir / "nope.txt").string() + " -o " +
                            (dir / "out.jsonl").string(),
                        dir);
  CHECK(r.code == 1);
  CHECK(r.err.find("no such file") != std::string::npos);
  CHECK(run_cli("stats -c " + (dir / "nope.jsonl").string(), dir).code == 1);
}

TEST_CASE("ingest writes corpus plus manifest and reruns byte-identically") {
  fs::path dir = fresh_dir("ingest");
  fs::path corpus = dir / "corpus.jsonl";
  std::string args = "ingest -i " + sigmorphon_fixture() + " -o " + corpus.string() +
                     " --glottocode arap1274 --language Arapaho --source st2023";

  RunResult first = run_cli(args, dir);
  REQUIRE(first.code == 0);
  CHECK(first.out.find("source st2023: 5 records") != std::string::npos);
  CHECK(first.out.find("skipped: 0 records") != std::string::npos);

  std::string corpus_bytes = slurp(corpus);
  fs::path manifest_path = dir / "corpus.jsonl.manifest.json";
  std::string manifest_bytes = slurp(manifest_path);

  Corpus parsed = read_canonical(corpus.string());
  CHECK(parsed.examples.size() == 5);
  CHECK(parsed.examples[0].id == "st2023-1");
  CHECK(parsed.examples[1].id == "st2023-1-unseg");

  auto manifest = nlohmann::json::parse(manifest_bytes);
  CHECK(manifest["command"] == "ingest");
  CHECK(manifest["tool"] == "igtkit");
  CHECK(manifest["outputs"][corpus.string()] == sha256_hex(corpus_bytes));
  CHECK(manifest["inputs"].size() == 1);
  CHECK(manifest["config"]["format"] == "sigmorphon");
  CHECK(manifest_bytes.find("time") == std::string::npos);

  RunResult second = run_cli(args, dir);
  REQUIRE(second.code == 0);
  CHECK(slurp(corpus) == corpus_bytes);
  CHECK(slurp(manifest_path) == manifest_bytes);
}

TEST_CASE("ingest accepts canonical input without re-deriving siblings") {
  fs::path dir = fresh_dir("reingest");
  fs::path corpus = ingest_fixture(dir);
  fs::path again = dir / "again.jsonl";
  RunResult r = run_cli("ingest -i " + corpus.string() + " -o " + again.string() +
                            " --format canonical",
                        dir);
  REQUIRE(r.code == 0);
  CHECK(slurp(again) == slurp(corpus));
}

TEST_CASE("gloss-dist at k=1 is deterministic on a two-label fixture") {
  fs::path dir = fresh_dir("glossdist");
  fs::path corpus = dir / "two_label.jsonl";
  Corpus fixture;
  fixture.examples = {make_example("t1", "wan-ki ran-ta wok-ki", "dog-PL run-SG walk-PL")};
  write_canonical(fixture, corpus.string());

  std::string args = "gloss-dist -c " + corpus.string() + " -k 1";
  RunResult first = run_cli(args, dir);
  REQUIRE(first.code == 0);
  CHECK(first.out.find("unique\t2") != std::string::npos);
  CHECK(first.out.find("coverage_pct\t66.7") != std::string::npos);
  std::size_t pl = first.out.find("PL\t2");
  std::size_t sg = first.out.find("SG\t1");
  REQUIRE(pl != std::string::npos);
  REQUIRE(sg != std::string::npos);
  CHECK(pl < sg);  // ranked by count
  CHECK(run_cli(args, dir).out == first.out);

  fs::path report = dir / "report.tsv";
  REQUIRE(run_cli(args + " -o " + report.string(), dir).code == 0);
  CHECK(slurp(report).find("label\tcount\nPL\t2\nSG\t1\n") != std::string::npos);
}

TEST_CASE("gloss-dist on a corpus without grammatical glosses exits 1") {
  fs::path dir = fresh_dir("glossdist_empty");
  fs::path corpus = dir / "lexical.jsonl";
  Corpus fixture;
  fixture.examples = {make_example("t1", "haus", "house")};
  write_canonical(fixture, corpus.string());
  RunResult r = run_cli("gloss-dist -c " + corpus.string(), dir);
  CHECK(r.code == 1);
  CHECK(r.err.find("empty") != std::string::npos);
}

TEST_CASE("normalize rewrites labels through the mapping") {
  fs::path dir = fresh_dir("normalize");
  fs::path corpus = dir / "corpus.jsonl";
  Corpus fixture;
  fixture.examples = {make_example("t1", "toto-ka", "speak-PAST"),
                      make_example("t2", "mam-ri", "walk-NPST")};
  write_canonical(fixture, corpus.string());
  fs::path map = dir / "map.tsv";
  spew(map, "PAST\tPST\nNPST\t*KEEP\n");

  fs::path out = dir / "normalized.jsonl";
  RunResult r = run_cli("normalize -c " + corpus.string() + " -m " + map.string() + " -o " +
                            out.string(),
                        dir);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("(1 changed)") != std::string::npos);
  Corpus normalized = read_canonical(out.string());
  CHECK(normalized.examples[0].gloss_text == "speak-PST");
  CHECK(normalized.examples[1].gloss_text == "walk-NPST");

  // applying the map to its own output changes nothing
  fs::path twice = dir / "twice.jsonl";
  REQUIRE(run_cli("normalize -c " + out.string() + " -m " + map.string() + " -o " +
                      twice.string(),
                  dir)
              .code == 0);
  CHECK(slurp(twice) == slurp(out));
}

TEST_CASE("train, predict and eval round-trip reproduces gold") {
  fs::path dir = fresh_dir("roundtrip");
  fs::path corpus = ingest_fixture(dir);
  fs::path lexicon = dir / "lexicon.tsv";
  fs::path preds = dir / "preds.tsv";

  RunResult train = run_cli("train -c " + corpus.string() + " -o " + lexicon.string() +
                                " --level morpheme",
                            dir);
  REQUIRE(train.code == 0);

  RunResult predict = run_cli("predict -l " + lexicon.string() + " -c " + corpus.string() +
                                  " --segmented yes -o " + preds.string(),
                              dir);
  REQUIRE(predict.code == 0);

  RunResult eval = run_cli("eval -g " + corpus.string() + " --segmented yes -p " +
                               preds.string(),
                           dir);
  REQUIRE(eval.code == 0);
  CHECK(eval.out.find("overall\t2\t1.0000\t1.0000\t100.00") != std::string::npos);
  CHECK(eval.out.find("arap1274\t2\t1.0000\t1.0000\t100.00") != std::string::npos);

  fs::path report = dir / "report.tsv";
  REQUIRE(run_cli("eval -g " + corpus.string() + " --segmented yes -p " + preds.string() +
                      " -o " + report.string(),
                  dir)
              .code == 0);
  CHECK(slurp(report).find("overall\t2\t1.0000\t1.0000\t100.00") != std::string::npos);
  CHECK(fs::exists(dir / "report.tsv.manifest.json"));
}

TEST_CASE("predicting unsegmented input with a morpheme lexicon exits 1") {
  fs::path dir = fresh_dir("levelmismatch");
  fs::path corpus = ingest_fixture(dir);
  fs::path lexicon = dir / "lexicon.tsv";
  REQUIRE(run_cli("train -c " + corpus.string() + " -o " + lexicon.string(), dir).code == 0);
  RunResult r = run_cli("predict -l " + lexicon.string() + " -c " + corpus.string() + " -o " +
                            (dir / "preds.tsv").string(),
                        dir);
  CHECK(r.code == 1);
  CHECK(r.err.find("segmented") != std::string::npos);
}

TEST_CASE("export-prompts matches the library serialization") {
  fs::path dir = fresh_dir("prompts");
  fs::path corpus = ingest_fixture(dir);
  fs::path prompts = dir / "prompts.jsonl";
  RunResult r = run_cli("export-prompts -c " + corpus.string() + " -o " + prompts.string(), dir);
  REQUIRE(r.code == 0);

  Corpus parsed = read_canonical(corpus.string());
  CHECK(slurp(prompts) == format_prompts(export_prompts(parsed.examples)));
}

TEST_CASE("config file supplies defaults and flags override them") {
  fs::path dir = fresh_dir("config");
  fs::path cfg = dir / "igtkit.ini";
  spew(cfg, "[ingest]\nmetalang=spa\n");

  fs::path from_cfg = dir / "from_cfg.jsonl";
  REQUIRE(run_cli("ingest -i " + sigmorphon_fixture() + " -o " + from_cfg.string() +
                      " --glottocode arap1274 --config " + cfg.string(),
                  dir)
              .code == 0);
  CHECK(read_canonical(from_cfg.string()).examples[0].metalang == "spa");

  fs::path overridden = dir / "overridden.jsonl";
  REQUIRE(run_cli("ingest -i " + sigmorphon_fixture() + " -o " + overridden.string() +
                      " --glottocode arap1274 --config " + cfg.string() + " --metalang deu",
                  dir)
              .code == 0);
  CHECK(read_canonical(overridden.string()).examples[0].metalang == "deu");
}

TEST_CASE("typology pipeline writes deterministic reports") {
  fs::path dir = fresh_dir("typology");
  fs::path values = dir / "features.csv";
  spew(values,
       "language,parameter,value\n"
       "arap1274,GB020,1\n"
       "arap1274,GB024,1\n"
       "arap1274,GB131,0\n"
       "uspa1245,GB020,0\n"
       "uspa1245,GB024,2\n"
       "uspa1245,GB131,1\n"
       "gitx1241,GB020,1\n"
       "gitx1241,GB024,2\n"
       "gitx1241,GB131,?\n");
  fs::path weights = dir / "weights.tsv";
  spew(weights, "arap1274\t10\nuspa1245\t5\ngitx1241\t5\nghos1234\t5\n");

  fs::path out_dir = dir / "out";
  std::string args = "typology --values " + values.string() + " --weights " + weights.string() +
                     " --multistate " + kShipped + "/multistate_features.txt --out-dir " +
                     out_dir.string() + " --impute knn --min-coverage 0.5";
  RunResult r = run_cli(args, dir);
  REQUIRE(r.code == 0);

  std::string summary = slurp(out_dir / "summary.tsv");
  CHECK(summary.find("cosine\t0.9690") != std::string::npos);
  CHECK(summary.find("languages\t3") != std::string::npos);
  CHECK(summary.find("features\t4") != std::string::npos);
  CHECK(summary.find("excluded_weight_fraction\t0.2000") != std::string::npos);
  // hand check: GB024a observed 1 for arap (weight 10 of 20), 0 elsewhere
  CHECK(slurp(out_dir / "gaps.tsv").find("GB024a\t0.5000\t0.3333\t0.1667") !=
        std::string::npos);
  CHECK(slurp(out_dir / "dataset_vector.tsv").find("GB020\t0.7500") != std::string::npos);

  std::map<std::string, std::string> bytes;
  for (const auto& entry : fs::directory_iterator(out_dir))
    bytes[entry.path().filename().string()] = slurp(entry.path());
  REQUIRE(run_cli(args, dir).code == 0);
  for (const auto& [name, content] : bytes) CHECK(slurp(out_dir / name) == content);
  CHECK(bytes.count("manifest.json") == 1);
}

TEST_CASE("remote-predict against a mock endpoint feeds eval") {
  fs::path dir = fresh_dir("remote");
  fs::path corpus = ingest_fixture(dir);
  fs::path prompts = dir / "prompts.jsonl";
  REQUIRE(run_cli("export-prompts -c " + corpus.string() + " -o " + prompts.string(), dir)
              .code == 0);

  // the mock answers every prompt with its recorded target, so the
  // downstream eval must come back perfect
  std::map<std::string, std::string> answers;
  for (const auto& rec : parse_prompts(slurp(prompts))) answers[rec.prompt] = rec.target;

  httplib::Server server;
  std::string seen_auth;
  server.Post("/generate", [&](const httplib::Request& req, httplib::Response& res) {
    seen_auth = req.get_header_value("Authorization");
    auto body = nlohmann::json::parse(req.body);
    auto it = answers.find(body["inputs"].get<std::string>());
    nlohmann::json out;
    out["generated_text"] = it == answers.end() ? "???" : it->second;
    res.set_content(out.dump(), "application/json");
  });
  int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  fs::path preds = dir / "preds.tsv";
  std::string endpoint = "http://127.0.0.1:" + std::to_string(port) + "/generate";
  ::setenv("IGTKIT_AUTH_TOKEN", "sekret", 1);
  RunResult r = run_cli("remote-predict -p " + prompts.string() + " -e " + endpoint + " -o " +
                            preds.string() + " --max-in-flight 2",
                        dir);
  ::unsetenv("IGTKIT_AUTH_TOKEN");
  server.stop();
  thread.join();
  REQUIRE(r.code == 0);
  CHECK(seen_auth == "Bearer sekret");

  RunResult eval = run_cli("eval -g " + corpus.string() + " -p " + preds.string(), dir);
  REQUIRE(eval.code == 0);
  CHECK(eval.out.find("overall\t5\t1.0000\t1.0000\t100.00") != std::string::npos);
}

TEST_CASE("remote-predict reports endpoint failures with exit 1") {
  fs::path dir = fresh_dir("remote_down");
  fs::path corpus = ingest_fixture(dir);
  fs::path prompts = dir / "prompts.jsonl";
  REQUIRE(run_cli("export-prompts -c " + corpus.string() + " -o " + prompts.string(), dir)
              .code == 0);
  RunResult r = run_cli("remote-predict -p " + prompts.string() +
                            " -e http://127.0.0.1:1/generate -o " +
                            (dir / "preds.tsv").string() + " --retries 0 --timeout 2",
                        dir);
  CHECK(r.code == 1);
}
