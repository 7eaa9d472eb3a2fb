// End-to-end checks of the command-line tool, driven as a subprocess.
// The binary path arrives in the MVSTREAM_CLI environment variable.
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "mvstream/config.hpp"
#include "test_util.hpp"

namespace {

struct CliResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

const char* cli_path() {
  const char* p = std::getenv("MVSTREAM_CLI");
  REQUIRE_MESSAGE(p != nullptr, "MVSTREAM_CLI must point at the binary");
  return p;
}

CliResult run_cli(const std::string& args) {
  static std::uint64_t counter = 0;
  const auto log = std::filesystem::temp_directory_path() /
                   ("mvstream_cli_" + std::to_string(::getpid()) + "_" +
                    std::to_string(counter++) + ".log");
  const std::string cmd =
      '"' + std::string(cli_path()) + "\" " + args + " > \"" + log.string() +
      "\" 2>&1";
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.output = testutil::read_file(log);
  std::filesystem::remove(log);
  return r;
}

std::string pipeline_spec() {
  return "[stream]\n"
         "n_docs = 400\n"
         "n_concepts = 6\n"
         "tokens_per_doc = 10\n"
         "dim = 16\n"
         "n_queries = 12\n"
         "query_tokens = 3\n"
         "noise_scale = 0.25\n"
         "seed = 5\n"
         "[engine]\n"
         "top_docs = 60\n"
         "[lifecycle]\n"
         "A = 120\n"
         "B = 60\n"
         "k = 2\n"
         "min_bootstrap_passages = 60\n"
         "min_bootstrap_docs = 60\n"
         "[model]\n"
         "c_mult = 0.4\n"
         "K_min = 4\n"
         "kmeans_iters = 4\n"
         "[search]\n"
         "n_per_shard = 60\n"
         "nprobe = 2\n"
         "candidate_factor = 2\n";
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::trunc | std::ios::binary);
  out << text;
}

std::vector<std::string> file_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

}  // namespace

TEST_CASE("synth, ingest, search and eval compose into a working pipeline") {
  testutil::TempDir td("pipeline");
  write_text(td / "spec.ini", pipeline_spec());

  auto synth = run_cli("synth --spec \"" + (td / "spec.ini").string() +
                       "\" --out \"" + (td / "data").string() + '"');
  INFO(synth.output);
  REQUIRE(synth.exit_code == 0);
  CHECK(std::filesystem::exists(td / "data" / "corpus.jsonl"));
  CHECK(std::filesystem::exists(td / "data" / "queries.tsv"));
  CHECK(std::filesystem::exists(td / "data" / "qrels.txt"));
  CHECK(std::filesystem::exists(td / "data" / "config.ini"));

  auto ingest = run_cli(
      "ingest --config \"" + (td / "data" / "config.ini").string() +
      "\" --corpus \"" + (td / "data" / "corpus.jsonl").string() +
      "\" --index \"" + (td / "index").string() + '"');
  INFO(ingest.output);
  REQUIRE(ingest.exit_code == 0);
  CHECK(ingest.output.find("ingested 400 docs") != std::string::npos);
  // 400 docs at A=120, B=60: 3 large, 0 small, 1 incomplete
  CHECK(ingest.output.find("3 large, 0 small, 1 incomplete") !=
        std::string::npos);

  auto search = run_cli("search --index \"" + (td / "index").string() +
                        "\" --queries \"" + (td / "data" / "queries.tsv").string() +
                        "\" --out \"" + (td / "run.txt").string() + '"');
  INFO(search.output);
  REQUIRE(search.exit_code == 0);
  const auto run_lines = file_lines(td / "run.txt");
  CHECK(run_lines.size() == 12 * 60);

  auto eval = run_cli("eval --run \"" + (td / "run.txt").string() +
                      "\" --qrels \"" + (td / "data" / "qrels.txt").string() +
                      "\" --metrics ndcg@20,map --json \"" +
                      (td / "metrics.json").string() + '"');
  INFO(eval.output);
  REQUIRE(eval.exit_code == 0);
  CHECK(eval.output.find("ndcg@20") != std::string::npos);
  CHECK(eval.output.find("queries      12") != std::string::npos);
  auto j = nlohmann::json::parse(testutil::read_file(td / "metrics.json"));
  CHECK(j["mean"]["ndcg@20"].get<double>() > 0.5);
  CHECK(j["n_queries"] == 12);

  // plain ingest refuses to clobber the existing index
  auto clobber = run_cli(
      "ingest --config \"" + (td / "data" / "config.ini").string() +
      "\" --corpus \"" + (td / "data" / "corpus.jsonl").string() +
      "\" --index \"" + (td / "index").string() + '"');
  CHECK(clobber.exit_code == 1);

  // resume over the finished index is a no-op that leaves every byte alone
  const auto before = testutil::dir_contents(td / "index", {"events.log"});
  auto resume = run_cli(
      "ingest --resume --corpus \"" + (td / "data" / "corpus.jsonl").string() +
      "\" --index \"" + (td / "index").string() + '"');
  INFO(resume.output);
  REQUIRE(resume.exit_code == 0);
  CHECK(testutil::dir_contents(td / "index", {"events.log"}) == before);
}

TEST_CASE("resume finishes an interrupted ingest byte for byte") {
  testutil::TempDir td("resume");
  write_text(td / "spec.ini", pipeline_spec());
  REQUIRE(run_cli("synth --spec \"" + (td / "spec.ini").string() +
                  "\" --out \"" + (td / "data").string() + '"')
              .exit_code == 0);
  const auto corpus = (td / "data" / "corpus.jsonl").string();
  const auto config = (td / "data" / "config.ini").string();

  // one-shot reference
  REQUIRE(run_cli("ingest --config \"" + config + "\" --corpus \"" + corpus +
                  "\" --index \"" + (td / "index_full").string() + '"')
              .exit_code == 0);

  // "crash" after 250 docs: ingest a prefix corpus, then resume with the rest
  const auto lines = file_lines(td / "data" / "corpus.jsonl");
  REQUIRE(lines.size() == 400);
  std::string prefix;
  for (std::size_t i = 0; i < 250; ++i) prefix += lines[i] + '\n';
  write_text(td / "prefix.jsonl", prefix);

  REQUIRE(run_cli("ingest --config \"" + config + "\" --corpus \"" +
                  (td / "prefix.jsonl").string() + "\" --index \"" +
                  (td / "index_cut").string() + '"')
              .exit_code == 0);
  auto resumed = run_cli("ingest --resume --corpus \"" + corpus +
                         "\" --index \"" + (td / "index_cut").string() + '"');
  INFO(resumed.output);
  REQUIRE(resumed.exit_code == 0);

  CHECK(testutil::dir_contents(td / "index_cut", {"events.log"}) ==
        testutil::dir_contents(td / "index_full", {"events.log"}));

  // a corpus that diverges inside the durable prefix is rejected
  std::string tampered;
  for (std::size_t i = 0; i < lines.size(); ++i)
    tampered +=
        (i == 3 ? std::string(lines[i]).replace(lines[i].find("d000"), 8,
                                                "d9999999")
                : lines[i]) +
        '\n';
  write_text(td / "tampered.jsonl", tampered);
  auto bad = run_cli("ingest --resume --corpus \"" +
                     (td / "tampered.jsonl").string() + "\" --index \"" +
                     (td / "index_cut").string() + '"');
  CHECK(bad.exit_code == 2);
  CHECK(bad.output.find("does not match the persisted index prefix") !=
        std::string::npos);

  // a corpus shorter than the persisted index is rejected
  std::string tiny;
  for (std::size_t i = 0; i < 10; ++i) tiny += lines[i] + '\n';
  write_text(td / "tiny.jsonl", tiny);
  auto shortc = run_cli("ingest --resume --corpus \"" +
                        (td / "tiny.jsonl").string() + "\" --index \"" +
                        (td / "index_cut").string() + '"');
  CHECK(shortc.exit_code == 2);
  CHECK(shortc.output.find("shorter") != std::string::npos);
}

TEST_CASE("search refuses an index built under a different embedder") {
  testutil::TempDir td("fpmismatch");
  write_text(td / "spec.ini", pipeline_spec());
  REQUIRE(run_cli("synth --spec \"" + (td / "spec.ini").string() +
                  "\" --out \"" + (td / "data").string() + '"')
              .exit_code == 0);
  REQUIRE(run_cli("ingest --config \"" + (td / "data" / "config.ini").string() +
                  "\" --corpus \"" + (td / "data" / "corpus.jsonl").string() +
                  "\" --index \"" + (td / "index").string() + '"')
              .exit_code == 0);
  // swap the embedder seed inside the persisted config
  auto cfg = mvstream::EngineConfig::load(td / "index" / "config.ini");
  cfg.embedder.seed += 1;
  cfg.save(td / "index" / "config.ini");
  auto r = run_cli("search --index \"" + (td / "index").string() +
                   "\" --queries \"" + (td / "data" / "queries.tsv").string() +
                   "\" --out \"" + (td / "run.txt").string() + '"');
  CHECK(r.exit_code == 2);
}

TEST_CASE("shard-plan prints the active shard arithmetic") {
  auto r = run_cli("shard-plan --n-docs 504000000 --A 5000000 --B 500000");
  REQUIRE(r.exit_code == 0);
  CHECK(r.output.find("large 100") != std::string::npos);
  CHECK(r.output.find("small 8") != std::string::npos);
  CHECK(r.output.find("incomplete 0") != std::string::npos);
  CHECK(r.output.find("total 108") != std::string::npos);

  CHECK(run_cli("shard-plan --n-docs 10 --A 1000 --B 300").exit_code == 1);
}

TEST_CASE("benchmark subcommands emit machine-readable reports") {
  testutil::TempDir td("bench");
  write_text(td / "spec.ini", pipeline_spec());

  auto drift = run_cli("drift-bench --spec \"" + (td / "spec.ini").string() +
                       "\" --checkpoints 0.5,1.0 --json \"" +
                       (td / "drift.json").string() + '"');
  INFO(drift.output);
  REQUIRE(drift.exit_code == 0);
  CHECK(drift.output.find("checkpoint") != std::string::npos);
  auto dj = nlohmann::json::parse(testutil::read_file(td / "drift.json"));
  REQUIRE(dj.is_array());
  REQUIRE(dj.size() == 2);
  CHECK(dj[0]["train_docs"] == 200);
  CHECK(dj[1]["train_docs"] == 400);

  auto oracle = run_cli("oracle-bench --spec \"" + (td / "spec.ini").string() +
                        "\" --exact --json \"" + (td / "oracle.json").string() +
                        '"');
  INFO(oracle.output);
  REQUIRE(oracle.exit_code == 0);
  auto oj = nlohmann::json::parse(testutil::read_file(td / "oracle.json"));
  for (const auto& [metric, ratio] : oj["ratio"].items()) {
    INFO(metric);
    CHECK(ratio.get<double>() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("failures map onto distinct exit codes") {
  testutil::TempDir td("exitcodes");
  // config error: 1
  write_text(td / "bad.ini", "[lifecycle]\nA = 1000\nB = 300\nk = 4\n");
  write_text(td / "c.jsonl", "");
  auto cfg_err = run_cli("ingest --config \"" + (td / "bad.ini").string() +
                         "\" --corpus \"" + (td / "c.jsonl").string() +
                         "\" --index \"" + (td / "idx").string() + '"');
  CHECK(cfg_err.exit_code == 1);
  CHECK(cfg_err.output.find("config error") != std::string::npos);

  // data error: 2
  auto data_err = run_cli("eval --run \"" + (td / "nope.run").string() +
                          "\" --qrels \"" + (td / "nope.txt").string() + '"');
  CHECK(data_err.exit_code == 2);
  CHECK(data_err.output.find("data error") != std::string::npos);

  // bad metric name is a config error
  write_text(td / "r.run", "q1 Q0 d1 1 1.0 tag\n");
  write_text(td / "q.txt", "q1 0 d1 1\n");
  auto metric_err = run_cli("eval --run \"" + (td / "r.run").string() +
                            "\" --qrels \"" + (td / "q.txt").string() +
                            "\" --metrics bleu");
  CHECK(metric_err.exit_code == 1);

  // CLI11 usage errors are nonzero without tripping the engine error paths
  CHECK(run_cli("ingest --index only").exit_code != 0);
  CHECK(run_cli("no-such-command").exit_code != 0);
}
