// Command-line front end: synth, ingest, search, eval, shard-plan,
// drift-bench, oracle-bench. Exit codes: 1 bad config or usage, 2 bad data,
// 3 internal invariant breach.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "mvstream/bench.hpp"
#include "mvstream/config.hpp"
#include "mvstream/engine.hpp"
#include "mvstream/eval.hpp"
#include "mvstream/search.hpp"

namespace fs = std::filesystem;
using namespace mvstream;

namespace {

void cmd_synth(const std::string& spec_path, const std::string& out_dir) {
  const BenchSpec spec = load_bench_spec(spec_path);
  const DriftStream stream = generate_drift_stream(spec.stream);
  fs::create_directories(out_dir);
  write_corpus_jsonl(fs::path(out_dir) / "corpus.jsonl", stream.docs);
  write_stream_manifest(fs::path(out_dir) / "stream.tsv", stream.docs);
  write_query_file(fs::path(out_dir) / "queries.tsv", stream.queries);
  stream.qrels.save(fs::path(out_dir) / "qrels.txt");
  spec.engine.save(fs::path(out_dir) / "config.ini");
  std::printf("wrote %zu docs, %zu queries to %s\n", stream.docs.size(),
              stream.queries.size(), out_dir.c_str());
}

void cmd_ingest(const std::string& config_path, const std::string& corpus_path,
                const std::string& index_dir, bool resume) {
  const EngineConfig cfg =
      config_path.empty() ? EngineConfig::load(fs::path(index_dir) / "config.ini")
                          : EngineConfig::load(config_path);
  auto embedder = make_embedder(cfg);
  auto docs = order_stream(read_corpus_jsonl(corpus_path));
  StreamingEngine engine =
      resume ? StreamingEngine::resume(cfg, embedder, index_dir)
             : StreamingEngine(cfg, embedder, index_dir);
  if (engine.replay_from() > docs.size())
    throw data_error("corpus is shorter than the persisted index");
  if (stream_prefix_hash(docs, engine.replay_from()) != engine.stream_hash())
    throw data_error("corpus does not match the persisted index prefix");
  for (std::size_t i = engine.replay_from(); i < docs.size(); ++i)
    engine.ingest(docs[i]);
  engine.verify_partition();
  engine.finish();
  const auto& c = engine.counters();
  const auto counts =
      shard_count(engine.docs_ingested(), cfg.lifecycle.A, cfg.lifecycle.B);
  std::printf("ingested %llu docs (%llu passages) in %.2fs\n",
              (unsigned long long)c.docs_ingested,
              (unsigned long long)c.passages_ingested, c.ingest_wall_seconds);
  std::printf("active shards: %llu large, %llu small, %llu incomplete\n",
              (unsigned long long)counts.n_large,
              (unsigned long long)counts.n_small,
              (unsigned long long)counts.n_incomplete);
  std::printf("seals: %llu small (%.2fs), %llu large (%.2fs)\n",
              (unsigned long long)c.small_seals, c.small_build_seconds,
              (unsigned long long)c.large_seals, c.large_build_seconds);
}

void cmd_search(const std::string& index_dir, const std::string& query_path,
                const std::string& out_path, std::uint32_t n_per_shard,
                std::uint32_t nprobe, std::uint32_t candidate_factor,
                std::uint32_t top_docs, const std::string& timing_json) {
  const EngineConfig cfg =
      EngineConfig::load(fs::path(index_dir) / "config.ini");
  auto embedder = make_embedder(cfg);
  const EngineSnapshot snap = load_snapshot(index_dir);
  if (embedder->fingerprint() != snap.fingerprint)
    throw data_error("config embedder does not match the index");
  SearchParams params = cfg.search;
  if (n_per_shard) params.n_per_shard = n_per_shard;
  if (nprobe) params.nprobe = nprobe;
  if (candidate_factor) params.candidate_factor = candidate_factor;
  const std::uint32_t top = top_docs ? top_docs : cfg.top_docs;
  const auto queries = read_query_file(query_path);
  std::vector<MergedResult> results;
  results.reserve(queries.size());
  for (const auto& q : queries)
    results.push_back(search_all(embedder->embed_query(q.query_id, q.text),
                                 snap, params, top));
  write_run_file(out_path, results, cfg.run_tag);
  std::printf("searched %zu queries over %zu shards -> %s\n", queries.size(),
              snap.shards.size(), out_path.c_str());
  if (!timing_json.empty()) {
    EngineCounters none;
    std::ofstream out(timing_json, std::ios::trunc);
    out << throughput_report(none, results).json() << '\n';
  }
}

void cmd_eval(const std::string& run_path, const std::string& qrels_path,
              const std::string& metrics_csv, bool exponential_gain,
              const std::string& json_path, const std::string& tsv_path) {
  const auto run = read_run_file(run_path);
  const auto qrels = RelevanceJudgments::load(qrels_path);
  const auto names = parse_metric_list(metrics_csv);
  const auto rep = compute_metrics(run, qrels, names, exponential_gain);
  for (const auto& name : names)
    std::printf("%-12s %.6f\n", name.c_str(), rep.mean.at(name));
  std::printf("queries      %zu\n", rep.per_query.size());
  if (!json_path.empty()) save_metric_report_json(rep, json_path);
  if (!tsv_path.empty()) save_metric_report_tsv(rep, tsv_path);
}

void cmd_shard_plan(std::uint64_t n_docs, std::uint64_t A, std::uint64_t B) {
  const auto c = shard_count(n_docs, A, B);
  std::printf("docs %llu  A %llu  B %llu\n", (unsigned long long)n_docs,
              (unsigned long long)A, (unsigned long long)B);
  std::printf("large %llu\nsmall %llu\nincomplete %llu\ntotal %llu\n",
              (unsigned long long)c.n_large, (unsigned long long)c.n_small,
              (unsigned long long)c.n_incomplete,
              (unsigned long long)c.total);
}

void cmd_drift(const std::string& spec_path, const std::string& checkpoints,
               const std::string& json_path) {
  const BenchSpec spec = load_bench_spec(spec_path);
  std::vector<double> points;
  std::istringstream in(checkpoints);
  std::string item;
  while (std::getline(in, item, ','))
    points.push_back(std::stod(item));
  if (points.empty()) throw config_error("no checkpoints given");
  const auto rep = drift_sweep(spec.stream, spec.engine, points);
  std::fputs(rep.table().c_str(), stdout);
  if (!json_path.empty()) {
    std::ofstream out(json_path, std::ios::trunc);
    out << rep.json() << '\n';
  }
}

void cmd_oracle(const std::string& spec_path, bool exact,
                const std::string& json_path) {
  const BenchSpec spec = load_bench_spec(spec_path);
  const auto rep = oracle_comparison(spec.stream, spec.engine, exact);
  std::puts(rep.json().c_str());
  if (!json_path.empty()) {
    std::ofstream out(json_path, std::ios::trunc);
    out << rep.json() << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"streaming multi-vector retrieval engine"};
  app.require_subcommand(1);

  std::string spec_path, out_dir = "synth_out";
  auto* synth = app.add_subcommand("synth", "generate a synthetic drift stream");
  synth->add_option("--spec", spec_path, "stream spec file")->required();
  synth->add_option("--out", out_dir, "output directory");

  std::string config_path, corpus_path, index_dir;
  bool resume = false;
  auto* ingest = app.add_subcommand("ingest", "stream a corpus into an index");
  ingest->add_option("--config", config_path, "engine config file");
  ingest->add_option("--corpus", corpus_path, "corpus JSONL")->required();
  ingest->add_option("--index", index_dir, "index directory")->required();
  ingest->add_flag("--resume", resume, "resume a crashed or stopped ingest");

  std::string query_path, run_out = "run.txt", timing_json;
  std::uint32_t n_per_shard = 0, nprobe = 0, candidate_factor = 0, top = 0;
  auto* search = app.add_subcommand("search", "run queries against an index");
  search->add_option("--index", index_dir, "index directory")->required();
  search->add_option("--queries", query_path, "query TSV")->required();
  search->add_option("--out", run_out, "run file to write");
  search->add_option("--n-per-shard", n_per_shard, "results per shard");
  search->add_option("--nprobe", nprobe, "probed centroids per query token");
  search->add_option("--candidate-factor", candidate_factor,
                     "decode budget multiplier");
  search->add_option("--top-docs", top, "documents per query");
  search->add_option("--timing-json", timing_json, "latency report file");

  std::string run_path, qrels_path, json_path, tsv_path;
  std::string metrics = "ndcg@20,map,r@1000,judged@20";
  bool exponential_gain = false;
  auto* eval = app.add_subcommand("eval", "score a run file against qrels");
  eval->add_option("--run", run_path, "run file")->required();
  eval->add_option("--qrels", qrels_path, "judgments file")->required();
  eval->add_option("--metrics", metrics, "comma-separated metric list");
  eval->add_flag("--exponential-gain", exponential_gain,
                 "use 2^grade - 1 gains");
  eval->add_option("--json", json_path, "write the full report as JSON");
  eval->add_option("--tsv", tsv_path, "write the per-query table as TSV");

  std::uint64_t n_docs = 0, A = 2000, B = 500;
  auto* plan = app.add_subcommand("shard-plan", "active shard arithmetic");
  plan->add_option("--n-docs", n_docs, "stream length")->required();
  plan->add_option("--A", A, "large shard size");
  plan->add_option("--B", B, "small shard size");

  std::string checkpoints = "0.1,0.25,0.5,0.75,1.0";
  auto* drift = app.add_subcommand(
      "drift-bench", "frozen-codebook quality across stream prefixes");
  drift->add_option("--spec", spec_path, "stream spec file")->required();
  drift->add_option("--checkpoints", checkpoints, "training fractions");
  drift->add_option("--json", json_path, "write rows as JSON");

  bool exact = false;
  auto* oracle = app.add_subcommand(
      "oracle-bench", "lifecycle index vs one whole-stream index");
  oracle->add_option("--spec", spec_path, "stream spec file")->required();
  oracle->add_flag("--exact", exact, "uncompressed on both sides");
  oracle->add_option("--json", json_path, "write the report as JSON");

  try {
    app.parse(argc, argv);
    if (*synth) cmd_synth(spec_path, out_dir);
    if (*ingest) cmd_ingest(config_path, corpus_path, index_dir, resume);
    if (*search)
      cmd_search(index_dir, query_path, run_out, n_per_shard, nprobe,
                 candidate_factor, top, timing_json);
    if (*eval)
      cmd_eval(run_path, qrels_path, metrics, exponential_gain, json_path,
               tsv_path);
    if (*plan) cmd_shard_plan(n_docs, A, B);
    if (*drift) cmd_drift(spec_path, checkpoints, json_path);
    if (*oracle) cmd_oracle(spec_path, exact, json_path);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const config_error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const data_error& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 2;
  } catch (const invariant_violation& e) {
    std::fprintf(stderr, "invariant violation: %s\n", e.what());
    return 3;
  }
  return 0;
}
