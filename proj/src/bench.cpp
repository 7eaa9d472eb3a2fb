#include "mvstream/bench.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "json.hpp"
#include "mvstream/eval.hpp"
#include "mvstream/rng.hpp"

namespace mvstream {

using json = nlohmann::json;

namespace {

std::string block_label(const char* prefix, std::uint64_t seq) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%06llu", prefix,
                static_cast<unsigned long long>(seq));
  return buf;
}

// a generated stream embedded once, reusable across checkpoints
struct EmbeddedStream {
  DriftStream stream;
  std::vector<PassageRecord> passages;  // stream order
  std::vector<TokenMatrix> vectors;     // aligned with passages
  std::vector<PassageId> ids;
  std::vector<std::uint64_t> doc_first_passage;  // prefix index per doc
  std::vector<QueryEmbedding> queries;
  std::shared_ptr<const Embedder> embedder;
};

EmbeddedStream embed_stream(const SyntheticStreamSpec& spec,
                            const EngineConfig& cfg) {
  spec.validate();
  cfg.validate();
  EmbeddedStream es;
  es.embedder = make_embedder(cfg);
  es.stream = generate_drift_stream(spec);
  PassageId next_pid = 0;
  es.doc_first_passage.reserve(es.stream.docs.size() + 1);
  for (const auto& doc : es.stream.docs) {
    es.doc_first_passage.push_back(es.passages.size());
    auto ps = split_passages(doc, cfg.max_passage_tokens, next_pid);
    for (auto& p : ps) {
      es.vectors.push_back(es.embedder->embed_passage(p));
      es.ids.push_back(p.passage_id);
      es.passages.push_back(std::move(p));
    }
  }
  es.doc_first_passage.push_back(es.passages.size());
  es.queries.reserve(es.stream.queries.size());
  for (const auto& q : es.stream.queries)
    es.queries.push_back(es.embedder->embed_query(q.query_id, q.text));
  return es;
}

std::vector<PassageEntry> entries_slice(const EmbeddedStream& es,
                                        std::uint64_t first_doc,
                                        std::uint64_t last_doc) {
  // doc indices are 0-based and last is exclusive
  std::vector<PassageEntry> entries;
  const auto a = es.doc_first_passage[first_doc];
  const auto b = es.doc_first_passage[last_doc];
  entries.reserve(b - a);
  for (std::uint64_t i = a; i < b; ++i)
    entries.push_back({es.passages[i].passage_id, es.passages[i].doc_id,
                       es.passages[i].window_index, &es.vectors[i]});
  return entries;
}

std::map<std::string, Ranking> run_queries(const EmbeddedStream& es,
                                           const EngineSnapshot& snap,
                                           const SearchParams& params,
                                           std::uint32_t top_docs) {
  std::map<std::string, Ranking> run;
  for (const auto& q : es.queries) {
    const auto r = search_all(q, snap, params, top_docs);
    Ranking docs;
    docs.reserve(r.ranking.size());
    for (const auto& [doc, score] : r.ranking) docs.push_back(doc);
    run.emplace(q.query_id, std::move(docs));
  }
  return run;
}

}  // namespace

DriftReport drift_sweep(const SyntheticStreamSpec& spec,
                        const EngineConfig& cfg,
                        std::span<const double> checkpoints) {
  const EmbeddedStream es = embed_stream(spec, cfg);
  const auto metric_names = parse_metric_list("ndcg@20,r@1000");
  DriftReport rep;
  for (const double f : checkpoints) {
    if (f < 0.0 || f > 1.0)
      throw config_error("checkpoint fractions must lie in [0, 1]");
    DriftRow row;
    row.checkpoint = f;
    row.train_docs = std::uint64_t(f * double(spec.n_docs));
    const auto n_train_passages = es.doc_first_passage[row.train_docs];
    if (row.train_docs == 0 || n_train_passages == 0) {
      row.skipped = true;
      rep.rows.push_back(row);
      continue;
    }
    ModelTrainConfig mt = cfg.model;
    mt.residual_bits = cfg.residual_bits;
    mt.seed = mix_seed(mix_seed(cfg.seed, 3), row.train_docs);
    const std::string label = block_label("C", row.train_docs);
    auto model = std::make_shared<ShardModel>(build_shard_model(
        {es.vectors.data(), n_train_passages},
        {es.ids.data(), n_train_passages}, mt, es.embedder->fingerprint(),
        label));
    const auto entries = entries_slice(es, 0, es.stream.docs.size());
    auto shard = std::make_shared<ShardIndex>(build_compressed_shard(
        label, ShardPhase::Large, {1, es.stream.docs.size()}, entries,
        std::move(model), es.embedder->fingerprint()));
    EngineSnapshot snap;
    snap.fingerprint = es.embedder->fingerprint();
    snap.shards.push_back(std::move(shard));
    // configured search budgets apply unchanged: the centroid-only candidate
    // cut is exactly where a stale codebook hurts
    const auto run = run_queries(es, snap, cfg.search, cfg.top_docs);
    const auto m = compute_metrics(run, es.stream.qrels, metric_names);
    row.ndcg20 = m.mean.at("ndcg@20");
    row.r1000 = m.mean.at("r@1000");
    rep.rows.push_back(row);
  }
  return rep;
}

std::string DriftReport::table() const {
  std::ostringstream o;
  o << "checkpoint  train_docs  ndcg@20   r@1000\n";
  char buf[96];
  for (const auto& r : rows) {
    if (r.skipped) {
      std::snprintf(buf, sizeof buf, "%10.3f  %10llu  %s\n", r.checkpoint,
                    static_cast<unsigned long long>(r.train_docs),
                    "(skipped: no training data)");
    } else {
      std::snprintf(buf, sizeof buf, "%10.3f  %10llu  %7.4f  %7.4f\n",
                    r.checkpoint,
                    static_cast<unsigned long long>(r.train_docs), r.ndcg20,
                    r.r1000);
    }
    o << buf;
  }
  return o.str();
}

std::string DriftReport::json() const {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json row;
    row["checkpoint"] = r.checkpoint;
    row["train_docs"] = r.train_docs;
    row["skipped"] = r.skipped;
    if (!r.skipped) {
      row["ndcg@20"] = r.ndcg20;
      row["r@1000"] = r.r1000;
    }
    j.push_back(std::move(row));
  }
  return j.dump(2);
}

OracleReport oracle_comparison(const SyntheticStreamSpec& spec,
                               const EngineConfig& cfg, bool exact_mode) {
  const EmbeddedStream es = embed_stream(spec, cfg);
  const auto metric_names = parse_metric_list("ndcg@20,map,r@1000");
  SearchParams params = cfg.search;
  params.n_per_shard = cfg.top_docs;  // symmetric candidate budget per shard
  const auto fp = es.embedder->fingerprint();
  const std::uint64_t n = es.stream.docs.size();

  EngineSnapshot oracle_snap;
  oracle_snap.fingerprint = fp;
  const auto all_entries = entries_slice(es, 0, n);
  if (exact_mode) {
    oracle_snap.shards.push_back(std::make_shared<ShardIndex>(
        build_exact_shard("oracle", ShardPhase::Large, {1, n}, all_entries,
                          fp)));
  } else {
    ModelTrainConfig mt = cfg.model;
    mt.residual_bits = cfg.residual_bits;
    mt.seed = mix_seed(mix_seed(cfg.seed, 2), 1);
    auto model = std::make_shared<ShardModel>(
        build_shard_model(es.vectors, es.ids, mt, fp, "oracle"));
    oracle_snap.shards.push_back(std::make_shared<ShardIndex>(
        build_compressed_shard("oracle", ShardPhase::Large, {1, n},
                               all_entries, std::move(model), fp)));
  }

  EngineSnapshot sharded_snap;
  if (exact_mode) {
    // the final lifecycle partition, every block exact
    sharded_snap.fingerprint = fp;
    const std::uint64_t A = cfg.lifecycle.A, B = cfg.lifecycle.B;
    std::uint64_t done = 0, large_seq = 1;
    while (done + A <= n) {
      sharded_snap.shards.push_back(std::make_shared<ShardIndex>(
          build_exact_shard(block_label("L", large_seq++), ShardPhase::Large,
                            {done + 1, done + A},
                            entries_slice(es, done, done + A), fp)));
      done += A;
    }
    while (done + B <= n) {
      sharded_snap.shards.push_back(std::make_shared<ShardIndex>(
          build_exact_shard(block_label("S", done / B + 1),
                            ShardPhase::SmallOwnModel, {done + 1, done + B},
                            entries_slice(es, done, done + B), fp)));
      done += B;
    }
    if (done < n)
      sharded_snap.shards.push_back(std::make_shared<ShardIndex>(
          build_exact_shard("pending_raw", ShardPhase::Bootstrap,
                            {done + 1, n}, entries_slice(es, done, n), fp)));
  } else {
    StreamingEngine engine(cfg, es.embedder);
    for (const auto& doc : es.stream.docs) engine.ingest(doc);
    engine.verify_partition();
    sharded_snap = engine.snapshot();
  }

  const auto oracle_run = run_queries(es, oracle_snap, params, cfg.top_docs);
  const auto sharded_run = run_queries(es, sharded_snap, params, cfg.top_docs);
  const auto om = compute_metrics(oracle_run, es.stream.qrels, metric_names);
  const auto sm = compute_metrics(sharded_run, es.stream.qrels, metric_names);

  OracleReport rep;
  rep.oracle = om.mean;
  rep.sharded = sm.mean;
  for (const auto& name : metric_names) {
    const double o = om.mean.at(name), s = sm.mean.at(name);
    rep.ratio[name] = o == 0.0 ? (s == 0.0 ? 1.0 : 0.0) : s / o;
  }
  return rep;
}

std::string OracleReport::json() const {
  nlohmann::json j;
  j["oracle"] = oracle;
  j["sharded"] = sharded;
  j["ratio"] = ratio;
  return j.dump(2);
}

ThroughputReport throughput_report(const EngineCounters& counters,
                                   std::span<const MergedResult> searches) {
  ThroughputReport r;
  r.wall_seconds = counters.ingest_wall_seconds;
  r.docs_ingested = counters.docs_ingested;
  r.doc_index_passes = counters.doc_index_passes;
  r.token_encodes = counters.token_encodes;
  r.small_seals = counters.small_seals;
  r.large_seals = counters.large_seals;
  r.docs_per_hour = r.wall_seconds > 0.0
                        ? double(r.docs_ingested) / r.wall_seconds * 3600.0
                        : 0.0;
  r.mean_small_build_seconds =
      r.small_seals ? counters.small_build_seconds / double(r.small_seals)
                    : 0.0;
  r.mean_large_build_seconds =
      r.large_seals ? counters.large_build_seconds / double(r.large_seals)
                    : 0.0;
  double sum = 0.0;
  for (const auto& s : searches) {
    double shard_max = 0.0;
    for (double v : s.shard_seconds) shard_max = std::max(shard_max, v);
    const double q = shard_max + s.merge_seconds;
    sum += q;
    r.max_query_seconds = std::max(r.max_query_seconds, q);
  }
  r.mean_query_seconds = searches.empty() ? 0.0 : sum / double(searches.size());
  return r;
}

std::string ThroughputReport::json() const {
  nlohmann::json j;
  j["wall_seconds"] = wall_seconds;
  j["docs_per_hour"] = docs_per_hour;
  j["docs_ingested"] = docs_ingested;
  j["doc_index_passes"] = doc_index_passes;
  j["token_encodes"] = token_encodes;
  j["small_seals"] = small_seals;
  j["large_seals"] = large_seals;
  j["mean_small_build_seconds"] = mean_small_build_seconds;
  j["mean_large_build_seconds"] = mean_large_build_seconds;
  j["mean_query_seconds"] = mean_query_seconds;
  j["max_query_seconds"] = max_query_seconds;
  return j.dump(2);
}

}  // namespace mvstream
