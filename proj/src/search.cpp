#include "mvstream/search.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "mvstream/io.hpp"

namespace mvstream {

using json = nlohmann::json;

std::vector<std::pair<std::string, double>> merge_rankings(
    const std::vector<std::vector<ScoredPassage>>& per_shard,
    std::uint32_t top_docs) {
  std::vector<std::pair<std::string, double>> pool;
  std::unordered_map<std::string, std::size_t> owner;
  for (std::size_t li = 0; li < per_shard.size(); ++li) {
    for (const auto& sp : per_shard[li]) {
      auto [it, fresh] = owner.emplace(sp.doc_id, li);
      if (!fresh)
        throw invariant_violation("document " + sp.doc_id +
                                  " returned by two shards; the partition "
                                  "invariant is broken");
      pool.emplace_back(sp.doc_id, sp.score);
    }
  }
  std::sort(pool.begin(), pool.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (pool.size() > top_docs) pool.resize(top_docs);
  return pool;
}

MergedResult search_all(const QueryEmbedding& query,
                        const EngineSnapshot& snapshot,
                        const SearchParams& params, std::uint32_t top_docs) {
  for (const auto& s : snapshot.shards)
    if (s->embedder_fingerprint != snapshot.fingerprint)
      throw data_error("shard " + s->shard_id +
                       " was built under a different embedder");
  MergedResult r;
  r.query_id = query.query_id;
  const std::int64_t n = std::int64_t(snapshot.shards.size());
  std::vector<std::vector<ScoredPassage>> per_shard(n);
  r.shard_seconds.assign(n, 0.0);
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    per_shard[i] = search_shard(query, *snapshot.shards[i], params);
    r.shard_seconds[i] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
  }
  const auto t0 = std::chrono::steady_clock::now();
  r.ranking = merge_rankings(per_shard, top_docs);
  r.merge_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return r;
}

void write_run_file(const std::filesystem::path& path,
                    std::span<const MergedResult> results,
                    const std::string& tag) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw data_error("cannot write " + path.string());
  char score[64];
  for (const auto& r : results) {
    std::uint32_t rank = 1;
    for (const auto& [doc_id, s] : r.ranking) {
      std::snprintf(score, sizeof score, "%.6f", s);
      out << r.query_id << " Q0 " << doc_id << ' ' << rank++ << ' ' << score
          << ' ' << tag << '\n';
    }
  }
  if (!out) throw data_error("cannot write " + path.string());
}

std::map<std::string, Ranking> read_run_file(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot read " + path.string());
  std::map<std::string, std::vector<std::pair<std::uint64_t, std::string>>> by_q;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string qid, q0, doc_id, tag;
    std::uint64_t rank;
    double score;
    if (!(ls >> qid >> q0 >> doc_id >> rank >> score >> tag))
      throw data_error(path.string() + ":" + std::to_string(lineno) +
                       ": malformed run line");
    by_q[qid].emplace_back(rank, doc_id);
  }
  std::map<std::string, Ranking> out;
  for (auto& [qid, entries] : by_q) {
    std::sort(entries.begin(), entries.end());
    Ranking r;
    r.reserve(entries.size());
    for (auto& [rank, doc] : entries) r.push_back(std::move(doc));
    out.emplace(qid, std::move(r));
  }
  return out;
}

EngineSnapshot load_snapshot(const std::filesystem::path& index_dir) {
  std::ifstream in(index_dir / "manifest.json");
  if (!in) throw data_error("no index manifest at " + index_dir.string());
  json m = json::parse(in, nullptr, true);
  if (m.value("format_version", 0) != 1)
    throw data_error("unsupported index format at " + index_dir.string());
  if (!m.value("complete", false))
    throw data_error("index at " + index_dir.string() +
                     " was not finished; resume the ingest first");
  EngineSnapshot snap;
  snap.fingerprint = io::unhex32(m["embedder_fingerprint"].get<std::string>());
  for (const auto& s : m["active_shards"]) {
    const auto id = s["id"].get<std::string>();
    auto shard = std::make_shared<ShardIndex>(
        load_shard(index_dir / "shards" / id));
    if (shard->embedder_fingerprint != snap.fingerprint)
      throw data_error("shard " + id +
                       " was built under a different embedder");
    snap.shards.push_back(std::move(shard));
  }
  return snap;
}

}  // namespace mvstream
