#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mvstream/engine.hpp"

namespace mvstream {

struct MergedResult {
  std::string query_id;
  std::vector<std::pair<std::string, double>> ranking;  // (doc_id, score)
  std::vector<double> shard_seconds;
  double merge_seconds = 0.0;
};

// MaxP document aggregation of per-shard passage lists, then a plain sort by
// (score desc, doc_id asc) cut at top_docs. Scores are compared raw across
// shards. A document appearing in two different shard lists violates the
// partition invariant and throws.
std::vector<std::pair<std::string, double>> merge_rankings(
    const std::vector<std::vector<ScoredPassage>>& per_shard,
    std::uint32_t top_docs);

// Fan-out over every active shard, n_per_shard each, then merge. Refuses
// snapshots whose shards disagree with the query embedder's fingerprint.
MergedResult search_all(const QueryEmbedding& query,
                        const EngineSnapshot& snapshot,
                        const SearchParams& params, std::uint32_t top_docs);

// TREC-style run file: query_id Q0 doc_id rank score tag
void write_run_file(const std::filesystem::path&,
                    std::span<const MergedResult> results,
                    const std::string& tag);
std::map<std::string, Ranking> read_run_file(const std::filesystem::path&);

// Loads every non-retired shard listed in the engine manifest.
EngineSnapshot load_snapshot(const std::filesystem::path& index_dir);

}  // namespace mvstream
