#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mvstream/config.hpp"
#include "mvstream/engine.hpp"
#include "mvstream/search.hpp"

namespace mvstream {

struct DriftRow {
  double checkpoint = 0.0;
  bool skipped = false;  // too little training data at this fraction
  std::uint64_t train_docs = 0;
  double ndcg20 = 0.0;
  double r1000 = 0.0;
};

struct DriftReport {
  std::vector<DriftRow> rows;
  std::string table() const;  // aligned text table
  std::string json() const;
};

// Freezes one model per checkpoint fraction (trained only on the stream
// prefix), indexes the entire stream with it, and evaluates the queries.
// Shows how a stale codebook degrades late-born topics.
DriftReport drift_sweep(const SyntheticStreamSpec& spec,
                        const EngineConfig& cfg,
                        std::span<const double> checkpoints);

struct OracleReport {
  std::map<std::string, double> oracle;   // one model over the whole stream
  std::map<std::string, double> sharded;  // full lifecycle run
  std::map<std::string, double> ratio;    // sharded / oracle
  std::string json() const;
};

// exact_mode replaces both sides with uncompressed indexes (ratios must then
// be exactly 1).
OracleReport oracle_comparison(const SyntheticStreamSpec& spec,
                               const EngineConfig& cfg,
                               bool exact_mode = false);

struct ThroughputReport {
  double wall_seconds = 0.0;
  double docs_per_hour = 0.0;
  std::uint64_t docs_ingested = 0;
  std::uint64_t doc_index_passes = 0;
  std::uint64_t token_encodes = 0;
  std::uint64_t small_seals = 0;
  std::uint64_t large_seals = 0;
  double mean_small_build_seconds = 0.0;
  double mean_large_build_seconds = 0.0;
  double mean_query_seconds = 0.0;  // max shard latency + merge, averaged
  double max_query_seconds = 0.0;
  std::string json() const;
};

ThroughputReport throughput_report(const EngineCounters& counters,
                                   std::span<const MergedResult> searches);

}  // namespace mvstream
