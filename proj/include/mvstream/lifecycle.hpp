#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "mvstream/types.hpp"

namespace mvstream {

// Hierarchy of one incomplete shard, up to k-1 sealed small shards of B docs
// each, and large shards of A = k*B docs that replace their k smalls.
struct LifecycleConfig {
  std::uint64_t A = 2000;
  std::uint64_t B = 500;
  std::uint64_t k = 4;
  std::uint64_t min_bootstrap_passages = 2000;
  std::uint64_t min_bootstrap_docs = 0;  // 0 means "use B"

  std::uint64_t effective_min_bootstrap_docs() const {
    return min_bootstrap_docs == 0 ? B : min_bootstrap_docs;
  }
  void validate() const;  // A == k*B, k >= 2, B >= 1

  bool operator==(const LifecycleConfig&) const = default;
};

struct ShardCounts {
  std::uint64_t n_large = 0;
  std::uint64_t n_small = 0;
  std::uint64_t n_incomplete = 0;
  std::uint64_t total = 0;

  bool operator==(const ShardCounts&) const = default;
};

// Active shard arithmetic for N ingested docs: floor(N/A) large shards, the
// remainder split into floor(r/B) smalls plus one incomplete shard if any
// docs are left over.
ShardCounts shard_count(std::uint64_t n_docs, std::uint64_t A,
                        std::uint64_t B);

// Every document is indexed exactly this many times over a full run: once
// into the exact bootstrap or the incomplete shard, once into its small
// shard's own-model build, once into the large rebuild.
inline constexpr std::uint32_t kIndexPassesPerDoc = 3;
inline constexpr std::uint32_t reindex_count() { return kIndexPassesPerDoc; }

struct EventBootstrapExact {
  Ordinal ordinal = 0;
  std::string doc_id;
};

struct EventIndexedIntoIncomplete {
  Ordinal ordinal = 0;
  std::string doc_id;
  std::string model_used;  // "bootstrap-exact" before any model exists
};

struct EventSmallShardSealed {
  Ordinal ordinal = 0;
  std::string shard_id;
  std::string model_id;
};

struct EventLargeShardSealed {
  Ordinal ordinal = 0;
  std::string shard_id;
  std::string model_id;
  std::vector<std::string> retired;  // the k small shards it replaces
};

using LifecycleEvent =
    std::variant<EventBootstrapExact, EventIndexedIntoIncomplete,
                 EventSmallShardSealed, EventLargeShardSealed>;

std::string to_string(const LifecycleEvent& ev);

}  // namespace mvstream
