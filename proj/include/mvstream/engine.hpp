#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "mvstream/config.hpp"
#include "mvstream/embed.hpp"
#include "mvstream/lifecycle.hpp"
#include "mvstream/shard.hpp"

namespace mvstream {

struct EngineCounters {
  std::uint64_t docs_ingested = 0;
  std::uint64_t docs_dropped = 0;  // empty after tokenization
  std::uint64_t passages_ingested = 0;
  std::uint64_t doc_index_passes = 0;
  std::uint64_t token_encodes = 0;  // compressed encodes only
  std::uint64_t small_seals = 0;
  std::uint64_t large_seals = 0;
  double small_build_seconds = 0.0;
  double large_build_seconds = 0.0;
  double ingest_wall_seconds = 0.0;
};

// The active shard set at one instant. Searchers hold the snapshot; later
// ingests never mutate shards already published.
struct EngineSnapshot {
  std::vector<std::shared_ptr<const ShardIndex>> shards;
  std::array<std::uint8_t, 32> fingerprint{};
};

// Streaming ingest with the hierarchical shard lifecycle:
//   - until both bootstrap thresholds are met and no model exists, documents
//     accumulate in an exact (uncompressed) bootstrap shard;
//   - afterwards each document is encoded into the incomplete shard with the
//     most recent sealed model (or held raw while none exists yet);
//   - every B-th document seals a small shard whose model is trained on its
//     own B documents, re-indexing them;
//   - the k-th small shard of an A-block triggers the large rebuild: one
//     model over all A documents, the k smalls retire.
// Every document is indexed exactly three times.
class StreamingEngine {
 public:
  StreamingEngine(EngineConfig cfg, std::shared_ptr<const Embedder> embedder,
                  std::filesystem::path out_dir = {});

  // Reopens a persisted index. Durable state is everything up to the last
  // large-block boundary; the caller must replay the stream after
  // replay_from() and may rely on the replay being deterministic.
  static StreamingEngine resume(EngineConfig cfg,
                                std::shared_ptr<const Embedder> embedder,
                                const std::filesystem::path& out_dir);

  Ordinal replay_from() const { return replay_from_; }

  void ingest(const DocumentRecord& doc);
  // Flushes transient views (bootstrap remainder, incomplete shard) and the
  // final manifest so a separate search process sees the full partition.
  void finish();

  EngineSnapshot snapshot() const;

  const std::vector<LifecycleEvent>& events() const { return events_; }
  const EngineCounters& counters() const { return counters_; }
  const EngineConfig& config() const { return cfg_; }
  std::uint64_t docs_ingested() const { return n_ingested_; }
  std::uint64_t stream_hash() const { return stream_hash_; }
  std::uint32_t index_passes_of(const std::string& doc_id) const;
  bool bootstrap_active() const { return !thresholds_met_ || !prior_; }
  std::size_t active_small_count() const { return smalls_.size(); }
  std::size_t active_large_count() const { return larges_.size(); }

  // Asserts every ingested document lives in exactly one active shard or
  // pending buffer. Throws invariant_violation.
  void verify_partition() const;

  // Running hash of (doc_id, timestamp) pairs; resume compares it against the
  // manifest to reject a changed corpus.
  static std::uint64_t stream_hash_step(std::uint64_t h,
                                        const DocumentRecord& doc);

 private:
  enum class Loc { RawPending, CodedPending, Sealed };

  struct IngestedDoc {
    Ordinal ordinal = 0;
    std::string doc_id;
    std::vector<PassageRecord> passages;
    std::vector<TokenMatrix> vectors;
    std::vector<CompressedPassage> codes;  // CodedPending only
    Loc loc = Loc::RawPending;
  };

  struct resume_tag {};
  StreamingEngine(resume_tag, EngineConfig cfg,
                  std::shared_ptr<const Embedder> embedder,
                  std::filesystem::path out_dir);

  void seal_small_block(Ordinal first, Ordinal last);
  void seal_large_block();
  // Seals every complete B-block not yet sealed; the k-th small of a block
  // chains into the large rebuild. Also the bootstrap-exit catch-up path.
  void maybe_seal_blocks();
  std::vector<PassageEntry> entries_for(Ordinal first, Ordinal last) const;
  std::shared_ptr<const ShardIndex> raw_view() const;
  std::shared_ptr<const ShardIndex> coded_view() const;
  void persist_manifest(bool complete);
  void persist_shard(const ShardIndex& shard);
  std::filesystem::path shard_dir(const std::string& id) const;

  EngineConfig cfg_;
  std::shared_ptr<const Embedder> embedder_;
  std::array<std::uint8_t, 32> fingerprint_{};
  std::filesystem::path dir_;  // empty => in-memory only

  std::vector<IngestedDoc> buffer_;  // docs since the last large seal
  std::vector<std::shared_ptr<const ShardIndex>> larges_;
  std::vector<std::shared_ptr<const ShardIndex>> smalls_;  // current block
  std::vector<std::string> retired_;
  std::shared_ptr<const ShardModel> prior_;  // newest sealed active model

  Ordinal n_ingested_ = 0;
  PassageId next_passage_id_ = 0;
  std::uint64_t boot_passages_ = 0;
  bool thresholds_met_ = false;
  Ordinal replay_from_ = 0;
  std::uint64_t stream_hash_ = 1469598103934665603ULL;  // FNV offset basis
  // state at the last large boundary, for crash recovery
  Ordinal durable_ordinal_ = 0;
  PassageId durable_next_passage_id_ = 0;
  std::uint64_t durable_stream_hash_ = 1469598103934665603ULL;

  std::vector<LifecycleEvent> events_;
  EngineCounters counters_;
  std::unordered_map<std::string, std::uint32_t> passes_;

  mutable std::shared_ptr<const ShardIndex> raw_view_cache_;
  mutable std::shared_ptr<const ShardIndex> coded_view_cache_;
  mutable bool views_dirty_ = true;
};

std::uint64_t stream_prefix_hash(std::span<const DocumentRecord> docs,
                                 std::size_t count);

}  // namespace mvstream
