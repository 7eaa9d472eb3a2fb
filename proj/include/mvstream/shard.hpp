#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mvstream/codec.hpp"
#include "mvstream/stream.hpp"

namespace mvstream {

enum class ShardKind { Compressed, Exact };

enum class ShardPhase { Bootstrap, SmallPriorModel, SmallOwnModel, Large };

const char* to_string(ShardKind k);
const char* to_string(ShardPhase p);
ShardKind shard_kind_from_string(const std::string&);
ShardPhase shard_phase_from_string(const std::string&);

struct Posting {
  PassageId passage_id = 0;
  std::uint32_t position = 0;  // token position within the passage
};

struct PassageInfo {
  std::string doc_id;
  std::uint32_t window_index = 0;
};

// Immutable once built. Compressed shards carry a model, per-passage codes
// and centroid postings; exact shards carry raw token matrices (the bootstrap
// phase and test oracles).
struct ShardIndex {
  std::string shard_id;
  ShardKind kind = ShardKind::Exact;
  ShardPhase phase = ShardPhase::Bootstrap;
  std::pair<Ordinal, Ordinal> doc_range{0, 0};
  std::array<std::uint8_t, 32> embedder_fingerprint{};

  std::shared_ptr<const ShardModel> model;     // compressed only
  std::vector<CompressedPassage> codes;        // compressed, passage order
  std::vector<std::vector<Posting>> inverted;  // K lists, passage_id ascending

  std::vector<TokenMatrix> raw;  // exact only, passage order

  std::vector<PassageId> passage_ids;  // passage order (both kinds)
  std::vector<PassageInfo> info;       // aligned with passage_ids
  std::unordered_map<PassageId, std::uint32_t> index_of;
  std::uint64_t n_tokens = 0;

  std::size_t n_passages() const { return passage_ids.size(); }
};

// Reference to one passage's embeddings during a build.
struct PassageEntry {
  PassageId passage_id = 0;
  std::string doc_id;
  std::uint32_t window_index = 0;
  const TokenMatrix* vectors = nullptr;
};

ShardIndex build_compressed_shard(
    std::string shard_id, ShardPhase phase,
    std::pair<Ordinal, Ordinal> doc_range,
    std::span<const PassageEntry> passages,
    std::shared_ptr<const ShardModel> model,
    const std::array<std::uint8_t, 32>& embedder_fingerprint);

// Same shape from pre-encoded codes (used for the incomplete shard's
// published view; no re-encoding happens here).
ShardIndex build_compressed_shard_from_codes(
    std::string shard_id, ShardPhase phase,
    std::pair<Ordinal, Ordinal> doc_range,
    std::vector<CompressedPassage> codes, std::vector<PassageInfo> info,
    std::shared_ptr<const ShardModel> model,
    const std::array<std::uint8_t, 32>& embedder_fingerprint);

ShardIndex build_exact_shard(
    std::string shard_id, ShardPhase phase,
    std::pair<Ordinal, Ordinal> doc_range,
    std::span<const PassageEntry> passages,
    const std::array<std::uint8_t, 32>& embedder_fingerprint);

struct SearchParams {
  std::uint32_t n_per_shard = 50;
  std::uint32_t nprobe = 4;
  std::uint32_t candidate_factor = 4;

  bool operator==(const SearchParams&) const = default;
};

struct ScoredPassage {
  PassageId passage_id = 0;
  std::string doc_id;
  double score = 0.0;
};

double exact_maxsim(const TokenMatrix& query, const TokenMatrix& passage);

// Compressed shards run the three-stage cascade: probe nprobe centroids per
// query token, score the posting candidates with centroids only (query tokens
// without a probed match contribute 0), keep candidate_factor * n_per_shard,
// then decode survivors and score exactly. Exact shards score everything.
// Returns the shard's best passage per document, (score desc, passage_id asc),
// at most n_per_shard entries.
std::vector<ScoredPassage> search_shard(const QueryEmbedding& query,
                                        const ShardIndex& shard,
                                        const SearchParams& params);

// Shard directory: manifest.json plus model.psmd/codes.pscd/inverted.psiv or
// vectors.psev, and passage_map.pspm. Rebuilding from identical inputs yields
// byte-identical files.
void save_shard(const ShardIndex& shard, const std::filesystem::path& dir);
ShardIndex load_shard(const std::filesystem::path& dir);

}  // namespace mvstream
