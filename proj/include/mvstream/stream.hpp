#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mvstream/eval.hpp"
#include "mvstream/types.hpp"

namespace mvstream {

struct DocumentRecord {
  std::string doc_id;
  Timestamp timestamp = 0;
  std::string title;
  std::vector<std::uint64_t> tokens;  // body after tokenization
};

struct DateCandidates {
  std::optional<Timestamp> extracted_date;
  std::optional<Timestamp> last_modified;
  std::optional<Timestamp> header_date;
  Timestamp crawl_date = 0;  // always present; fallback of last resort
};

struct PassageRecord {
  PassageId passage_id = 0;
  std::string doc_id;
  std::uint32_t window_index = 0;
  std::vector<std::uint64_t> tokens;
};

struct Query {
  std::string query_id;
  std::string text;
};

// Synthetic concept-drift stream. Concepts are unit vectors that become
// available at their birth fraction; a document drawn at stream fraction f
// samples uniformly among concepts born at or before f.
struct SyntheticStreamSpec {
  std::uint64_t n_docs = 2400;
  std::uint64_t n_concepts = 16;
  std::vector<double> concept_birth_times;  // ascending, first must be 0.0
  std::uint32_t tokens_per_doc = 12;
  std::uint32_t dim = 16;
  std::uint32_t n_queries = 48;
  std::uint32_t query_tokens = 4;
  double noise_scale = 0.25;
  std::uint64_t seed = 42;

  void validate() const;  // throws config_error
  // evenly staggered births c/n_concepts (or all zero for a stationary stream)
  static std::vector<double> uniform_births(std::uint64_t n_concepts);
};

struct DriftStream {
  std::vector<DocumentRecord> docs;  // already in stream order
  std::vector<Query> queries;        // text = space-separated token ids
  RelevanceJudgments qrels;          // grade 1 for same-concept docs, else 0
  std::vector<std::uint32_t> doc_concept;  // generator label per doc
};

// Priority: extraction date, then last-modified, then header date, then crawl
// date. Total because crawl_date is always present.
Timestamp resolve_date(const DateCandidates& cands);

// Ascending by (timestamp, doc_id). Duplicate doc_ids are rejected with
// data_error.
std::vector<DocumentRecord> order_stream(std::vector<DocumentRecord> docs);

// Non-overlapping windows of max_passage_tokens; the last window holds the
// remainder. Empty documents yield no passages. passage ids are assigned from
// the running counter in window order.
std::vector<PassageRecord> split_passages(const DocumentRecord& doc,
                                          std::uint32_t max_passage_tokens,
                                          PassageId& next_passage_id);

DriftStream generate_drift_stream(const SyntheticStreamSpec& spec);

// Token ids carry their concept in the high bits so the synthetic embedder
// can recover it without shared state.
inline constexpr int kConceptShift = 20;
inline std::uint64_t make_token(std::uint64_t concept_id,
                                std::uint64_t nonce) {
  return (concept_id << kConceptShift) |
         (nonce & ((1ULL << kConceptShift) - 1));
}
inline std::uint64_t token_concept(std::uint64_t token_id) {
  return token_id >> kConceptShift;
}

// Corpus files are JSON-lines: {"doc_id","title","body","date",
// "last_modified","header_date","crawl_date"}; date fields are ISO dates or
// epoch seconds, body is whitespace-tokenized (numeric tokens parse as ids,
// anything else hashes).
std::vector<DocumentRecord> read_corpus_jsonl(const std::filesystem::path&);
void write_corpus_jsonl(const std::filesystem::path&,
                        std::span<const DocumentRecord> docs);

// doc_id<TAB>timestamp, one line per doc, in stream order
void write_stream_manifest(const std::filesystem::path&,
                           std::span<const DocumentRecord> docs);

// query_id<TAB>text
std::vector<Query> read_query_file(const std::filesystem::path&);
void write_query_file(const std::filesystem::path&, std::span<const Query>);

}  // namespace mvstream
