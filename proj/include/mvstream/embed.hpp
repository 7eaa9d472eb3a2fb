#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mvstream/stream.hpp"
#include "mvstream/types.hpp"

namespace mvstream {

// Row-major token embedding matrix (one row per token).
struct TokenMatrix {
  std::uint32_t dim = 0;
  std::vector<float> data;

  TokenMatrix() = default;
  explicit TokenMatrix(std::uint32_t d) : dim(d) {}

  std::size_t rows() const { return dim == 0 ? 0 : data.size() / dim; }
  std::span<const float> row(std::size_t i) const {
    return {data.data() + i * dim, dim};
  }
  std::span<float> row(std::size_t i) {
    return {data.data() + i * dim, dim};
  }
  void push_row(std::span<const float> v) {
    data.insert(data.end(), v.begin(), v.end());
  }
  void reserve_rows(std::size_t n) { data.reserve(n * std::size_t(dim)); }

  bool operator==(const TokenMatrix&) const = default;
};

struct QueryEmbedding {
  std::string query_id;
  TokenMatrix mat;
};

// Contract shared by all embedders: same input always yields the same
// vectors, matrix width equals dim(), one engine uses exactly one embedder
// instance for every shard and query. The fingerprint travels inside model
// files and is re-checked at search time.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::uint32_t dim() const = 0;
  virtual TokenMatrix embed_passage(const PassageRecord& p) const = 0;
  virtual QueryEmbedding embed_query(const std::string& query_id,
                                     const std::string& text) const = 0;
  virtual std::array<std::uint8_t, 32> fingerprint() const = 0;
};

// One synthetic token vector: unit concept vector perturbed by
// noise_scale * h(token_id, seed) and re-normalized, where h is a seeded
// pseudo-random unit vector. noise_scale 0 returns the concept vector bit
// for bit.
std::vector<float> synthetic_token_vector(std::uint64_t token_id,
                                          std::span<const float> concept_vec,
                                          double noise_scale,
                                          std::uint64_t seed);

class SyntheticEmbedder : public Embedder {
 public:
  SyntheticEmbedder(std::uint32_t dim, std::uint64_t n_concepts,
                    double noise_scale, std::uint64_t seed,
                    std::uint32_t max_query_tokens = 64);

  std::uint32_t dim() const override { return dim_; }
  TokenMatrix embed_passage(const PassageRecord& p) const override;
  QueryEmbedding embed_query(const std::string& query_id,
                             const std::string& text) const override;
  std::array<std::uint8_t, 32> fingerprint() const override;

  std::span<const float> concept_vector(std::uint64_t c) const;
  std::vector<float> embed_token(std::uint64_t token_id) const;
  std::uint64_t n_concepts() const { return n_concepts_; }

 private:
  std::uint32_t dim_;
  std::uint64_t n_concepts_;
  double noise_scale_;
  std::uint64_t seed_;
  std::uint32_t max_query_tokens_;
  std::vector<float> concepts_;  // n_concepts x dim
};

// Precomputed-vector file ("PSEV"): header {magic, version u32, dim u32},
// then records {passage_id u64, n_tokens u32, n_tokens*dim float32}.
struct VectorFileRecord {
  PassageId id = 0;
  TokenMatrix mat;
};
void write_vector_file(const std::filesystem::path&, std::uint32_t dim,
                       std::span<const VectorFileRecord> records);
std::vector<VectorFileRecord> read_vector_file(const std::filesystem::path&,
                                               std::uint32_t* dim_out);

// Replays precomputed vectors keyed by passage_id. Queries come from an
// optional second vector file keyed by fnv1a64(query_id).
class FileEmbedder : public Embedder {
 public:
  explicit FileEmbedder(const std::filesystem::path& passage_vectors,
                        const std::filesystem::path& query_vectors = {},
                        std::uint32_t max_query_tokens = 64);

  std::uint32_t dim() const override { return dim_; }
  TokenMatrix embed_passage(const PassageRecord& p) const override;
  QueryEmbedding embed_query(const std::string& query_id,
                             const std::string& text) const override;
  std::array<std::uint8_t, 32> fingerprint() const override;

 private:
  std::uint32_t dim_ = 0;
  std::uint32_t max_query_tokens_;
  std::unordered_map<PassageId, TokenMatrix> passages_;
  std::unordered_map<std::uint64_t, TokenMatrix> queries_;
  std::uint64_t content_hash_ = 0;
};

}  // namespace mvstream
