#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mvstream/embed.hpp"
#include "mvstream/types.hpp"

namespace mvstream {

// K = clamp(round(c_mult * sqrt(n_sampled_tokens)), K_min, K_max), further
// clamped to the sample size.
struct KMeansPolicy {
  double c_mult = 16.0;
  std::uint32_t K_min = 16;
  std::uint32_t K_max = 65536;

  std::uint32_t choose_K(std::uint64_t n_sampled) const;

  bool operator==(const KMeansPolicy&) const = default;
};

struct ModelTrainConfig {
  KMeansPolicy policy;
  std::uint64_t max_training_tokens = 32768;
  std::uint8_t residual_bits = 1;  // one of 1, 2, 4, 8
  std::uint32_t kmeans_iters = 10;
  std::uint64_t seed = 42;

  bool operator==(const ModelTrainConfig&) const = default;
};

// Per-shard codebook: K centroids plus a global residual bucketization.
// cutoffs are strictly ascending bucket boundaries (2^b - 1 of them), values
// the per-bucket reconstruction levels (2^b). Centroids are arithmetic means
// and deliberately not re-normalized.
struct ShardModel {
  std::string model_id;    // == trained_on by construction
  std::string trained_on;  // shard id the training sample came from
  std::uint32_t dim = 0;
  std::uint32_t K = 0;
  std::uint8_t bits = 1;
  std::vector<float> centroids;  // K x dim
  std::vector<float> cutoffs;
  std::vector<float> values;
  std::array<std::uint8_t, 32> embedder_fingerprint{};

  std::span<const float> centroid(std::uint32_t i) const {
    return {centroids.data() + std::size_t(i) * dim, dim};
  }

  void save(const std::filesystem::path&) const;
  static ShardModel load(const std::filesystem::path&);

  bool operator==(const ShardModel&) const = default;
};

struct TrainingSample {
  TokenMatrix tokens;
  std::vector<PassageId> source_passages;  // aligned with rows; may be empty
};

// Uniform sample without replacement over the concatenation of all passage
// rows; takes everything when the total fits. Deterministic in seed. ids may
// be empty (source_passages is then left empty).
TrainingSample sample_training_tokens(std::span<const TokenMatrix> passages,
                                      std::span<const PassageId> ids,
                                      std::uint64_t max_tokens,
                                      std::uint64_t seed);

// Lloyd iterations with k-means++ seeding. Empty clusters are re-seeded from
// the point farthest from its centroid. Converged assignments end the loop
// early. Returns K x dim centroids; appends the post-assignment distortion of
// each executed iteration to distortion_log when given.
std::vector<float> train_kmeans(const TokenMatrix& sample, std::uint32_t k,
                                std::uint32_t iters, std::uint64_t seed,
                                std::vector<double>* distortion_log = nullptr);

struct BucketQuantization {
  std::vector<float> cutoffs;
  std::vector<float> values;
};

// Global quantile bucketization of the pooled residual components: cutoffs at
// the i/2^b quantiles (midpoint convention when the rank lands exactly
// between two order statistics), values are per-bucket means. A component on
// a cutoff belongs to the lower bucket. Requires >= 2^b distinct components.
BucketQuantization compute_bucket_quantization(std::vector<float> components,
                                               std::uint8_t bits);

// sample -> k-means -> residuals of the sample under max-dot assignment ->
// bucketization. Deterministic given config.seed.
ShardModel build_shard_model(std::span<const TokenMatrix> passages,
                             std::span<const PassageId> ids,
                             const ModelTrainConfig& cfg,
                             const std::array<std::uint8_t, 32>& fingerprint,
                             const std::string& trained_on);

}  // namespace mvstream
