#include "mvstream/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

#include "doctest.h"
#include "mvstream/rng.hpp"
#include "mvstream/stream.hpp"
#include "test_util.hpp"

using namespace mvstream;

namespace {

std::array<std::uint8_t, 32> fp() {
  std::array<std::uint8_t, 32> f{};
  f[0] = 0xFE;
  return f;
}

// one matrix per passage, all rows drawn from the given concepts
std::vector<TokenMatrix> concept_passages(const SyntheticEmbedder& e,
                                          std::span<const int> concepts,
                                          std::uint32_t tokens_each,
                                          std::uint64_t nonce0) {
  std::vector<TokenMatrix> out;
  std::uint64_t nonce = nonce0;
  for (int c : concepts) {
    TokenMatrix m(e.dim());
    for (std::uint32_t t = 0; t < tokens_each; ++t) {
      const auto v = e.embed_token(make_token(std::uint64_t(c), nonce++));
      m.push_row(v);
    }
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace

TEST_CASE("K policy clamps the square-root rule") {
  KMeansPolicy p;
  CHECK(p.choose_K(2000) == 716);  // round(16 * sqrt(2000))
  CHECK(p.choose_K(0) == 16);      // K_min floor
  CHECK(p.choose_K(1) == 16);
  p.K_max = 100;
  CHECK(p.choose_K(2000) == 100);
  p.K_min = 50;
  CHECK(p.choose_K(4) == 50);
  KMeansPolicy q{0.4, 8, 65536};
  CHECK(q.choose_K(6144) == 31);  // round(0.4 * 78.38)
}

TEST_CASE("training sample takes everything when it fits") {
  std::vector<TokenMatrix> ps = {testutil::random_matrix(5, 4, 1),
                                 testutil::random_matrix(3, 4, 2)};
  std::vector<PassageId> ids = {11, 22};
  const auto s = sample_training_tokens(ps, ids, 100, 9);
  CHECK(s.tokens.rows() == 8);
  REQUIRE(s.source_passages.size() == 8);
  int from_first = 0;
  for (auto id : s.source_passages) from_first += id == 11;
  CHECK(from_first == 5);
}

TEST_CASE("training sample is an exact-size subset, deterministic in seed") {
  std::vector<TokenMatrix> ps = {testutil::random_matrix(40, 4, 3),
                                 testutil::random_matrix(60, 4, 4)};
  std::vector<PassageId> ids = {1, 2};
  const auto a = sample_training_tokens(ps, ids, 25, 5);
  const auto b = sample_training_tokens(ps, ids, 25, 5);
  CHECK(a.tokens == b.tokens);
  CHECK(a.source_passages == b.source_passages);
  REQUIRE(a.tokens.rows() == 25);

  std::set<std::vector<float>> pool;
  for (const auto& m : ps)
    for (std::size_t r = 0; r < m.rows(); ++r)
      pool.insert({m.row(r).begin(), m.row(r).end()});
  for (std::size_t r = 0; r < a.tokens.rows(); ++r)
    CHECK(pool.count({a.tokens.row(r).begin(), a.tokens.row(r).end()}) == 1);

  const auto c = sample_training_tokens(ps, ids, 25, 6);
  CHECK(a.tokens != c.tokens);
}

TEST_CASE("sampling represents passages in proportion to their token count") {
  std::vector<TokenMatrix> ps = {testutil::random_matrix(9000, 2, 7),
                                 testutil::random_matrix(1000, 2, 8)};
  std::vector<PassageId> ids = {1, 2};
  double mean_small = 0.0;
  const int draws = 100;
  for (int d = 0; d < draws; ++d) {
    const auto s = sample_training_tokens(ps, ids, 1000, 1000 + d);
    REQUIRE(s.tokens.rows() == 1000);
    int small = 0;
    for (auto id : s.source_passages) small += id == 2;
    mean_small += double(small) / draws;
  }
  // expectation 100 of 1000; the mean of 100 draws is tight around it
  CHECK(mean_small > 90.0);
  CHECK(mean_small < 110.0);
}

TEST_CASE("sample rejects malformed input") {
  std::vector<TokenMatrix> ps = {testutil::random_matrix(5, 4, 1)};
  std::vector<PassageId> ids = {1, 2};
  CHECK_THROWS_AS(sample_training_tokens(ps, ids, 10, 1), config_error);
  ids = {};
  CHECK_THROWS_AS(sample_training_tokens(ps, ids, 0, 1), config_error);
  std::vector<TokenMatrix> empty;
  CHECK_THROWS_AS(sample_training_tokens(empty, ids, 10, 1), data_error);
}

TEST_CASE("kmeans recovers well-separated concepts") {
  SyntheticEmbedder e(16, 4, 0.05, 42);
  const int concepts[4] = {0, 1, 2, 3};
  TokenMatrix all(16);
  std::vector<int> label;
  for (int c : concepts)
    for (int i = 0; i < 200; ++i) {
      all.push_row(e.embed_token(make_token(std::uint64_t(c), std::uint64_t(i))));
      label.push_back(c);
    }
  std::vector<double> distortion;
  const auto cents = train_kmeans(all, 4, 10, 42, &distortion);
  REQUIRE(cents.size() == 4 * 16);
  REQUIRE(!distortion.empty());
  for (std::size_t i = 1; i < distortion.size(); ++i)
    CHECK(distortion[i] <= distortion[i - 1] + 1e-9);

  // purity against generator labels
  std::vector<std::array<int, 4>> votes(4, {0, 0, 0, 0});
  for (std::size_t r = 0; r < all.rows(); ++r) {
    std::uint32_t best = 0;
    double bd = -1e300;
    for (std::uint32_t k = 0; k < 4; ++k) {
      double dot = 0;
      for (int j = 0; j < 16; ++j)
        dot += double(all.row(r)[j]) * cents[k * 16 + j];
      if (dot > bd) {
        bd = dot;
        best = k;
      }
    }
    votes[best][label[r]]++;
  }
  int pure = 0;
  for (const auto& v : votes) pure += *std::max_element(v.begin(), v.end());
  CHECK(double(pure) / double(all.rows()) > 0.95);
}

TEST_CASE("kmeans validates its arguments") {
  TokenMatrix m = testutil::random_matrix(4, 2, 1);
  CHECK_THROWS_AS(train_kmeans(m, 0, 5, 1), config_error);
  CHECK_THROWS_AS(train_kmeans(m, 5, 5, 1), config_error);
  CHECK_THROWS_AS(train_kmeans(m, 2, 0, 1), config_error);
}

TEST_CASE("kmeans is deterministic and survives duplicate points") {
  TokenMatrix m(4);
  const auto row = testutil::random_matrix(1, 4, 2);
  for (int i = 0; i < 20; ++i) m.push_row(row.row(0));
  m.push_row(testutil::random_matrix(1, 4, 3).row(0));
  const auto a = train_kmeans(m, 3, 8, 7);  // K exceeds distinct points
  const auto b = train_kmeans(m, 3, 8, 7);
  CHECK(a == b);
  REQUIRE(a.size() == 3 * 4);
  for (float v : a) CHECK(std::isfinite(v));
}

TEST_CASE("bucket quantization matches the hand-worked median case") {
  const auto q = compute_bucket_quantization({-2.0f, -1.0f, 1.0f, 2.0f}, 1);
  REQUIRE(q.cutoffs.size() == 1);
  REQUIRE(q.values.size() == 2);
  CHECK(q.cutoffs[0] == 0.0f);
  CHECK(q.values[0] == -1.5f);
  CHECK(q.values[1] == 1.5f);
}

TEST_CASE("bucket quantization approaches the analytic uniform quantiles") {
  SplitMix64 g(123);
  std::vector<float> comp(100000);
  for (auto& v : comp) v = float(g.uniform01());
  const auto q = compute_bucket_quantization(std::move(comp), 2);
  REQUIRE(q.cutoffs.size() == 3);
  REQUIRE(q.values.size() == 4);
  const float cut_expect[3] = {0.25f, 0.5f, 0.75f};
  const float val_expect[4] = {0.125f, 0.375f, 0.625f, 0.875f};
  for (int i = 0; i < 3; ++i) CHECK(std::abs(q.cutoffs[i] - cut_expect[i]) < 0.02);
  for (int i = 0; i < 4; ++i) CHECK(std::abs(q.values[i] - val_expect[i]) < 0.02);
}

TEST_CASE("bucket quantization needs enough distinct mass") {
  CHECK_THROWS_AS(compute_bucket_quantization({}, 1), data_error);
  CHECK_THROWS_AS(compute_bucket_quantization({1.0f}, 1), data_error);
  CHECK_THROWS_AS(compute_bucket_quantization({0.f, 1.f, 2.f}, 2), data_error);
  CHECK_THROWS_AS(compute_bucket_quantization({1.f, 2.f}, 3), config_error);
}

TEST_CASE("build_shard_model is deterministic and self-describing") {
  SyntheticEmbedder e(16, 4, 0.2, 42);
  const int concepts[] = {0, 1, 2, 3, 0, 1, 2, 3};
  const auto ps = concept_passages(e, concepts, 25, 0);
  std::vector<PassageId> ids(ps.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = PassageId(i + 1);

  ModelTrainConfig cfg;
  cfg.policy = {1.0, 4, 64};
  cfg.max_training_tokens = 150;
  cfg.residual_bits = 2;
  cfg.kmeans_iters = 6;
  cfg.seed = 99;

  const auto a = build_shard_model(ps, ids, cfg, fp(), "S000001");
  const auto b = build_shard_model(ps, ids, cfg, fp(), "S000001");
  CHECK(a == b);
  CHECK(a.model_id == "S000001");
  CHECK(a.trained_on == "S000001");
  CHECK(a.dim == 16);
  CHECK(a.bits == 2);
  CHECK(a.K == 12);  // round(sqrt(150)) = 12, inside [4, 64]
  CHECK(a.centroids.size() == std::size_t(a.K) * 16);
  CHECK(a.cutoffs.size() == 3);
  CHECK(a.values.size() == 4);
  CHECK(std::is_sorted(a.cutoffs.begin(), a.cutoffs.end()));
  CHECK(a.embedder_fingerprint == fp());
}

TEST_CASE("K never exceeds the sample size") {
  SyntheticEmbedder e(8, 2, 0.2, 1);
  const int concepts[] = {0, 1};
  const auto ps = concept_passages(e, concepts, 3, 0);  // 6 tokens total
  ModelTrainConfig cfg;
  cfg.policy = {16.0, 16, 65536};  // would ask for K >= 16
  const auto m = build_shard_model(ps, {}, cfg, fp(), "s");
  CHECK(m.K == 6);
}

TEST_CASE("model files round trip byte-identically") {
  testutil::TempDir tmp("model");
  SyntheticEmbedder e(8, 3, 0.2, 5);
  const int concepts[] = {0, 1, 2};
  const auto ps = concept_passages(e, concepts, 30, 0);
  ModelTrainConfig cfg;
  cfg.policy = {1.0, 2, 32};
  const auto m = build_shard_model(ps, {}, cfg, fp(), "L000001");

  m.save(tmp / "a.psmd");
  m.save(tmp / "b.psmd");
  CHECK(testutil::read_file(tmp / "a.psmd") ==
        testutil::read_file(tmp / "b.psmd"));
  const auto back = ShardModel::load(tmp / "a.psmd");
  CHECK(back == m);
  CHECK(back.model_id == "L000001");
}

TEST_CASE("model loader rejects a tampered file") {
  testutil::TempDir tmp("model");
  SyntheticEmbedder e(8, 2, 0.2, 5);
  const int concepts[] = {0, 1};
  const auto ps = concept_passages(e, concepts, 20, 0);
  ModelTrainConfig cfg;
  cfg.policy = {1.0, 2, 32};
  build_shard_model(ps, {}, cfg, fp(), "x").save(tmp / "m.psmd");
  auto bytes = testutil::read_file(tmp / "m.psmd");
  bytes[0] ^= 0x40;
  {
    std::ofstream out(tmp / "m.psmd", std::ios::binary);
    out.write(bytes.data(), std::streamsize(bytes.size()));
  }
  CHECK_THROWS_AS(ShardModel::load(tmp / "m.psmd"), data_error);
}

TEST_CASE("a stale codebook reconstructs unseen concepts worse") {
  SyntheticEmbedder e(16, 8, 0.25, 42);
  const int seen[] = {0, 0, 0, 0};
  const auto ps = concept_passages(e, seen, 50, 0);
  ModelTrainConfig cfg;
  cfg.policy = {1.0, 4, 64};
  cfg.residual_bits = 1;
  const auto m = build_shard_model(ps, {}, cfg, fp(), "stale");

  auto mean_err = [&](int concept_id) {
    double err = 0;
    const int n = 200;
    for (int i = 0; i < n; ++i) {
      const auto v =
          e.embed_token(make_token(std::uint64_t(concept_id), 5000 + i));
      // decode through the public codec path lives in codec tests; here the
      // reconstruction uses the nearest centroid alone, the model's coarse part
      std::uint32_t best = 0;
      double bd = -1e300;
      for (std::uint32_t k = 0; k < m.K; ++k) {
        double dot = 0;
        for (int j = 0; j < 16; ++j)
          dot += double(v[j]) * m.centroid(k)[j];
        if (dot > bd) {
          bd = dot;
          best = k;
        }
      }
      double d2 = 0;
      for (int j = 0; j < 16; ++j) {
        const double d = double(v[j]) - m.centroid(best)[j];
        d2 += d * d;
      }
      err += std::sqrt(d2) / n;
    }
    return err;
  };
  CHECK(mean_err(7) > mean_err(0));
}
