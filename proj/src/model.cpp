#include "mvstream/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mvstream/io.hpp"
#include "mvstream/kernels.hpp"
#include "mvstream/rng.hpp"

namespace mvstream {

std::uint32_t KMeansPolicy::choose_K(std::uint64_t n_sampled) const {
  const auto raw =
      static_cast<std::uint64_t>(std::llround(c_mult * std::sqrt(double(n_sampled))));
  return static_cast<std::uint32_t>(std::clamp<std::uint64_t>(raw, K_min, K_max));
}

TrainingSample sample_training_tokens(std::span<const TokenMatrix> passages,
                                      std::span<const PassageId> ids,
                                      std::uint64_t max_tokens,
                                      std::uint64_t seed) {
  if (!ids.empty() && ids.size() != passages.size())
    throw config_error("sample: ids must align with passages");
  if (max_tokens == 0) throw config_error("sample: max_tokens must be > 0");

  std::uint64_t total = 0;
  std::uint32_t dim = 0;
  for (const auto& m : passages) {
    if (m.dim == 0) continue;
    if (dim == 0) dim = m.dim;
    if (m.dim != dim) throw config_error("sample: mixed dims");
    total += m.rows();
  }
  if (total == 0) throw data_error("sample: no tokens to sample from");

  std::vector<std::uint64_t> picks;
  if (total <= max_tokens) {
    picks.resize(total);
    std::iota(picks.begin(), picks.end(), 0);
  } else {
    // partial Fisher-Yates: uniform without replacement
    std::vector<std::uint64_t> idx(total);
    std::iota(idx.begin(), idx.end(), 0);
    SplitMix64 rng(mix_seed(seed, 0x5A3D));
    for (std::uint64_t i = 0; i < max_tokens; ++i)
      std::swap(idx[i], idx[i + rng.below(total - i)]);
    picks.assign(idx.begin(), idx.begin() + max_tokens);
    std::sort(picks.begin(), picks.end());
  }

  // prefix sums over rows to map flat index -> (passage, row)
  std::vector<std::uint64_t> prefix(passages.size() + 1, 0);
  for (std::size_t p = 0; p < passages.size(); ++p)
    prefix[p + 1] = prefix[p] + passages[p].rows();

  TrainingSample out;
  out.tokens = TokenMatrix(dim);
  out.tokens.reserve_rows(picks.size());
  if (!ids.empty()) out.source_passages.reserve(picks.size());
  std::size_t p = 0;
  for (auto flat : picks) {
    while (prefix[p + 1] <= flat) ++p;
    out.tokens.push_row(passages[p].row(flat - prefix[p]));
    if (!ids.empty()) out.source_passages.push_back(ids[p]);
  }
  return out;
}

std::vector<float> train_kmeans(const TokenMatrix& sample, std::uint32_t k,
                                std::uint32_t iters, std::uint64_t seed,
                                std::vector<double>* distortion_log) {
  const std::uint64_t n = sample.rows();
  const std::uint32_t dim = sample.dim;
  if (k == 0 || k > n)
    throw config_error("kmeans: need 1 <= K <= n, got K=" + std::to_string(k) +
                       " n=" + std::to_string(n));
  if (iters == 0) throw config_error("kmeans: iters must be >= 1");

  const float* X = sample.data.data();
  std::vector<float> centroids(std::size_t(k) * dim);
  SplitMix64 rng(mix_seed(seed, 0x4B4D));

  // k-means++ seeding
  {
    std::vector<float> d2(n, std::numeric_limits<float>::infinity());
    auto copy_center = [&](std::uint32_t c, std::uint64_t i) {
      std::copy_n(X + i * dim, dim, centroids.data() + std::size_t(c) * dim);
    };
    copy_center(0, rng.below(n));
    for (std::uint32_t c = 1; c < k; ++c) {
      const float* prev = centroids.data() + std::size_t(c - 1) * dim;
#pragma omp parallel for schedule(static)
      for (std::int64_t i = 0; i < std::int64_t(n); ++i) {
        float d = 0.0f;
        const float* x = X + std::size_t(i) * dim;
        for (std::uint32_t j = 0; j < dim; ++j) {
          const float diff = x[j] - prev[j];
          d += diff * diff;
        }
        if (d < d2[i]) d2[i] = d;
      }
      double total = 0.0;  // serial sum keeps the draw deterministic
      for (std::uint64_t i = 0; i < n; ++i) total += d2[i];
      std::uint64_t pick;
      if (total <= 0.0) {
        pick = rng.below(n);  // all remaining points coincide with centers
      } else {
        const double r = rng.uniform01() * total;
        double acc = 0.0;
        pick = n - 1;
        for (std::uint64_t i = 0; i < n; ++i) {
          acc += d2[i];
          if (acc > r) {
            pick = i;
            break;
          }
        }
      }
      copy_center(c, pick);
    }
  }

  std::vector<std::uint32_t> assign(n);
  std::vector<std::uint32_t> prev_assign;
  std::vector<float> d2(n);
  std::vector<double> sums(std::size_t(k) * dim);
  std::vector<std::uint64_t> counts(k);

  for (std::uint32_t it = 0; it < iters; ++it) {
    kernels::assign_argmin_l2(X, n, centroids.data(), k, dim, assign.data(),
                              d2.data());
    if (distortion_log) {
      double dist = 0.0;
      for (std::uint64_t i = 0; i < n; ++i) dist += d2[i];
      distortion_log->push_back(dist);
    }
    if (!prev_assign.empty() && prev_assign == assign) break;  // converged
    prev_assign = assign;

    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::uint64_t i = 0; i < n; ++i) {
      const std::uint32_t c = assign[i];
      counts[c]++;
      const float* x = X + i * dim;
      double* s = sums.data() + std::size_t(c) * dim;
      for (std::uint32_t j = 0; j < dim; ++j) s[j] += x[j];
    }
    for (std::uint32_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      float* cc = centroids.data() + std::size_t(c) * dim;
      const double* s = sums.data() + std::size_t(c) * dim;
      for (std::uint32_t j = 0; j < dim; ++j)
        cc[j] = float(s[j] / double(counts[c]));
    }
    // re-seed empty clusters from the farthest points, one each
    for (std::uint32_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::uint64_t far = 0;
      float far_d = -1.0f;
      for (std::uint64_t i = 0; i < n; ++i)
        if (d2[i] > far_d) {
          far_d = d2[i];
          far = i;
        }
      std::copy_n(X + far * dim, dim, centroids.data() + std::size_t(c) * dim);
      d2[far] = 0.0f;  // the next empty cluster takes the next-farthest
    }
  }
  return centroids;
}

BucketQuantization compute_bucket_quantization(std::vector<float> components,
                                               std::uint8_t bits) {
  if (bits != 1 && bits != 2 && bits != 4 && bits != 8)
    throw config_error("residual bits must be 1, 2, 4 or 8");
  const std::uint32_t n_buckets = 1u << bits;
  if (components.empty()) throw data_error("quantization: no components");

  std::sort(components.begin(), components.end());
  {
    std::uint32_t distinct = 1;
    for (std::size_t i = 1;
         i < components.size() && distinct < n_buckets; ++i)
      if (components[i] != components[i - 1]) ++distinct;
    if (distinct < n_buckets)
      throw data_error("quantization: need at least " +
                       std::to_string(n_buckets) +
                       " distinct residual components");
  }

  const std::uint64_t n = components.size();
  BucketQuantization q;
  q.cutoffs.resize(n_buckets - 1);
  for (std::uint32_t i = 1; i < n_buckets; ++i) {
    // quantile at i/n_buckets; exact integer arithmetic for the boundary case
    const std::uint64_t h = std::uint64_t(i) * n;
    if (h % n_buckets == 0) {
      const std::uint64_t idx = h / n_buckets;  // 1..n-1 given distinct check
      q.cutoffs[i - 1] =
          float((double(components[idx - 1]) + double(components[idx])) / 2.0);
    } else {
      q.cutoffs[i - 1] = components[h / n_buckets];
    }
  }
  if (!std::is_sorted(q.cutoffs.begin(), q.cutoffs.end()) ||
      std::adjacent_find(q.cutoffs.begin(), q.cutoffs.end()) !=
          q.cutoffs.end())
    throw data_error("quantization: residual distribution too degenerate");

  // bucket of x = number of cutoffs strictly below x (boundary goes low)
  q.values.assign(n_buckets, 0.0f);
  std::vector<double> acc(n_buckets, 0.0);
  std::vector<std::uint64_t> cnt(n_buckets, 0);
  std::uint32_t b = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    while (b < n_buckets - 1 && components[i] > q.cutoffs[b]) ++b;
    acc[b] += components[i];
    cnt[b]++;
  }
  for (std::uint32_t j = 0; j < n_buckets; ++j) {
    if (cnt[j]) {
      q.values[j] = float(acc[j] / double(cnt[j]));
    } else if (j == 0) {
      q.values[j] = q.cutoffs.front();
    } else if (j == n_buckets - 1) {
      q.values[j] = q.cutoffs.back();
    } else {
      q.values[j] = float((double(q.cutoffs[j - 1]) + q.cutoffs[j]) / 2.0);
    }
  }
  return q;
}

ShardModel build_shard_model(std::span<const TokenMatrix> passages,
                             std::span<const PassageId> ids,
                             const ModelTrainConfig& cfg,
                             const std::array<std::uint8_t, 32>& fingerprint,
                             const std::string& trained_on) {
  auto sample = sample_training_tokens(passages, ids, cfg.max_training_tokens,
                                       mix_seed(cfg.seed, 1));
  const std::uint64_t n = sample.tokens.rows();
  // Lloyd needs K <= n, so the policy's floor yields to a tiny sample here.
  const std::uint32_t K = static_cast<std::uint32_t>(
      std::min<std::uint64_t>(cfg.policy.choose_K(n), n));

  ShardModel m;
  m.model_id = trained_on;
  m.trained_on = trained_on;
  m.dim = sample.tokens.dim;
  m.K = K;
  m.bits = cfg.residual_bits;
  m.embedder_fingerprint = fingerprint;
  m.centroids = train_kmeans(sample.tokens, K, cfg.kmeans_iters,
                             mix_seed(cfg.seed, 2));

  // residuals of the sample under the encoder's own assignment rule
  std::vector<std::uint32_t> assign(n);
  kernels::assign_argmax_dot(sample.tokens.data.data(), n, m.centroids.data(),
                             K, m.dim, assign.data());
  std::vector<float> components(n * m.dim);
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto t = sample.tokens.row(i);
    const auto c = m.centroid(assign[i]);
    for (std::uint32_t j = 0; j < m.dim; ++j)
      components[i * m.dim + j] = t[j] - c[j];
  }
  // quantile training needs 2^bits distinct components; a degenerate sample
  // (e.g. K == n, all residuals zero) gets exact per-value buckets instead
  if (components.empty())
    throw data_error("model training: no residual components");
  std::vector<float> distinct = components;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  const std::uint32_t n_buckets = 1u << m.bits;
  if (distinct.size() >= n_buckets) {
    auto q = compute_bucket_quantization(std::move(components), m.bits);
    m.cutoffs = std::move(q.cutoffs);
    m.values = std::move(q.values);
  } else {
    m.cutoffs.assign(n_buckets - 1, distinct.back());
    m.values.assign(n_buckets, distinct.back());
    for (std::size_t i = 0; i < distinct.size(); ++i) m.values[i] = distinct[i];
    for (std::size_t i = 0; i + 1 < distinct.size(); ++i)
      m.cutoffs[i] = float((double(distinct[i]) + distinct[i + 1]) / 2.0);
  }
  return m;
}

void ShardModel::save(const std::filesystem::path& path) const {
  io::BinaryWriter w(path);
  w.magic("PSMD");
  w.u32(1);  // version
  w.u32(dim);
  w.u32(K);
  w.u8(bits);
  w.f32_array(centroids);
  w.f32_array(cutoffs);
  w.f32_array(values);
  w.bytes(embedder_fingerprint);
  w.str(trained_on);
  w.close();
}

ShardModel ShardModel::load(const std::filesystem::path& path) {
  io::BinaryReader r(path);
  r.expect_magic("PSMD");
  const std::uint32_t version = r.u32();
  if (version != 1)
    throw data_error("unsupported model version " + std::to_string(version));
  ShardModel m;
  m.dim = r.u32();
  m.K = r.u32();
  m.bits = r.u8();
  if (m.dim == 0 || m.K == 0)
    throw data_error("model file: zero dim or K");
  if (m.bits != 1 && m.bits != 2 && m.bits != 4 && m.bits != 8)
    throw data_error("model file: invalid residual bits");
  m.centroids.resize(std::size_t(m.K) * m.dim);
  r.f32_array(m.centroids);
  m.cutoffs.resize((1u << m.bits) - 1);
  r.f32_array(m.cutoffs);
  m.values.resize(1u << m.bits);
  r.f32_array(m.values);
  r.bytes(m.embedder_fingerprint);
  m.trained_on = r.str();
  m.model_id = m.trained_on;
  return m;
}

}  // namespace mvstream
