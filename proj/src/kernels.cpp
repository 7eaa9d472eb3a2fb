#include "mvstream/kernels.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace mvstream::kernels {

float dot(std::span<const float> a, std::span<const float> b) {
  float s = 0.0f;
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

std::uint32_t argmax_dot(std::span<const float> v, const float* centroids,
                         std::uint32_t k, std::uint32_t dim) {
  std::uint32_t best = 0;
  float best_s = -std::numeric_limits<float>::infinity();
  for (std::uint32_t c = 0; c < k; ++c) {
    const float s = dot(v, {centroids + std::size_t(c) * dim, dim});
    if (s > best_s) {  // strict: ties keep the lowest index
      best_s = s;
      best = c;
    }
  }
  return best;
}

std::uint32_t argmin_l2(std::span<const float> v, const float* centroids,
                        const float* centroid_sqnorm, std::uint32_t k,
                        std::uint32_t dim, float* out_d2) {
  // ||v - c||^2 = ||v||^2 - 2 v.c + ||c||^2; the ||v||^2 term is common and
  // added back at the end
  std::uint32_t best = 0;
  float best_d = std::numeric_limits<float>::infinity();
  for (std::uint32_t c = 0; c < k; ++c) {
    const float d = centroid_sqnorm[c] -
                    2.0f * dot(v, {centroids + std::size_t(c) * dim, dim});
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (out_d2) {
    float v2 = dot(v, v);
    float d2 = best_d + v2;
    *out_d2 = d2 > 0.0f ? d2 : 0.0f;
  }
  return best;
}

void assign_argmax_dot_serial(const float* points, std::size_t n,
                              const float* centroids, std::uint32_t k,
                              std::uint32_t dim, std::uint32_t* out) {
  for (std::size_t i = 0; i < n; ++i)
    out[i] = argmax_dot({points + i * dim, dim}, centroids, k, dim);
}

void assign_argmax_dot(const float* points, std::size_t n,
                       const float* centroids, std::uint32_t k,
                       std::uint32_t dim, std::uint32_t* out) {
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < std::int64_t(n); ++i)
    out[i] = argmax_dot({points + std::size_t(i) * dim, dim}, centroids, k,
                        dim);
}

void assign_argmin_l2_serial(const float* points, std::size_t n,
                             const float* centroids, std::uint32_t k,
                             std::uint32_t dim, std::uint32_t* out,
                             float* out_d2) {
  std::vector<float> sq(k);
  for (std::uint32_t c = 0; c < k; ++c) {
    std::span<const float> row{centroids + std::size_t(c) * dim, dim};
    sq[c] = dot(row, row);
  }
  for (std::size_t i = 0; i < n; ++i)
    out[i] = argmin_l2({points + i * dim, dim}, centroids, sq.data(), k, dim,
                       out_d2 ? out_d2 + i : nullptr);
}

void assign_argmin_l2(const float* points, std::size_t n,
                      const float* centroids, std::uint32_t k,
                      std::uint32_t dim, std::uint32_t* out, float* out_d2) {
  std::vector<float> sq(k);
  for (std::uint32_t c = 0; c < k; ++c) {
    std::span<const float> row{centroids + std::size_t(c) * dim, dim};
    sq[c] = dot(row, row);
  }
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < std::int64_t(n); ++i)
    out[i] = argmin_l2({points + std::size_t(i) * dim, dim}, centroids,
                       sq.data(), k, dim, out_d2 ? out_d2 + i : nullptr);
}

double maxsim(const TokenMatrix& query, const TokenMatrix& passage) {
  if (passage.rows() == 0) return -std::numeric_limits<double>::infinity();
  double score = 0.0;
  for (std::size_t qi = 0; qi < query.rows(); ++qi) {
    const auto q = query.row(qi);
    float best = -std::numeric_limits<float>::infinity();
    for (std::size_t pj = 0; pj < passage.rows(); ++pj) {
      const float s = dot(q, passage.row(pj));
      if (s > best) best = s;
    }
    score += best;
  }
  return score;
}

void maxsim_batch_serial(const TokenMatrix& query,
                         std::span<const TokenMatrix> passages, double* out) {
  for (std::size_t i = 0; i < passages.size(); ++i)
    out[i] = maxsim(query, passages[i]);
}

void maxsim_batch(const TokenMatrix& query,
                  std::span<const TokenMatrix> passages, double* out) {
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < std::int64_t(passages.size()); ++i)
    out[i] = maxsim(query, passages[std::size_t(i)]);
}

std::vector<std::uint32_t> top_by_dot(std::span<const float> v,
                                      const float* centroids, std::uint32_t k,
                                      std::uint32_t dim, std::uint32_t n) {
  if (n > k) n = k;
  std::vector<std::pair<float, std::uint32_t>> scored(k);
  for (std::uint32_t c = 0; c < k; ++c)
    scored[c] = {dot(v, {centroids + std::size_t(c) * dim, dim}), c};
  std::partial_sort(scored.begin(), scored.begin() + n, scored.end(),
                    [](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first > b.first;
                      return a.second < b.second;
                    });
  std::vector<std::uint32_t> out(n);
  for (std::uint32_t i = 0; i < n; ++i) out[i] = scored[i].second;
  return out;
}

}  // namespace mvstream::kernels
