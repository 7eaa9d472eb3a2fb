#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mvstream/embed.hpp"

// Data-parallel inner loops. Every kernel has a serial reference variant with
// identical per-element arithmetic; the OpenMP variants only distribute
// independent rows, so outputs are bitwise equal. Tests rely on that.
namespace mvstream::kernels {

float dot(std::span<const float> a, std::span<const float> b);

// argmax of dot(v, centroid), ties resolved to the lowest index
std::uint32_t argmax_dot(std::span<const float> v, const float* centroids,
                         std::uint32_t k, std::uint32_t dim);

// argmin of squared L2 distance, ties to the lowest index; centroid_sqnorm
// holds precomputed ||c||^2. Optionally returns the winning distance.
std::uint32_t argmin_l2(std::span<const float> v, const float* centroids,
                        const float* centroid_sqnorm, std::uint32_t k,
                        std::uint32_t dim, float* out_d2 = nullptr);

void assign_argmax_dot_serial(const float* points, std::size_t n,
                              const float* centroids, std::uint32_t k,
                              std::uint32_t dim, std::uint32_t* out);
void assign_argmax_dot(const float* points, std::size_t n,
                       const float* centroids, std::uint32_t k,
                       std::uint32_t dim, std::uint32_t* out);

void assign_argmin_l2_serial(const float* points, std::size_t n,
                             const float* centroids, std::uint32_t k,
                             std::uint32_t dim, std::uint32_t* out,
                             float* out_d2);
void assign_argmin_l2(const float* points, std::size_t n,
                      const float* centroids, std::uint32_t k,
                      std::uint32_t dim, std::uint32_t* out, float* out_d2);

// Late-interaction score: sum over query rows of the max dot against passage
// rows. Empty passage scores -infinity (never ranked).
double maxsim(const TokenMatrix& query, const TokenMatrix& passage);

void maxsim_batch_serial(const TokenMatrix& query,
                         std::span<const TokenMatrix> passages, double* out);
void maxsim_batch(const TokenMatrix& query,
                  std::span<const TokenMatrix> passages, double* out);

// Indices of the n highest-dot centroids, score descending, ties by lower
// index. n is clamped to k.
std::vector<std::uint32_t> top_by_dot(std::span<const float> v,
                                      const float* centroids, std::uint32_t k,
                                      std::uint32_t dim, std::uint32_t n);

}  // namespace mvstream::kernels
