#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "mvstream/model.hpp"

namespace mvstream {

struct CompressedToken {
  std::uint32_t centroid_id = 0;
  std::vector<std::uint8_t> residual_code;  // ceil(dim*b/8) bytes
};

// All tokens of one passage: ids plus residual bytes laid out token-major
// with a fixed per-token stride.
struct CompressedPassage {
  PassageId passage_id = 0;
  std::uint32_t n_tokens = 0;
  std::vector<std::uint32_t> centroid_ids;
  std::vector<std::uint8_t> residual_bytes;

  bool operator==(const CompressedPassage&) const = default;
};

inline std::size_t residual_stride(std::uint32_t dim, std::uint8_t bits) {
  return (std::size_t(dim) * bits + 7) / 8;
}

// Bucket indices packed little-endian within each byte: the first index
// occupies the least significant bits of byte 0. b must be 1, 2, 4 or 8, so
// no index straddles a byte boundary.
std::vector<std::uint8_t> pack_bits(std::span<const std::uint32_t> indices,
                                    std::uint8_t bits);
std::vector<std::uint32_t> unpack_bits(std::span<const std::uint8_t> bytes,
                                       std::size_t count, std::uint8_t bits);

// centroid = argmax dot (ties to the lowest id), residual bucketized per
// component against the model's global cutoffs; a component equal to a cutoff
// falls into the lower bucket.
CompressedToken encode_token(std::span<const float> token,
                             const ShardModel& model);

// centroid + bucket value per component; intentionally not re-normalized.
std::vector<float> decode_token(const CompressedToken& ct,
                                const ShardModel& model);

CompressedPassage encode_passage(PassageId id, const TokenMatrix& tokens,
                                 const ShardModel& model);
TokenMatrix decode_passage(const CompressedPassage& cp,
                           const ShardModel& model);

// Codes file ("PSCD"): header {magic, version u32, n_passages u64}, then per
// passage {passage_id u64, n_tokens u32, centroid ids u32 each, residual
// bytes}.
void write_codes_file(const std::filesystem::path&,
                      std::span<const CompressedPassage> codes,
                      std::uint32_t dim, std::uint8_t bits);
std::vector<CompressedPassage> read_codes_file(const std::filesystem::path&,
                                               std::uint32_t dim,
                                               std::uint8_t bits);

}  // namespace mvstream
