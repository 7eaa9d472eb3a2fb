#include "mvstream/codec.hpp"

#include <algorithm>

#include "mvstream/io.hpp"
#include "mvstream/kernels.hpp"

namespace mvstream {

std::vector<std::uint8_t> pack_bits(std::span<const std::uint32_t> indices,
                                    std::uint8_t bits) {
  if (bits != 1 && bits != 2 && bits != 4 && bits != 8)
    throw config_error("pack_bits: bits must be 1, 2, 4 or 8");
  const std::uint32_t mask = bits == 8 ? 0xffu : (1u << bits) - 1;
  std::vector<std::uint8_t> out((indices.size() * bits + 7) / 8, 0);
  std::size_t pos = 0;  // bit cursor; first index in the low bits of byte 0
  for (std::uint32_t v : indices) {
    if (v > mask) throw config_error("pack_bits: index exceeds bit width");
    out[pos >> 3] |= std::uint8_t(v << (pos & 7));
    pos += bits;
  }
  return out;
}

std::vector<std::uint32_t> unpack_bits(std::span<const std::uint8_t> bytes,
                                       std::size_t count, std::uint8_t bits) {
  if (bits != 1 && bits != 2 && bits != 4 && bits != 8)
    throw config_error("unpack_bits: bits must be 1, 2, 4 or 8");
  if (bytes.size() * 8 < count * bits)
    throw data_error("unpack_bits: byte buffer too short");
  const std::uint32_t mask = bits == 8 ? 0xffu : (1u << bits) - 1;
  std::vector<std::uint32_t> out(count);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = (bytes[pos >> 3] >> (pos & 7)) & mask;
    pos += bits;
  }
  return out;
}

namespace {

// bucket of x = number of cutoffs strictly below x; boundary values fall low
inline std::uint32_t bucket_of(float x, std::span<const float> cutoffs) {
  return std::uint32_t(
      std::lower_bound(cutoffs.begin(), cutoffs.end(), x) - cutoffs.begin());
}

void encode_residual(std::span<const float> token, std::span<const float> cen,
                     const ShardModel& model, std::uint32_t* scratch,
                     std::uint8_t* out_bytes) {
  const std::uint32_t dim = model.dim;
  for (std::uint32_t j = 0; j < dim; ++j)
    scratch[j] = bucket_of(token[j] - cen[j], model.cutoffs);
  const auto packed = pack_bits({scratch, dim}, model.bits);
  std::copy(packed.begin(), packed.end(), out_bytes);
}

}  // namespace

CompressedToken encode_token(std::span<const float> token,
                             const ShardModel& model) {
  if (token.size() != model.dim)
    throw config_error("encode_token: dim mismatch");
  CompressedToken ct;
  ct.centroid_id =
      kernels::argmax_dot(token, model.centroids.data(), model.K, model.dim);
  std::vector<std::uint32_t> scratch(model.dim);
  ct.residual_code.resize(residual_stride(model.dim, model.bits));
  encode_residual(token, model.centroid(ct.centroid_id), model,
                  scratch.data(), ct.residual_code.data());
  return ct;
}

std::vector<float> decode_token(const CompressedToken& ct,
                                const ShardModel& model) {
  if (ct.centroid_id >= model.K)
    throw data_error("decode_token: centroid id out of range");
  if (ct.residual_code.size() != residual_stride(model.dim, model.bits))
    throw data_error("decode_token: residual code has wrong length");
  const auto cen = model.centroid(ct.centroid_id);
  std::vector<float> out(cen.begin(), cen.end());
  const auto idx = unpack_bits(ct.residual_code, model.dim, model.bits);
  for (std::uint32_t j = 0; j < model.dim; ++j)
    out[j] += model.values[idx[j]];
  return out;
}

CompressedPassage encode_passage(PassageId id, const TokenMatrix& tokens,
                                 const ShardModel& model) {
  if (tokens.dim != model.dim)
    throw config_error("encode_passage: dim mismatch");
  const std::size_t n = tokens.rows();
  const std::size_t stride = residual_stride(model.dim, model.bits);
  CompressedPassage cp;
  cp.passage_id = id;
  cp.n_tokens = static_cast<std::uint32_t>(n);
  cp.centroid_ids.resize(n);
  cp.residual_bytes.assign(n * stride, 0);
  kernels::assign_argmax_dot(tokens.data.data(), n, model.centroids.data(),
                             model.K, model.dim, cp.centroid_ids.data());
  std::vector<std::uint32_t> scratch(model.dim);
  for (std::size_t t = 0; t < n; ++t)
    encode_residual(tokens.row(t), model.centroid(cp.centroid_ids[t]), model,
                    scratch.data(), cp.residual_bytes.data() + t * stride);
  return cp;
}

TokenMatrix decode_passage(const CompressedPassage& cp,
                           const ShardModel& model) {
  const std::size_t stride = residual_stride(model.dim, model.bits);
  TokenMatrix m(model.dim);
  m.reserve_rows(cp.n_tokens);
  CompressedToken ct;
  for (std::uint32_t t = 0; t < cp.n_tokens; ++t) {
    ct.centroid_id = cp.centroid_ids[t];
    ct.residual_code.assign(
        cp.residual_bytes.begin() + t * stride,
        cp.residual_bytes.begin() + (t + 1) * stride);
    m.push_row(decode_token(ct, model));
  }
  return m;
}

void write_codes_file(const std::filesystem::path& path,
                      std::span<const CompressedPassage> codes,
                      std::uint32_t dim, std::uint8_t bits) {
  const std::size_t stride = residual_stride(dim, bits);
  io::BinaryWriter w(path);
  w.magic("PSCD");
  w.u32(1);  // version
  w.u64(codes.size());
  for (const auto& cp : codes) {
    if (cp.centroid_ids.size() != cp.n_tokens ||
        cp.residual_bytes.size() != cp.n_tokens * stride)
      throw config_error("codes file: inconsistent passage record");
    w.u64(cp.passage_id);
    w.u32(cp.n_tokens);
    for (auto c : cp.centroid_ids) w.u32(c);
    w.bytes(cp.residual_bytes);
  }
  w.close();
}

std::vector<CompressedPassage> read_codes_file(
    const std::filesystem::path& path, std::uint32_t dim, std::uint8_t bits) {
  const std::size_t stride = residual_stride(dim, bits);
  io::BinaryReader r(path);
  r.expect_magic("PSCD");
  const std::uint32_t version = r.u32();
  if (version != 1)
    throw data_error("unsupported codes version " + std::to_string(version));
  const std::uint64_t n = r.u64();
  std::vector<CompressedPassage> out(n);
  for (auto& cp : out) {
    cp.passage_id = r.u64();
    cp.n_tokens = r.u32();
    cp.centroid_ids.resize(cp.n_tokens);
    for (auto& c : cp.centroid_ids) c = r.u32();
    cp.residual_bytes.resize(std::size_t(cp.n_tokens) * stride);
    r.bytes(cp.residual_bytes);
  }
  return out;
}

}  // namespace mvstream
