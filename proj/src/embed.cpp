#include "mvstream/embed.hpp"

#include <cmath>
#include <sstream>

#include "mvstream/io.hpp"
#include "mvstream/rng.hpp"

namespace mvstream {

namespace {

void normalize(std::span<float> v) {
  double n2 = 0.0;
  for (float x : v) n2 += double(x) * x;
  const double n = std::sqrt(n2);
  if (n == 0.0) return;
  for (float& x : v) x = float(x / n);
}

std::vector<float> seeded_unit_vector(std::uint64_t seed, std::uint32_t dim) {
  SplitMix64 g(seed);
  std::vector<float> v(dim);
  double n2 = 0.0;
  do {
    for (auto& x : v) x = float(g.gaussian());
    n2 = 0.0;
    for (float x : v) n2 += double(x) * x;
  } while (n2 < 1e-12);  // astronomically unlikely, but keeps the contract
  normalize(v);
  return v;
}

}  // namespace

std::vector<float> synthetic_token_vector(std::uint64_t token_id,
                                          std::span<const float> concept_vec,
                                          double noise_scale,
                                          std::uint64_t seed) {
  std::vector<float> v(concept_vec.begin(), concept_vec.end());
  if (noise_scale == 0.0) return v;  // bit-exact concept vector
  const auto dim = static_cast<std::uint32_t>(concept_vec.size());
  const auto h =
      seeded_unit_vector(mix_seed(mix_seed(seed, 0x70CE), token_id), dim);
  for (std::uint32_t i = 0; i < dim; ++i)
    v[i] += float(noise_scale) * h[i];
  normalize(v);
  return v;
}

SyntheticEmbedder::SyntheticEmbedder(std::uint32_t dim,
                                     std::uint64_t n_concepts,
                                     double noise_scale, std::uint64_t seed,
                                     std::uint32_t max_query_tokens)
    : dim_(dim),
      n_concepts_(n_concepts),
      noise_scale_(noise_scale),
      seed_(seed),
      max_query_tokens_(max_query_tokens) {
  if (dim == 0) throw config_error("embedder dim must be positive");
  if (n_concepts == 0) throw config_error("embedder needs >= 1 concept");
  if (noise_scale < 0.0) throw config_error("noise_scale must be >= 0");
  concepts_.reserve(std::size_t(n_concepts) * dim);
  for (std::uint64_t c = 0; c < n_concepts; ++c) {
    const auto v = seeded_unit_vector(mix_seed(mix_seed(seed, 0xC0), c), dim);
    concepts_.insert(concepts_.end(), v.begin(), v.end());
  }
}

std::span<const float> SyntheticEmbedder::concept_vector(
    std::uint64_t c) const {
  if (c >= n_concepts_)
    throw config_error("token references concept " + std::to_string(c) +
                       " but embedder only has " +
                       std::to_string(n_concepts_));
  return {concepts_.data() + std::size_t(c) * dim_, dim_};
}

std::vector<float> SyntheticEmbedder::embed_token(
    std::uint64_t token_id) const {
  return synthetic_token_vector(token_id, concept_vector(token_concept(token_id)),
                                noise_scale_, seed_);
}

TokenMatrix SyntheticEmbedder::embed_passage(const PassageRecord& p) const {
  TokenMatrix m(dim_);
  m.reserve_rows(p.tokens.size());
  for (auto t : p.tokens) m.push_row(embed_token(t));
  return m;
}

QueryEmbedding SyntheticEmbedder::embed_query(const std::string& query_id,
                                              const std::string& text) const {
  QueryEmbedding q;
  q.query_id = query_id;
  q.mat = TokenMatrix(dim_);
  std::istringstream in(text);
  std::string w;
  std::uint32_t taken = 0;
  while (in >> w && taken < max_query_tokens_) {
    std::uint64_t id = 0;
    try {
      std::size_t pos = 0;
      id = std::stoull(w, &pos);
      if (pos != w.size()) throw std::invalid_argument(w);
    } catch (const std::exception&) {
      throw data_error("synthetic queries must be token ids, got '" + w + "'");
    }
    q.mat.push_row(embed_token(id));
    ++taken;
  }
  if (q.mat.rows() == 0) throw data_error("empty query: " + query_id);
  return q;
}

std::array<std::uint8_t, 32> SyntheticEmbedder::fingerprint() const {
  std::ostringstream cfg;
  cfg << "synthetic;dim=" << dim_ << ";concepts=" << n_concepts_
      << ";noise=" << noise_scale_ << ";seed=" << seed_
      << ";max_query_tokens=" << max_query_tokens_;
  return io::config_digest(cfg.str());
}

void write_vector_file(const std::filesystem::path& path, std::uint32_t dim,
                       std::span<const VectorFileRecord> records) {
  io::BinaryWriter w(path);
  w.magic("PSEV");
  w.u32(1);  // version
  w.u32(dim);
  for (const auto& r : records) {
    if (r.mat.dim != dim)
      throw config_error("vector file: record dim mismatch");
    w.u64(r.id);
    w.u32(static_cast<std::uint32_t>(r.mat.rows()));
    w.f32_array(r.mat.data);
  }
  w.close();
}

std::vector<VectorFileRecord> read_vector_file(
    const std::filesystem::path& path, std::uint32_t* dim_out) {
  io::BinaryReader r(path);
  r.expect_magic("PSEV");
  const std::uint32_t version = r.u32();
  if (version != 1)
    throw data_error("unsupported vector file version " +
                     std::to_string(version));
  const std::uint32_t dim = r.u32();
  if (dim == 0) throw data_error("vector file: dim 0");
  if (dim_out) *dim_out = dim;
  std::vector<VectorFileRecord> out;
  while (!r.at_eof()) {
    VectorFileRecord rec;
    rec.id = r.u64();
    const std::uint32_t n = r.u32();
    rec.mat = TokenMatrix(dim);
    rec.mat.data.resize(std::size_t(n) * dim);
    r.f32_array(rec.mat.data);
    out.push_back(std::move(rec));
  }
  return out;
}

FileEmbedder::FileEmbedder(const std::filesystem::path& passage_vectors,
                           const std::filesystem::path& query_vectors,
                           std::uint32_t max_query_tokens)
    : max_query_tokens_(max_query_tokens) {
  auto records = read_vector_file(passage_vectors, &dim_);
  std::uint64_t h = 14695981039346656037ULL;
  auto mix = [&h](std::uint64_t id, const TokenMatrix& m) {
    h = (h ^ id) * 1099511628211ULL;
    h = (h ^ m.rows()) * 1099511628211ULL;
    const auto* bytes = reinterpret_cast<const unsigned char*>(m.data.data());
    for (std::size_t i = 0; i < m.data.size() * sizeof(float); ++i)
      h = (h ^ bytes[i]) * 1099511628211ULL;
  };
  for (auto& r : records) {
    mix(r.id, r.mat);
    passages_.emplace(r.id, std::move(r.mat));
  }
  if (!query_vectors.empty()) {
    std::uint32_t qdim = 0;
    for (auto& r : read_vector_file(query_vectors, &qdim)) {
      if (qdim != dim_)
        throw data_error("query vector file dim mismatch");
      mix(r.id, r.mat);
      queries_.emplace(r.id, std::move(r.mat));
    }
  }
  content_hash_ = h;
}

TokenMatrix FileEmbedder::embed_passage(const PassageRecord& p) const {
  const auto it = passages_.find(p.passage_id);
  if (it == passages_.end())
    throw data_error("no precomputed vectors for passage " +
                     std::to_string(p.passage_id));
  if (it->second.rows() != p.tokens.size())
    throw data_error("precomputed vectors for passage " +
                     std::to_string(p.passage_id) +
                     " disagree with its token count");
  return it->second;
}

QueryEmbedding FileEmbedder::embed_query(const std::string& query_id,
                                         const std::string&) const {
  const auto it = queries_.find(io::fnv1a64(query_id));
  if (it == queries_.end())
    throw data_error("no precomputed vectors for query " + query_id);
  QueryEmbedding q;
  q.query_id = query_id;
  q.mat = it->second;
  if (q.mat.rows() > max_query_tokens_) {
    q.mat.data.resize(std::size_t(max_query_tokens_) * dim_);
  }
  return q;
}

std::array<std::uint8_t, 32> FileEmbedder::fingerprint() const {
  std::ostringstream cfg;
  cfg << "file;dim=" << dim_ << ";hash=" << content_hash_
      << ";max_query_tokens=" << max_query_tokens_;
  return io::config_digest(cfg.str());
}

}  // namespace mvstream
