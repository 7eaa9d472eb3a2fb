#include "mvstream/shard.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "json.hpp"
#include "mvstream/io.hpp"
#include "mvstream/kernels.hpp"

namespace mvstream {

using json = nlohmann::json;

const char* to_string(ShardKind k) {
  return k == ShardKind::Compressed ? "compressed" : "exact";
}

const char* to_string(ShardPhase p) {
  switch (p) {
    case ShardPhase::Bootstrap: return "bootstrap";
    case ShardPhase::SmallPriorModel: return "small-prior-model";
    case ShardPhase::SmallOwnModel: return "small-own-model";
    case ShardPhase::Large: return "large";
  }
  return "?";
}

ShardKind shard_kind_from_string(const std::string& s) {
  if (s == "compressed") return ShardKind::Compressed;
  if (s == "exact") return ShardKind::Exact;
  throw data_error("unknown shard kind: " + s);
}

ShardPhase shard_phase_from_string(const std::string& s) {
  if (s == "bootstrap") return ShardPhase::Bootstrap;
  if (s == "small-prior-model") return ShardPhase::SmallPriorModel;
  if (s == "small-own-model") return ShardPhase::SmallOwnModel;
  if (s == "large") return ShardPhase::Large;
  throw data_error("unknown shard phase: " + s);
}

namespace {

void index_passages(ShardIndex& s) {
  s.index_of.reserve(s.passage_ids.size());
  for (std::uint32_t i = 0; i < s.passage_ids.size(); ++i) {
    if (!s.index_of.emplace(s.passage_ids[i], i).second)
      throw invariant_violation("duplicate passage id in shard " + s.shard_id);
  }
}

void build_inverted(ShardIndex& s) {
  s.inverted.assign(s.model->K, {});
  for (const auto& cp : s.codes)
    for (std::uint32_t t = 0; t < cp.n_tokens; ++t)
      s.inverted[cp.centroid_ids[t]].push_back({cp.passage_id, t});
}

}  // namespace

ShardIndex build_compressed_shard(
    std::string shard_id, ShardPhase phase,
    std::pair<Ordinal, Ordinal> doc_range,
    std::span<const PassageEntry> passages,
    std::shared_ptr<const ShardModel> model,
    const std::array<std::uint8_t, 32>& embedder_fingerprint) {
  if (!model) throw config_error("compressed shard needs a model");
  if (model->embedder_fingerprint != embedder_fingerprint)
    throw data_error("shard " + shard_id +
                     ": model was trained under a different embedder");
  ShardIndex s;
  s.shard_id = std::move(shard_id);
  s.kind = ShardKind::Compressed;
  s.phase = phase;
  s.doc_range = doc_range;
  s.embedder_fingerprint = embedder_fingerprint;
  s.model = std::move(model);
  s.codes.resize(passages.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < std::int64_t(passages.size()); ++i) {
    const auto& p = passages[std::size_t(i)];
    s.codes[std::size_t(i)] =
        encode_passage(p.passage_id, *p.vectors, *s.model);
  }
  s.passage_ids.reserve(passages.size());
  s.info.reserve(passages.size());
  for (const auto& p : passages) {
    s.passage_ids.push_back(p.passage_id);
    s.info.push_back({p.doc_id, p.window_index});
    s.n_tokens += p.vectors->rows();
  }
  index_passages(s);
  build_inverted(s);
  return s;
}

ShardIndex build_compressed_shard_from_codes(
    std::string shard_id, ShardPhase phase,
    std::pair<Ordinal, Ordinal> doc_range,
    std::vector<CompressedPassage> codes, std::vector<PassageInfo> info,
    std::shared_ptr<const ShardModel> model,
    const std::array<std::uint8_t, 32>& embedder_fingerprint) {
  if (!model) throw config_error("compressed shard needs a model");
  if (codes.size() != info.size())
    throw config_error("codes and passage info must align");
  ShardIndex s;
  s.shard_id = std::move(shard_id);
  s.kind = ShardKind::Compressed;
  s.phase = phase;
  s.doc_range = doc_range;
  s.embedder_fingerprint = embedder_fingerprint;
  s.model = std::move(model);
  s.codes = std::move(codes);
  s.info = std::move(info);
  s.passage_ids.reserve(s.codes.size());
  for (const auto& cp : s.codes) {
    s.passage_ids.push_back(cp.passage_id);
    s.n_tokens += cp.n_tokens;
  }
  index_passages(s);
  build_inverted(s);
  return s;
}

ShardIndex build_exact_shard(
    std::string shard_id, ShardPhase phase,
    std::pair<Ordinal, Ordinal> doc_range,
    std::span<const PassageEntry> passages,
    const std::array<std::uint8_t, 32>& embedder_fingerprint) {
  ShardIndex s;
  s.shard_id = std::move(shard_id);
  s.kind = ShardKind::Exact;
  s.phase = phase;
  s.doc_range = doc_range;
  s.embedder_fingerprint = embedder_fingerprint;
  s.raw.reserve(passages.size());
  s.passage_ids.reserve(passages.size());
  s.info.reserve(passages.size());
  for (const auto& p : passages) {
    s.raw.push_back(*p.vectors);
    s.passage_ids.push_back(p.passage_id);
    s.info.push_back({p.doc_id, p.window_index});
    s.n_tokens += p.vectors->rows();
  }
  index_passages(s);
  return s;
}

double exact_maxsim(const TokenMatrix& query, const TokenMatrix& passage) {
  return kernels::maxsim(query, passage);
}

namespace {

// best passage per document, then (score desc, passage_id asc), then cut
std::vector<ScoredPassage> finalize_ranking(std::vector<ScoredPassage> pool,
                                            std::uint32_t n_per_shard) {
  std::sort(pool.begin(), pool.end(),
            [](const ScoredPassage& a, const ScoredPassage& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.passage_id < b.passage_id;
            });
  std::vector<ScoredPassage> out;
  out.reserve(std::min<std::size_t>(pool.size(), n_per_shard));
  std::unordered_map<std::string, bool> seen_doc;
  seen_doc.reserve(pool.size());
  for (auto& sp : pool) {
    if (!std::isfinite(sp.score)) continue;
    if (!seen_doc.emplace(sp.doc_id, true).second) continue;
    out.push_back(std::move(sp));
    if (out.size() == n_per_shard) break;
  }
  return out;
}

std::vector<ScoredPassage> search_exact(const QueryEmbedding& query,
                                        const ShardIndex& shard,
                                        const SearchParams& params) {
  std::vector<double> scores(shard.raw.size());
  kernels::maxsim_batch(query.mat, shard.raw, scores.data());
  std::vector<ScoredPassage> pool(shard.raw.size());
  for (std::size_t i = 0; i < shard.raw.size(); ++i)
    pool[i] = {shard.passage_ids[i], shard.info[i].doc_id, scores[i]};
  return finalize_ranking(std::move(pool), params.n_per_shard);
}

std::vector<ScoredPassage> search_compressed(const QueryEmbedding& query,
                                             const ShardIndex& shard,
                                             const SearchParams& params) {
  const ShardModel& model = *shard.model;
  const std::size_t nq = query.mat.rows();
  const float kMissing = -std::numeric_limits<float>::infinity();

  // stage 1: probe nprobe centroids per query token, gather posting passages
  std::vector<std::vector<std::uint32_t>> probes(nq);
  for (std::size_t i = 0; i < nq; ++i)
    probes[i] = kernels::top_by_dot(query.mat.row(i), model.centroids.data(),
                                    model.K, model.dim, params.nprobe);
  std::vector<PassageId> cand;
  for (const auto& pr : probes)
    for (auto c : pr)
      for (const auto& post : shard.inverted[c])
        cand.push_back(post.passage_id);
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
  if (cand.empty()) return {};

  // stage 2: approximate per-candidate scores from centroids alone; query
  // tokens without a probed match contribute zero
  std::unordered_map<PassageId, std::uint32_t> slot;
  slot.reserve(cand.size());
  for (std::uint32_t i = 0; i < cand.size(); ++i) slot.emplace(cand[i], i);
  std::vector<float> part(cand.size() * nq, kMissing);
  for (std::size_t i = 0; i < nq; ++i) {
    const auto q = query.mat.row(i);
    for (auto c : probes[i]) {
      const float s = kernels::dot(q, model.centroid(c));
      for (const auto& post : shard.inverted[c]) {
        float& cell = part[slot[post.passage_id] * nq + i];
        if (s > cell) cell = s;
      }
    }
  }
  std::vector<std::pair<double, PassageId>> approx(cand.size());
  for (std::size_t ci = 0; ci < cand.size(); ++ci) {
    double sum = 0.0;
    for (std::size_t i = 0; i < nq; ++i) {
      const float v = part[ci * nq + i];
      if (v != kMissing) sum += v;
    }
    approx[ci] = {sum, cand[ci]};
  }
  const std::size_t keep = std::min<std::size_t>(
      approx.size(),
      std::size_t(params.candidate_factor) * params.n_per_shard);
  std::partial_sort(approx.begin(), approx.begin() + keep, approx.end(),
                    [](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first > b.first;
                      return a.second < b.second;
                    });
  approx.resize(keep);

  // stage 3: decode the survivors and score exactly
  std::vector<ScoredPassage> pool(keep);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < std::int64_t(keep); ++i) {
    const PassageId pid = approx[std::size_t(i)].second;
    const std::uint32_t idx = shard.index_of.at(pid);
    const TokenMatrix decoded = decode_passage(shard.codes[idx], model);
    pool[std::size_t(i)] = {pid, shard.info[idx].doc_id,
                            kernels::maxsim(query.mat, decoded)};
  }
  return finalize_ranking(std::move(pool), params.n_per_shard);
}

}  // namespace

std::vector<ScoredPassage> search_shard(const QueryEmbedding& query,
                                        const ShardIndex& shard,
                                        const SearchParams& params) {
  if (params.n_per_shard == 0 || params.nprobe == 0 ||
      params.candidate_factor == 0)
    throw config_error("search params must be positive");
  if (query.mat.rows() == 0) throw config_error("empty query embedding");
  if (shard.kind == ShardKind::Exact) {
    if (!shard.raw.empty() && query.mat.dim != shard.raw.front().dim)
      throw config_error("query dim does not match shard");
    return search_exact(query, shard, params);
  }
  if (query.mat.dim != shard.model->dim)
    throw config_error("query dim does not match shard model");
  return search_compressed(query, shard, params);
}

namespace {

constexpr const char* kManifestName = "manifest.json";

void write_passage_map(const std::filesystem::path& path,
                       const ShardIndex& s) {
  io::BinaryWriter w(path);
  w.magic("PSPM");
  w.u32(1);
  w.u64(s.passage_ids.size());
  for (std::size_t i = 0; i < s.passage_ids.size(); ++i) {
    w.u64(s.passage_ids[i]);
    w.u32(s.info[i].window_index);
    w.str(s.info[i].doc_id);
  }
  w.close();
}

void read_passage_map(const std::filesystem::path& path, ShardIndex& s) {
  io::BinaryReader r(path);
  r.expect_magic("PSPM");
  if (r.u32() != 1) throw data_error("unsupported passage map version");
  const std::uint64_t n = r.u64();
  s.passage_ids.resize(n);
  s.info.resize(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    s.passage_ids[i] = r.u64();
    s.info[i].window_index = r.u32();
    s.info[i].doc_id = r.str();
  }
}

void write_inverted_file(const std::filesystem::path& path,
                         const ShardIndex& s) {
  io::BinaryWriter w(path);
  w.magic("PSIV");
  w.u32(s.model->K);
  for (const auto& list : s.inverted) {
    w.u64(list.size());
    for (const auto& p : list) {
      w.u64(p.passage_id);
      w.u32(p.position);
    }
  }
  w.close();
}

std::vector<std::vector<Posting>> read_inverted_file(
    const std::filesystem::path& path, std::uint32_t expected_k) {
  io::BinaryReader r(path);
  r.expect_magic("PSIV");
  const std::uint32_t k = r.u32();
  if (k != expected_k)
    throw data_error("inverted file K disagrees with model");
  std::vector<std::vector<Posting>> lists(k);
  for (auto& list : lists) {
    list.resize(r.u64());
    for (auto& p : list) {
      p.passage_id = r.u64();
      p.position = r.u32();
    }
  }
  return lists;
}

}  // namespace

void save_shard(const ShardIndex& shard, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json m;
  m["format_version"] = 1;
  m["shard_id"] = shard.shard_id;
  m["kind"] = to_string(shard.kind);
  m["phase"] = to_string(shard.phase);
  m["doc_range"] = {shard.doc_range.first, shard.doc_range.second};
  m["n_passages"] = shard.n_passages();
  m["n_tokens"] = shard.n_tokens;
  m["embedder_fingerprint"] = io::hex(shard.embedder_fingerprint);
  if (shard.kind == ShardKind::Compressed) {
    m["model_id"] = shard.model->model_id;
    shard.model->save(dir / "model.psmd");
    write_codes_file(dir / "codes.pscd", shard.codes, shard.model->dim,
                     shard.model->bits);
    write_inverted_file(dir / "inverted.psiv", shard);
  } else {
    std::vector<VectorFileRecord> recs(shard.raw.size());
    std::uint32_t dim = shard.raw.empty() ? 1 : shard.raw.front().dim;
    for (std::size_t i = 0; i < shard.raw.size(); ++i)
      recs[i] = {shard.passage_ids[i], shard.raw[i]};
    write_vector_file(dir / "vectors.psev", dim, recs);
  }
  write_passage_map(dir / "passage_map.pspm", shard);
  std::ofstream out(dir / kManifestName, std::ios::trunc);
  out << m.dump(2) << '\n';
  if (!out) throw data_error("cannot write shard manifest in " + dir.string());
}

ShardIndex load_shard(const std::filesystem::path& dir) {
  std::ifstream in(dir / kManifestName);
  if (!in) throw data_error("missing shard manifest in " + dir.string());
  json m = json::parse(in, nullptr, true);
  if (m.value("format_version", 0) != 1)
    throw data_error("unsupported shard format in " + dir.string());
  ShardIndex s;
  s.shard_id = m["shard_id"].get<std::string>();
  s.kind = shard_kind_from_string(m["kind"].get<std::string>());
  s.phase = shard_phase_from_string(m["phase"].get<std::string>());
  s.doc_range = {m["doc_range"][0].get<Ordinal>(),
                 m["doc_range"][1].get<Ordinal>()};
  s.embedder_fingerprint =
      io::unhex32(m["embedder_fingerprint"].get<std::string>());
  read_passage_map(dir / "passage_map.pspm", s);
  if (s.kind == ShardKind::Compressed) {
    auto model = std::make_shared<ShardModel>(ShardModel::load(dir / "model.psmd"));
    s.codes = read_codes_file(dir / "codes.pscd", model->dim, model->bits);
    s.inverted = read_inverted_file(dir / "inverted.psiv", model->K);
    s.model = std::move(model);
    for (const auto& cp : s.codes) s.n_tokens += cp.n_tokens;
    if (s.codes.size() != s.passage_ids.size())
      throw data_error("codes and passage map disagree in " + dir.string());
    for (std::size_t i = 0; i < s.codes.size(); ++i)
      if (s.codes[i].passage_id != s.passage_ids[i])
        throw data_error("codes and passage map disagree in " + dir.string());
  } else {
    std::uint32_t dim = 0;
    auto recs = read_vector_file(dir / "vectors.psev", &dim);
    if (recs.size() != s.passage_ids.size())
      throw data_error("vectors and passage map disagree in " + dir.string());
    s.raw.reserve(recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
      if (recs[i].id != s.passage_ids[i])
        throw data_error("vectors and passage map disagree in " + dir.string());
      s.n_tokens += recs[i].mat.rows();
      s.raw.push_back(std::move(recs[i].mat));
    }
  }
  index_passages(s);
  return s;
}

}  // namespace mvstream
