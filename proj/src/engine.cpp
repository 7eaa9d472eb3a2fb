#include "mvstream/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "mvstream/io.hpp"
#include "mvstream/rng.hpp"

namespace mvstream {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kPendingRawId = "pending_raw";
constexpr const char* kPendingCodedId = "pending_coded";

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::string block_id(char prefix, std::uint64_t seq) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%c%06llu", prefix,
                static_cast<unsigned long long>(seq));
  return buf;
}

}  // namespace

StreamingEngine::StreamingEngine(EngineConfig cfg,
                                 std::shared_ptr<const Embedder> embedder,
                                 std::filesystem::path out_dir)
    : StreamingEngine(resume_tag{}, std::move(cfg), std::move(embedder),
                      std::move(out_dir)) {
  if (!dir_.empty()) {
    if (fs::exists(dir_ / "manifest.json"))
      throw config_error("index already exists at " + dir_.string() +
                         "; resume it or pick a fresh directory");
    fs::create_directories(dir_ / "shards");
    cfg_.save(dir_ / "config.ini");
    persist_manifest(false);
  }
}

StreamingEngine::StreamingEngine(resume_tag, EngineConfig cfg,
                                 std::shared_ptr<const Embedder> embedder,
                                 std::filesystem::path out_dir)
    : cfg_(std::move(cfg)),
      embedder_(std::move(embedder)),
      dir_(std::move(out_dir)) {
  cfg_.validate();
  if (!embedder_) throw config_error("engine needs an embedder");
  if (embedder_->dim() != cfg_.dim)
    throw config_error("embedder dim does not match configured dim");
  fingerprint_ = embedder_->fingerprint();
}

std::uint64_t StreamingEngine::stream_hash_step(std::uint64_t h,
                                                const DocumentRecord& doc) {
  auto mix = [&h](std::uint8_t b) {
    h ^= b;
    h *= 1099511628211ULL;
  };
  for (char c : doc.doc_id) mix(static_cast<std::uint8_t>(c));
  mix(0);
  const auto t = static_cast<std::uint64_t>(doc.timestamp);
  for (int i = 0; i < 8; ++i) mix(static_cast<std::uint8_t>(t >> (8 * i)));
  return h;
}

std::uint64_t stream_prefix_hash(std::span<const DocumentRecord> docs,
                                 std::size_t count) {
  if (count > docs.size())
    throw config_error("prefix longer than the stream");
  std::uint64_t h = 1469598103934665603ULL;
  for (std::size_t i = 0; i < count; ++i)
    h = StreamingEngine::stream_hash_step(h, docs[i]);
  return h;
}

void StreamingEngine::ingest(const DocumentRecord& doc) {
  const auto t0 = std::chrono::steady_clock::now();
  if (passes_.count(doc.doc_id))
    throw data_error("duplicate doc_id in stream: " + doc.doc_id);
  const Ordinal ord = ++n_ingested_;
  stream_hash_ = stream_hash_step(stream_hash_, doc);

  IngestedDoc d;
  d.ordinal = ord;
  d.doc_id = doc.doc_id;
  d.passages = split_passages(doc, cfg_.max_passage_tokens, next_passage_id_);
  d.vectors.reserve(d.passages.size());
  for (const auto& p : d.passages) {
    TokenMatrix m = embedder_->embed_passage(p);
    if (m.dim != cfg_.dim)
      throw invariant_violation("embedder emitted a foreign dimension");
    d.vectors.push_back(std::move(m));
  }

  counters_.docs_ingested++;
  if (d.passages.empty()) counters_.docs_dropped++;
  counters_.passages_ingested += d.passages.size();
  counters_.doc_index_passes++;
  passes_[doc.doc_id]++;

  if (!thresholds_met_) {
    d.loc = Loc::RawPending;
    boot_passages_ += d.passages.size();
    events_.push_back(EventBootstrapExact{ord, doc.doc_id});
  } else if (prior_) {
    d.codes.resize(d.passages.size());
    for (std::size_t i = 0; i < d.passages.size(); ++i) {
      d.codes[i] =
          encode_passage(d.passages[i].passage_id, d.vectors[i], *prior_);
      counters_.token_encodes += d.codes[i].n_tokens;
    }
    d.loc = Loc::CodedPending;
    events_.push_back(
        EventIndexedIntoIncomplete{ord, doc.doc_id, prior_->model_id});
  } else {
    d.loc = Loc::RawPending;
    events_.push_back(
        EventIndexedIntoIncomplete{ord, doc.doc_id, "bootstrap-exact"});
  }
  buffer_.push_back(std::move(d));
  views_dirty_ = true;

  if (!thresholds_met_ &&
      n_ingested_ >= cfg_.lifecycle.effective_min_bootstrap_docs() &&
      boot_passages_ >= cfg_.lifecycle.min_bootstrap_passages)
    thresholds_met_ = true;
  if (thresholds_met_) maybe_seal_blocks();
  counters_.ingest_wall_seconds += seconds_since(t0);
}

void StreamingEngine::maybe_seal_blocks() {
  const std::uint64_t B = cfg_.lifecycle.B;
  while (true) {
    const Ordinal sealed_through = durable_ordinal_ + B * smalls_.size();
    if (sealed_through + B > n_ingested_) break;
    seal_small_block(sealed_through + 1, sealed_through + B);
    if (smalls_.size() == cfg_.lifecycle.k) seal_large_block();
  }
}

std::vector<PassageEntry> StreamingEngine::entries_for(Ordinal first,
                                                       Ordinal last) const {
  std::vector<PassageEntry> entries;
  for (const auto& d : buffer_) {
    if (d.ordinal < first || d.ordinal > last) continue;
    for (std::size_t i = 0; i < d.passages.size(); ++i)
      entries.push_back({d.passages[i].passage_id, d.doc_id,
                         d.passages[i].window_index, &d.vectors[i]});
  }
  return entries;
}

void StreamingEngine::seal_small_block(Ordinal first, Ordinal last) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto entries = entries_for(first, last);
  const std::string sid = block_id('S', (first - 1) / cfg_.lifecycle.B + 1);

  std::shared_ptr<const ShardIndex> shard;
  if (entries.empty()) {
    // a block of token-free documents still has to occupy its slot
    shard = std::make_shared<ShardIndex>(build_exact_shard(
        sid, ShardPhase::SmallOwnModel, {first, last}, entries, fingerprint_));
  } else {
    std::vector<TokenMatrix> mats;
    std::vector<PassageId> ids;
    mats.reserve(entries.size());
    ids.reserve(entries.size());
    for (const auto& e : entries) {
      mats.push_back(*e.vectors);
      ids.push_back(e.passage_id);
    }
    ModelTrainConfig mt = cfg_.model;
    mt.residual_bits = cfg_.residual_bits;
    mt.seed = mix_seed(mix_seed(cfg_.seed, 1), first);
    auto model = std::make_shared<ShardModel>(
        build_shard_model(mats, ids, mt, fingerprint_, sid));
    shard = std::make_shared<ShardIndex>(
        build_compressed_shard(sid, ShardPhase::SmallOwnModel, {first, last},
                               entries, model, fingerprint_));
    prior_ = std::move(model);
  }

  counters_.token_encodes += shard->kind == ShardKind::Compressed
                                 ? shard->n_tokens
                                 : 0;
  counters_.doc_index_passes += last - first + 1;
  for (auto& d : buffer_) {
    if (d.ordinal < first || d.ordinal > last) continue;
    passes_[d.doc_id]++;
    d.loc = Loc::Sealed;
    d.codes.clear();
    d.codes.shrink_to_fit();
  }
  events_.push_back(EventSmallShardSealed{
      last, sid, shard->model ? shard->model->model_id : std::string()});
  smalls_.push_back(shard);
  counters_.small_seals++;
  views_dirty_ = true;
  if (!dir_.empty()) {
    persist_shard(*shard);
    persist_manifest(false);
  }
  counters_.small_build_seconds += seconds_since(t0);
}

void StreamingEngine::seal_large_block() {
  const auto t0 = std::chrono::steady_clock::now();
  const Ordinal first = durable_ordinal_ + 1;
  const Ordinal last = durable_ordinal_ + cfg_.lifecycle.A;
  if (last != n_ingested_)
    throw invariant_violation("large seal off the block boundary");
  const auto entries = entries_for(first, last);
  const std::string lid = block_id('L', (first - 1) / cfg_.lifecycle.A + 1);

  std::shared_ptr<const ShardIndex> shard;
  if (entries.empty()) {
    shard = std::make_shared<ShardIndex>(build_exact_shard(
        lid, ShardPhase::Large, {first, last}, entries, fingerprint_));
  } else {
    std::vector<TokenMatrix> mats;
    std::vector<PassageId> ids;
    mats.reserve(entries.size());
    ids.reserve(entries.size());
    for (const auto& e : entries) {
      mats.push_back(*e.vectors);
      ids.push_back(e.passage_id);
    }
    ModelTrainConfig mt = cfg_.model;
    mt.residual_bits = cfg_.residual_bits;
    mt.seed = mix_seed(mix_seed(cfg_.seed, 2), first);
    auto model = std::make_shared<ShardModel>(
        build_shard_model(mats, ids, mt, fingerprint_, lid));
    shard = std::make_shared<ShardIndex>(build_compressed_shard(
        lid, ShardPhase::Large, {first, last}, entries, model, fingerprint_));
    prior_ = std::move(model);
  }

  counters_.token_encodes +=
      shard->kind == ShardKind::Compressed ? shard->n_tokens : 0;
  counters_.doc_index_passes += last - first + 1;
  for (auto& d : buffer_) passes_[d.doc_id]++;

  std::vector<std::string> retired_now;
  retired_now.reserve(smalls_.size());
  for (const auto& s : smalls_) retired_now.push_back(s->shard_id);
  events_.push_back(EventLargeShardSealed{
      last, lid, shard->model ? shard->model->model_id : std::string(),
      retired_now});
  retired_.insert(retired_.end(), retired_now.begin(), retired_now.end());

  larges_.push_back(shard);
  smalls_.clear();
  buffer_.clear();
  counters_.large_seals++;
  durable_ordinal_ = last;
  durable_next_passage_id_ = next_passage_id_;
  durable_stream_hash_ = stream_hash_;
  views_dirty_ = true;
  if (!dir_.empty()) {
    persist_shard(*shard);
    persist_manifest(false);
    for (const auto& id : retired_now) fs::remove_all(shard_dir(id));
    fs::remove_all(shard_dir(kPendingRawId));
    fs::remove_all(shard_dir(kPendingCodedId));
  }
  counters_.large_build_seconds += seconds_since(t0);
}

std::shared_ptr<const ShardIndex> StreamingEngine::raw_view() const {
  std::vector<PassageEntry> entries;
  Ordinal lo = 0, hi = 0;
  for (const auto& d : buffer_) {
    if (d.loc != Loc::RawPending) continue;
    if (lo == 0) lo = d.ordinal;
    hi = d.ordinal;
    for (std::size_t i = 0; i < d.passages.size(); ++i)
      entries.push_back({d.passages[i].passage_id, d.doc_id,
                         d.passages[i].window_index, &d.vectors[i]});
  }
  if (lo == 0) return nullptr;
  return std::make_shared<ShardIndex>(build_exact_shard(
      kPendingRawId, ShardPhase::Bootstrap, {lo, hi}, entries, fingerprint_));
}

std::shared_ptr<const ShardIndex> StreamingEngine::coded_view() const {
  std::vector<CompressedPassage> codes;
  std::vector<PassageInfo> info;
  Ordinal lo = 0, hi = 0;
  for (const auto& d : buffer_) {
    if (d.loc != Loc::CodedPending) continue;
    if (lo == 0) lo = d.ordinal;
    hi = d.ordinal;
    for (std::size_t i = 0; i < d.passages.size(); ++i) {
      codes.push_back(d.codes[i]);
      info.push_back({d.doc_id, d.passages[i].window_index});
    }
  }
  if (lo == 0) return nullptr;
  return std::make_shared<ShardIndex>(build_compressed_shard_from_codes(
      kPendingCodedId, ShardPhase::SmallPriorModel, {lo, hi}, std::move(codes),
      std::move(info), prior_, fingerprint_));
}

EngineSnapshot StreamingEngine::snapshot() const {
  if (views_dirty_) {
    raw_view_cache_ = raw_view();
    coded_view_cache_ = coded_view();
    views_dirty_ = false;
  }
  EngineSnapshot s;
  s.fingerprint = fingerprint_;
  s.shards = larges_;
  s.shards.insert(s.shards.end(), smalls_.begin(), smalls_.end());
  if (coded_view_cache_) s.shards.push_back(coded_view_cache_);
  if (raw_view_cache_) s.shards.push_back(raw_view_cache_);
  return s;
}

void StreamingEngine::finish() {
  if (dir_.empty()) return;
  snapshot();  // refresh the view caches
  if (coded_view_cache_) persist_shard(*coded_view_cache_);
  if (raw_view_cache_) persist_shard(*raw_view_cache_);
  persist_manifest(true);
  std::ofstream log(dir_ / "events.log", std::ios::trunc);
  for (const auto& ev : events_) log << to_string(ev) << '\n';
}

std::uint32_t StreamingEngine::index_passes_of(const std::string& doc_id) const {
  auto it = passes_.find(doc_id);
  return it == passes_.end() ? 0 : it->second;
}

void StreamingEngine::verify_partition() const {
  std::vector<std::uint8_t> cover(n_ingested_, 0);
  auto mark = [&](Ordinal a, Ordinal b, const std::string& who) {
    for (Ordinal o = a; o <= b; ++o) {
      if (o < 1 || o > n_ingested_)
        throw invariant_violation(who + " covers ordinal " + std::to_string(o) +
                                  " outside the stream");
      if (++cover[o - 1] > 1)
        throw invariant_violation("ordinal " + std::to_string(o) +
                                  " is covered twice (" + who + ")");
    }
  };
  for (const auto& s : larges_)
    mark(s->doc_range.first, s->doc_range.second, s->shard_id);
  for (const auto& s : smalls_)
    mark(s->doc_range.first, s->doc_range.second, s->shard_id);
  for (const auto& d : buffer_)
    if (d.loc != Loc::Sealed) mark(d.ordinal, d.ordinal, "pending buffer");
  for (Ordinal o = 1; o <= n_ingested_; ++o)
    if (!cover[o - 1])
      throw invariant_violation("ordinal " + std::to_string(o) +
                                " is in no active shard");
}

std::filesystem::path StreamingEngine::shard_dir(const std::string& id) const {
  return dir_ / "shards" / id;
}

void StreamingEngine::persist_shard(const ShardIndex& shard) {
  save_shard(shard, shard_dir(shard.shard_id));
}

void StreamingEngine::persist_manifest(bool complete) {
  if (dir_.empty()) return;
  json m;
  m["format_version"] = 1;
  m["run_tag"] = cfg_.run_tag;
  m["complete"] = complete;
  m["embedder_fingerprint"] = io::hex(fingerprint_);
  m["n_ingested"] = n_ingested_;
  m["next_passage_id"] = next_passage_id_;
  m["stream_hash"] = stream_hash_;
  m["durable"] = {{"ordinal", durable_ordinal_},
                  {"next_passage_id", durable_next_passage_id_},
                  {"stream_hash", durable_stream_hash_}};
  json shards = json::array();
  auto add = [&shards](const ShardIndex& s) {
    shards.push_back({{"id", s.shard_id},
                      {"kind", to_string(s.kind)},
                      {"docs", {s.doc_range.first, s.doc_range.second}}});
  };
  for (const auto& s : larges_) add(*s);
  for (const auto& s : smalls_) add(*s);
  if (complete) {
    if (coded_view_cache_) add(*coded_view_cache_);
    if (raw_view_cache_) add(*raw_view_cache_);
  }
  m["active_shards"] = std::move(shards);

  const fs::path final_path = dir_ / "manifest.json";
  const fs::path tmp_path = dir_ / "manifest.json.tmp";
  {
    std::ofstream out(tmp_path, std::ios::trunc);
    out << m.dump(2) << '\n';
    if (!out) throw data_error("cannot write " + tmp_path.string());
  }
  fs::rename(tmp_path, final_path);
}

StreamingEngine StreamingEngine::resume(EngineConfig cfg,
                                        std::shared_ptr<const Embedder> embedder,
                                        const std::filesystem::path& out_dir) {
  std::ifstream in(out_dir / "manifest.json");
  if (!in)
    throw data_error("no index manifest at " + out_dir.string());
  json m = json::parse(in, nullptr, true);
  if (m.value("format_version", 0) != 1)
    throw data_error("unsupported index format at " + out_dir.string());
  const EngineConfig stored = EngineConfig::load(out_dir / "config.ini");

  StreamingEngine e(resume_tag{}, std::move(cfg), std::move(embedder),
                    out_dir);
  if (!(stored == e.cfg_))
    throw config_error("configuration does not match the persisted index");
  if (m["embedder_fingerprint"].get<std::string>() != io::hex(e.fingerprint_))
    throw data_error("embedder fingerprint does not match the index");

  const auto& d = m["durable"];
  e.durable_ordinal_ = d["ordinal"].get<Ordinal>();
  e.durable_next_passage_id_ = d["next_passage_id"].get<PassageId>();
  e.durable_stream_hash_ = d["stream_hash"].get<std::uint64_t>();
  e.n_ingested_ = e.durable_ordinal_;
  e.next_passage_id_ = e.durable_next_passage_id_;
  e.stream_hash_ = e.durable_stream_hash_;
  e.thresholds_met_ = e.durable_ordinal_ > 0;
  e.replay_from_ = e.durable_ordinal_;

  // only large shards are durable; smalls and pending views get replayed
  for (const auto& s : m["active_shards"]) {
    const auto id = s["id"].get<std::string>();
    if (id.empty() || id[0] != 'L') continue;
    const auto dir = e.shard_dir(id);
    if (!fs::exists(dir)) continue;
    auto sh = std::make_shared<ShardIndex>(load_shard(dir));
    if (sh->embedder_fingerprint != e.fingerprint_)
      throw data_error("shard " + id + " was built under another embedder");
    if (sh->phase == ShardPhase::Large &&
        sh->doc_range.second <= e.durable_ordinal_)
      e.larges_.push_back(std::move(sh));
  }
  std::sort(e.larges_.begin(), e.larges_.end(),
            [](const auto& a, const auto& b) {
              return a->doc_range.first < b->doc_range.first;
            });
  Ordinal expect = 1;
  for (const auto& L : e.larges_) {
    if (L->doc_range.first != expect)
      throw data_error("index is missing a large shard before ordinal " +
                       std::to_string(expect));
    expect = L->doc_range.second + 1;
  }
  if (expect != e.durable_ordinal_ + 1)
    throw data_error("index is missing its tail large shard");
  if (!e.larges_.empty()) e.prior_ = e.larges_.back()->model;

  if (fs::exists(out_dir / "shards")) {
    for (const auto& entry : fs::directory_iterator(out_dir / "shards")) {
      const std::string name = entry.path().filename().string();
      const bool keep = std::any_of(
          e.larges_.begin(), e.larges_.end(),
          [&name](const auto& L) { return L->shard_id == name; });
      if (!keep) fs::remove_all(entry.path());
    }
  }
  e.persist_manifest(false);
  return e;
}

}  // namespace mvstream
