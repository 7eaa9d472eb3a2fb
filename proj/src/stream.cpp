#include "mvstream/stream.hpp"

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "mvstream/io.hpp"
#include "mvstream/rng.hpp"

namespace mvstream {

using json = nlohmann::json;

Timestamp resolve_date(const DateCandidates& cands) {
  if (cands.extracted_date) return *cands.extracted_date;
  if (cands.last_modified) return *cands.last_modified;
  if (cands.header_date) return *cands.header_date;
  return cands.crawl_date;
}

std::vector<DocumentRecord> order_stream(std::vector<DocumentRecord> docs) {
  std::unordered_set<std::string> seen;
  seen.reserve(docs.size());
  for (const auto& d : docs)
    if (!seen.insert(d.doc_id).second)
      throw data_error("duplicate doc_id in stream: " + d.doc_id);
  std::sort(docs.begin(), docs.end(),
            [](const DocumentRecord& a, const DocumentRecord& b) {
              if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
              return a.doc_id < b.doc_id;
            });
  return docs;
}

std::vector<PassageRecord> split_passages(const DocumentRecord& doc,
                                          std::uint32_t max_passage_tokens,
                                          PassageId& next_passage_id) {
  if (max_passage_tokens == 0)
    throw config_error("max_passage_tokens must be positive");
  std::vector<PassageRecord> out;
  const std::size_t n = doc.tokens.size();
  for (std::size_t start = 0; start < n; start += max_passage_tokens) {
    const std::size_t end = std::min(n, start + max_passage_tokens);
    PassageRecord p;
    p.passage_id = next_passage_id++;
    p.doc_id = doc.doc_id;
    p.window_index = static_cast<std::uint32_t>(start / max_passage_tokens);
    p.tokens.assign(doc.tokens.begin() + start, doc.tokens.begin() + end);
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<double> SyntheticStreamSpec::uniform_births(
    std::uint64_t n_concepts) {
  std::vector<double> b(n_concepts);
  for (std::uint64_t c = 0; c < n_concepts; ++c)
    b[c] = double(c) / double(n_concepts);
  return b;
}

void SyntheticStreamSpec::validate() const {
  if (n_docs == 0) throw config_error("stream spec: n_docs must be positive");
  if (n_concepts == 0)
    throw config_error("stream spec: n_concepts must be positive");
  if (tokens_per_doc == 0 || query_tokens == 0)
    throw config_error("stream spec: token counts must be positive");
  if (dim == 0) throw config_error("stream spec: dim must be positive");
  if (concept_birth_times.size() != n_concepts)
    throw config_error("stream spec: one birth time per concept required");
  if (concept_birth_times.front() != 0.0)
    throw config_error("stream spec: first concept must be born at 0");
  if (!std::is_sorted(concept_birth_times.begin(), concept_birth_times.end()))
    throw config_error("stream spec: birth times must be ascending");
  if (concept_birth_times.back() >= 1.0)
    throw config_error("stream spec: birth times must lie in [0, 1)");
  if (noise_scale < 0.0)
    throw config_error("stream spec: noise_scale must be non-negative");
}

DriftStream generate_drift_stream(const SyntheticStreamSpec& spec) {
  spec.validate();
  DriftStream s;
  SplitMix64 rng(mix_seed(spec.seed, 0xD0C5));

  const Timestamp base = 1577836800;  // 2020-01-01 UTC
  s.docs.resize(spec.n_docs);
  s.doc_concept.resize(spec.n_docs);
  std::vector<std::uint64_t> concept_count(spec.n_concepts, 0);
  for (std::uint64_t i = 0; i < spec.n_docs; ++i) {
    const double f = double(i) / double(spec.n_docs);
    // concepts born at or before this stream fraction are eligible
    const auto alive = std::uint64_t(
        std::upper_bound(spec.concept_birth_times.begin(),
                         spec.concept_birth_times.end(), f) -
        spec.concept_birth_times.begin());
    const std::uint64_t c = rng.below(alive);
    s.doc_concept[i] = static_cast<std::uint32_t>(c);
    concept_count[c]++;
    auto& d = s.docs[i];
    char buf[24];
    std::snprintf(buf, sizeof buf, "d%08llu", (unsigned long long)i);
    d.doc_id = buf;
    d.timestamp = base + Timestamp(i) * 3600;
    d.tokens.resize(spec.tokens_per_doc);
    for (auto& t : d.tokens) t = make_token(c, rng.below(1u << kConceptShift));
  }

  // A concept can end up with zero documents on tiny streams; steal the last
  // eligible doc from a concept that can spare one so every query has at
  // least one relevant doc.
  for (std::uint64_t c = spec.n_concepts; c-- > 0;) {
    if (concept_count[c] > 0) continue;
    const double birth = spec.concept_birth_times[c];
    for (std::uint64_t i = spec.n_docs; i-- > 0;) {
      const double f = double(i) / double(spec.n_docs);
      if (f < birth) break;
      if (concept_count[s.doc_concept[i]] < 2) continue;
      concept_count[s.doc_concept[i]]--;
      concept_count[c]++;
      s.doc_concept[i] = static_cast<std::uint32_t>(c);
      for (auto& t : s.docs[i].tokens)
        t = make_token(c, t & ((1ULL << kConceptShift) - 1));
      break;
    }
    if (concept_count[c] == 0)
      throw config_error(
          "stream spec: not enough docs to populate every concept");
  }

  s.queries.resize(spec.n_queries);
  for (std::uint32_t q = 0; q < spec.n_queries; ++q) {
    const std::uint64_t c = q % spec.n_concepts;
    char buf[16];
    std::snprintf(buf, sizeof buf, "q%04u", q);
    s.queries[q].query_id = buf;
    std::ostringstream text;
    for (std::uint32_t t = 0; t < spec.query_tokens; ++t) {
      if (t) text << ' ';
      text << make_token(c, rng.below(1u << kConceptShift));
    }
    s.queries[q].text = text.str();
    for (std::uint64_t i = 0; i < spec.n_docs; ++i)
      s.qrels.add(s.queries[q].query_id, s.docs[i].doc_id,
                  s.doc_concept[i] == c ? 1 : 0);
  }

  s.docs = order_stream(std::move(s.docs));  // already ordered; re-assert
  return s;
}

namespace {

Timestamp parse_timestamp(const json& v, const std::string& field) {
  if (v.is_number_integer()) return v.get<Timestamp>();
  if (!v.is_string())
    throw data_error("corpus: field " + field + " must be int or string");
  const std::string s = v.get<std::string>();
  std::tm tm{};
  int y, mo, d, h = 0, mi = 0, se = 0;
  const int got =
      std::sscanf(s.c_str(), "%d-%d-%d %d:%d:%d", &y, &mo, &d, &h, &mi, &se);
  if (got != 3 && got != 6)
    throw data_error("corpus: unparseable date '" + s + "' in " + field);
  tm.tm_year = y - 1900;
  tm.tm_mon = mo - 1;
  tm.tm_mday = d;
  tm.tm_hour = h;
  tm.tm_min = mi;
  tm.tm_sec = se;
  return static_cast<Timestamp>(timegm(&tm));
}

std::vector<std::uint64_t> tokenize(const std::string& body) {
  std::vector<std::uint64_t> tokens;
  std::istringstream in(body);
  std::string w;
  while (in >> w) {
    bool numeric = !w.empty();
    for (char c : w)
      if (c < '0' || c > '9') {
        numeric = false;
        break;
      }
    if (numeric && w.size() <= 19)
      tokens.push_back(std::stoull(w));
    else
      tokens.push_back(io::fnv1a64(w));
  }
  return tokens;
}

}  // namespace

std::vector<DocumentRecord> read_corpus_jsonl(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open corpus: " + path.string());
  std::vector<DocumentRecord> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw data_error("corpus line " + std::to_string(lineno) + ": " +
                       e.what());
    }
    if (!j.contains("doc_id") || !j.contains("crawl_date"))
      throw data_error("corpus line " + std::to_string(lineno) +
                       ": doc_id and crawl_date are required");
    DocumentRecord d;
    d.doc_id = j["doc_id"].get<std::string>();
    d.title = j.value("title", std::string{});
    d.tokens = tokenize(j.value("body", std::string{}));
    DateCandidates c;
    c.crawl_date = parse_timestamp(j["crawl_date"], "crawl_date");
    if (j.contains("date")) c.extracted_date = parse_timestamp(j["date"], "date");
    if (j.contains("last_modified"))
      c.last_modified = parse_timestamp(j["last_modified"], "last_modified");
    if (j.contains("header_date"))
      c.header_date = parse_timestamp(j["header_date"], "header_date");
    d.timestamp = resolve_date(c);
    docs.push_back(std::move(d));
  }
  return docs;
}

void write_corpus_jsonl(const std::filesystem::path& path,
                        std::span<const DocumentRecord> docs) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw data_error("cannot write corpus: " + path.string());
  for (const auto& d : docs) {
    std::ostringstream body;
    for (std::size_t i = 0; i < d.tokens.size(); ++i) {
      if (i) body << ' ';
      body << d.tokens[i];
    }
    json j;
    j["doc_id"] = d.doc_id;
    if (!d.title.empty()) j["title"] = d.title;
    j["body"] = body.str();
    j["crawl_date"] = d.timestamp;
    out << j.dump() << '\n';
  }
  if (!out) throw data_error("write failed: " + path.string());
}

void write_stream_manifest(const std::filesystem::path& path,
                           std::span<const DocumentRecord> docs) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw data_error("cannot write stream manifest: " + path.string());
  for (const auto& d : docs) out << d.doc_id << '\t' << d.timestamp << '\n';
  if (!out) throw data_error("write failed: " + path.string());
}

std::vector<Query> read_query_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open queries: " + path.string());
  std::vector<Query> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw data_error("queries line " + std::to_string(lineno) +
                       ": expected query_id<TAB>text");
    out.push_back({line.substr(0, tab), line.substr(tab + 1)});
  }
  return out;
}

void write_query_file(const std::filesystem::path& path,
                      std::span<const Query> queries) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw data_error("cannot write queries: " + path.string());
  for (const auto& q : queries) out << q.query_id << '\t' << q.text << '\n';
  if (!out) throw data_error("write failed: " + path.string());
}

}  // namespace mvstream
