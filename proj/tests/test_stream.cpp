#include "mvstream/stream.hpp"

#include <algorithm>
#include <set>

#include "doctest.h"
#include "test_util.hpp"

using namespace mvstream;

namespace {

DocumentRecord doc(const std::string& id, Timestamp ts,
                   std::vector<std::uint64_t> toks = {1, 2, 3}) {
  DocumentRecord d;
  d.doc_id = id;
  d.timestamp = ts;
  d.title = "t-" + id;
  d.tokens = std::move(toks);
  return d;
}

}  // namespace

TEST_CASE("date resolution prefers extraction, then last-modified, then header") {
  DateCandidates c;
  c.crawl_date = 400;
  CHECK(resolve_date(c) == 400);
  c.header_date = 300;
  CHECK(resolve_date(c) == 300);
  c.last_modified = 200;
  CHECK(resolve_date(c) == 200);
  c.extracted_date = 100;
  CHECK(resolve_date(c) == 100);
}

TEST_CASE("order_stream sorts by timestamp then doc_id and is stable across runs") {
  std::vector<DocumentRecord> docs = {doc("b", 5), doc("a", 5), doc("z", 1),
                                      doc("m", 9), doc("c", 5)};
  auto once = order_stream(docs);
  auto twice = order_stream(docs);
  REQUIRE(once.size() == 5);
  CHECK(once[0].doc_id == "z");
  CHECK(once[1].doc_id == "a");
  CHECK(once[2].doc_id == "b");
  CHECK(once[3].doc_id == "c");
  CHECK(once[4].doc_id == "m");
  for (std::size_t i = 0; i < once.size(); ++i)
    CHECK(once[i].doc_id == twice[i].doc_id);

  // reference comparator agreement on a larger random set
  SplitMix64 g(77);
  std::vector<DocumentRecord> many;
  for (int i = 0; i < 1000; ++i)
    many.push_back(doc("d" + std::to_string(g.below(100000)),
                       Timestamp(g.below(50))));
  std::set<std::string> seen;
  std::erase_if(many, [&](const DocumentRecord& d) {
    return !seen.insert(d.doc_id).second;
  });
  auto sorted = order_stream(many);
  auto ref = many;
  std::sort(ref.begin(), ref.end(),
            [](const DocumentRecord& x, const DocumentRecord& y) {
              return x.timestamp != y.timestamp ? x.timestamp < y.timestamp
                                                : x.doc_id < y.doc_id;
            });
  REQUIRE(sorted.size() == ref.size());
  for (std::size_t i = 0; i < sorted.size(); ++i)
    CHECK(sorted[i].doc_id == ref[i].doc_id);
}

TEST_CASE("order_stream rejects duplicate doc ids") {
  CHECK_THROWS_AS(order_stream({doc("x", 1), doc("x", 2)}), data_error);
}

TEST_CASE("split_passages windows without overlap and keeps the remainder") {
  DocumentRecord d = doc("w", 0);
  d.tokens.resize(25);
  for (std::size_t i = 0; i < 25; ++i) d.tokens[i] = i;
  PassageId next = 100;
  const auto parts = split_passages(d, 10, next);
  REQUIRE(parts.size() == 3);
  CHECK(next == 103);
  CHECK(parts[0].passage_id == 100);
  CHECK(parts[0].window_index == 0);
  CHECK(parts[0].tokens.size() == 10);
  CHECK(parts[1].tokens.size() == 10);
  CHECK(parts[2].tokens.size() == 5);
  CHECK(parts[2].window_index == 2);
  CHECK(parts[0].tokens[9] == 9);
  CHECK(parts[2].tokens[0] == 20);
  for (const auto& p : parts) CHECK(p.doc_id == "w");
}

TEST_CASE("empty documents yield no passages and burn no ids") {
  DocumentRecord d = doc("e", 0, {});
  PassageId next = 7;
  CHECK(split_passages(d, 10, next).empty());
  CHECK(next == 7);
}

TEST_CASE("token ids carry their concept") {
  const auto t = make_token(13, 999);
  CHECK(token_concept(t) == 13);
  CHECK(token_concept(make_token(0, (1ULL << kConceptShift) + 5)) == 0);
}

TEST_CASE("drift stream covers every query with at least one relevant doc") {
  SyntheticStreamSpec spec;
  spec.n_docs = 2000;
  spec.n_concepts = 20;
  spec.concept_birth_times = SyntheticStreamSpec::uniform_births(20);
  spec.n_queries = 40;
  const auto s = generate_drift_stream(spec);
  REQUIRE(s.docs.size() == 2000);
  REQUIRE(s.queries.size() == 40);
  REQUIRE(s.doc_concept.size() == 2000);
  for (const auto& q : s.queries) {
    const auto* g = s.qrels.for_query(q.query_id);
    REQUIRE(g != nullptr);
    int relevant = 0;
    for (const auto& [_, grade] : *g) relevant += grade >= 1;
    CHECK(relevant >= 1);
  }
}

TEST_CASE("qrels agree with the generator's concept labels") {
  SyntheticStreamSpec spec;
  spec.n_docs = 300;
  spec.n_queries = 10;
  spec.concept_birth_times = SyntheticStreamSpec::uniform_births(spec.n_concepts);
  const auto s = generate_drift_stream(spec);
  // doc i relevant to query q exactly when they share a concept
  for (const auto& q : s.queries) {
    std::uint64_t qc = token_concept(std::stoull(q.text.substr(0, q.text.find(' '))));
    for (std::size_t i = 0; i < s.docs.size(); ++i) {
      const auto grade = s.qrels.grade(q.query_id, s.docs[i].doc_id);
      const bool same = s.doc_concept[i] == qc;
      if (same) {
        REQUIRE(grade.has_value());
        CHECK(*grade == 1);
      } else if (grade.has_value()) {
        CHECK(*grade == 0);
      }
    }
  }
}

TEST_CASE("documents only use concepts born at or before their position") {
  SyntheticStreamSpec spec;
  spec.n_docs = 1000;
  spec.n_concepts = 10;
  spec.concept_birth_times = SyntheticStreamSpec::uniform_births(10);
  const auto s = generate_drift_stream(spec);
  for (std::size_t i = 0; i < s.docs.size(); ++i) {
    const double f = double(i + 1) / double(s.docs.size());
    CHECK(spec.concept_birth_times[s.doc_concept[i]] <= f + 1e-12);
  }
  // the stream is already in stream order
  for (std::size_t i = 1; i < s.docs.size(); ++i)
    CHECK(s.docs[i - 1].timestamp <= s.docs[i].timestamp);
}

TEST_CASE("stationary births make the concept mix time-invariant") {
  SyntheticStreamSpec spec;
  spec.n_docs = 1200;
  spec.n_concepts = 6;
  spec.concept_birth_times.assign(6, 0.0);
  const auto s = generate_drift_stream(spec);
  std::vector<int> early(6, 0), late(6, 0);
  for (std::size_t i = 0; i < 600; ++i) early[s.doc_concept[i]]++;
  for (std::size_t i = 600; i < 1200; ++i) late[s.doc_concept[i]]++;
  for (int c = 0; c < 6; ++c) {
    CHECK(early[c] > 30);
    CHECK(late[c] > 30);
  }
}

TEST_CASE("spec validation rejects malformed inputs") {
  SyntheticStreamSpec spec;
  spec.n_docs = 0;
  CHECK_THROWS_AS(spec.validate(), config_error);
  spec = {};
  spec.concept_birth_times = {0.5, 0.1};
  spec.n_concepts = 2;
  CHECK_THROWS_AS(spec.validate(), config_error);
  spec = {};
  spec.concept_birth_times = {0.2, 0.4};
  spec.n_concepts = 2;
  CHECK_THROWS_AS(spec.validate(), config_error);  // first birth must be 0
  spec = {};
  spec.concept_birth_times = {0.0};
  spec.n_concepts = 3;
  CHECK_THROWS_AS(spec.validate(), config_error);  // count mismatch
}

TEST_CASE("corpus jsonl round trips") {
  testutil::TempDir tmp("stream");
  SyntheticStreamSpec spec;
  spec.n_docs = 50;
  spec.n_concepts = 4;
  spec.concept_birth_times = SyntheticStreamSpec::uniform_births(4);
  const auto s = generate_drift_stream(spec);
  const auto p = tmp / "corpus.jsonl";
  write_corpus_jsonl(p, s.docs);
  const auto back = read_corpus_jsonl(p);
  REQUIRE(back.size() == s.docs.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].doc_id == s.docs[i].doc_id);
    CHECK(back[i].timestamp == s.docs[i].timestamp);
    CHECK(back[i].tokens == s.docs[i].tokens);
  }
}

TEST_CASE("corpus reader resolves dates by priority") {
  testutil::TempDir tmp("stream");
  const auto p = tmp / "dated.jsonl";
  {
    std::ofstream out(p);
    out << R"({"doc_id":"a","body":"1 2","crawl_date":900})" << "\n";
    out << R"({"doc_id":"b","body":"1 2","crawl_date":900,"last_modified":500})"
        << "\n";
    out << R"({"doc_id":"c","body":"1 2","crawl_date":900,"last_modified":500,"date":100})"
        << "\n";
  }
  const auto docs = read_corpus_jsonl(p);
  REQUIRE(docs.size() == 3);
  CHECK(docs[0].timestamp == 900);
  CHECK(docs[1].timestamp == 500);
  CHECK(docs[2].timestamp == 100);
}

TEST_CASE("query and qrels files round trip") {
  testutil::TempDir tmp("stream");
  SyntheticStreamSpec spec;
  spec.n_docs = 40;
  spec.n_queries = 8;
  spec.n_concepts = 4;
  spec.concept_birth_times = SyntheticStreamSpec::uniform_births(4);
  const auto s = generate_drift_stream(spec);
  write_query_file(tmp / "q.tsv", s.queries);
  const auto qs = read_query_file(tmp / "q.tsv");
  REQUIRE(qs.size() == s.queries.size());
  for (std::size_t i = 0; i < qs.size(); ++i) {
    CHECK(qs[i].query_id == s.queries[i].query_id);
    CHECK(qs[i].text == s.queries[i].text);
  }
  s.qrels.save(tmp / "qrels.txt");
  const auto qr = RelevanceJudgments::load(tmp / "qrels.txt");
  CHECK(qr.grades == s.qrels.grades);
}

TEST_CASE("generation is deterministic in the seed") {
  SyntheticStreamSpec spec;
  spec.n_docs = 100;
  spec.n_concepts = 8;
  spec.concept_birth_times = SyntheticStreamSpec::uniform_births(8);
  const auto a = generate_drift_stream(spec);
  const auto b = generate_drift_stream(spec);
  CHECK(a.doc_concept == b.doc_concept);
  for (std::size_t i = 0; i < a.docs.size(); ++i)
    CHECK(a.docs[i].tokens == b.docs[i].tokens);
  spec.seed = 43;
  const auto c = generate_drift_stream(spec);
  CHECK(a.doc_concept != c.doc_concept);
}
