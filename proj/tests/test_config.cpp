// Config file parsing, validation errors, bench spec mirroring.
#include <fstream>
#include <string>

#include "doctest.h"
#include "mvstream/config.hpp"
#include "mvstream/types.hpp"
#include "test_util.hpp"

using namespace mvstream;

TEST_CASE("serialize then parse returns an identical config") {
  EngineConfig c;
  c.dim = 24;
  c.seed = 99;
  c.max_passage_tokens = 90;
  c.max_query_tokens = 12;
  c.residual_bits = 4;
  c.run_tag = "roundtrip";
  c.lifecycle.A = 1200;
  c.lifecycle.B = 300;
  c.lifecycle.k = 4;
  c.lifecycle.min_bootstrap_passages = 50;
  c.lifecycle.min_bootstrap_docs = 40;
  c.model.policy.c_mult = 0.75;
  c.model.policy.K_min = 4;
  c.model.policy.K_max = 512;
  c.model.max_training_tokens = 10000;
  c.model.kmeans_iters = 7;
  c.search.n_per_shard = 33;
  c.search.nprobe = 3;
  c.search.candidate_factor = 5;
  c.top_docs = 77;
  c.embedder.kind = "synthetic";
  c.embedder.n_concepts = 9;
  c.embedder.noise_scale = 0.125;
  c.embedder.seed = 7;

  const auto text = c.serialize();
  const auto back = EngineConfig::parse(text);
  CHECK(back == c);
  // serialization is stable
  CHECK(back.serialize() == text);
}

TEST_CASE("config files survive a save/load cycle") {
  testutil::TempDir td("cfg");
  EngineConfig c;
  c.dim = 16;
  c.run_tag = "disk";
  c.save(td / "config.ini");
  CHECK(EngineConfig::load(td / "config.ini") == c);
  CHECK_THROWS_AS(EngineConfig::load(td / "nope.ini"), config_error);
}

TEST_CASE("validation rejects out-of-range fields") {
  auto base = [] { return EngineConfig{}; };
  {
    auto c = base();
    c.residual_bits = 3;
    CHECK_THROWS_AS(c.validate(), config_error);
  }
  {
    auto c = base();
    c.dim = 0;
    CHECK_THROWS_AS(c.validate(), config_error);
  }
  {
    auto c = base();
    c.dim = 5000;
    CHECK_THROWS_AS(c.validate(), config_error);
  }
  {
    auto c = base();
    c.lifecycle.A = 1000;
    c.lifecycle.B = 300;  // A not a multiple of B via k
    CHECK_THROWS_AS(c.validate(), config_error);
  }
  {
    auto c = base();
    c.run_tag = "has space";
    CHECK_THROWS_AS(c.validate(), config_error);
  }
  {
    auto c = base();
    c.run_tag = "";
    CHECK_THROWS_AS(c.validate(), config_error);
  }
  {
    auto c = base();
    c.search.nprobe = 0;
    CHECK_THROWS_AS(c.validate(), config_error);
  }
  {
    auto c = base();
    c.top_docs = 0;
    CHECK_THROWS_AS(c.validate(), config_error);
  }
  {
    auto c = base();
    c.embedder.kind = "bert";
    CHECK_THROWS_AS(c.validate(), config_error);
  }
  {
    auto c = base();
    c.embedder.kind = "file";  // no vectors_path
    CHECK_THROWS_AS(c.validate(), config_error);
  }
}

TEST_CASE("parser flags unknown keys, sections and malformed lines") {
  CHECK_THROWS_AS(EngineConfig::parse("[engine]\nbogus = 1\n"), config_error);
  CHECK_THROWS_AS(EngineConfig::parse("[nonsense]\ndim = 4\n"), config_error);
  CHECK_THROWS_AS(EngineConfig::parse("[engine\ndim = 4\n"), config_error);
  CHECK_THROWS_AS(EngineConfig::parse("[engine]\ndim 4\n"), config_error);
  CHECK_THROWS_AS(EngineConfig::parse("[engine]\ndim = four\n"), config_error);
  CHECK_THROWS_AS(EngineConfig::parse("[search]\nnprobe = -2\n"), config_error);
  // comments, blanks and a bare key before any section header are fine
  auto c = EngineConfig::parse(
      "# comment\n\ndim = 32\n[engine]\nseed = 5\n[lifecycle]\nA = 2000\n");
  CHECK(c.dim == 32);
  CHECK(c.seed == 5);
  CHECK(c.lifecycle.A == 2000);
}

TEST_CASE("bench specs mirror the stream into the engine") {
  testutil::TempDir td("spec");
  {
    std::ofstream out(td / "spec.ini");
    out << "[stream]\n"
           "n_docs = 600\n"
           "n_concepts = 5\n"
           "concept_birth_times = 0, 0.1, 0.2, 0.3, 0.4\n"
           "tokens_per_doc = 10\n"
           "dim = 24\n"
           "n_queries = 12\n"
           "query_tokens = 3\n"
           "noise_scale = 0.5\n"
           "seed = 77\n"
           "[engine]\n"
           "top_docs = 50\n"
           "[lifecycle]\n"
           "A = 200\n"
           "B = 100\n"
           "k = 2\n";
  }
  auto b = load_bench_spec(td / "spec.ini");
  CHECK(b.stream.n_docs == 600);
  REQUIRE(b.stream.concept_birth_times.size() == 5);
  CHECK(b.stream.concept_birth_times[1] == doctest::Approx(0.1));
  CHECK(b.engine.dim == 24);
  CHECK(b.engine.embedder.kind == "synthetic");
  CHECK(b.engine.embedder.n_concepts == 5);
  CHECK(b.engine.embedder.noise_scale == doctest::Approx(0.5));
  CHECK(b.engine.embedder.seed == 77);
  CHECK(b.engine.top_docs == 50);
  CHECK(b.engine.lifecycle.A == 200);

  // births default to a uniform stagger when the key is absent
  {
    std::ofstream out(td / "spec2.ini");
    out << "[stream]\nn_docs = 400\nn_concepts = 4\ndim = 16\n";
  }
  auto b2 = load_bench_spec(td / "spec2.ini");
  REQUIRE(b2.stream.concept_birth_times.size() == 4);
  CHECK(b2.stream.concept_birth_times[0] == 0.0);
  CHECK(b2.stream.concept_birth_times[3] == doctest::Approx(0.75));

  CHECK_THROWS_AS(load_bench_spec(td / "absent.ini"), config_error);
  {
    std::ofstream out(td / "bad.ini");
    out << "[stream]\nwat = 1\n";
  }
  CHECK_THROWS_AS(load_bench_spec(td / "bad.ini"), config_error);
}

TEST_CASE("stream spec serialization round trips through the bench loader") {
  SyntheticStreamSpec s;
  s.n_docs = 512;
  s.n_concepts = 6;
  s.concept_birth_times = SyntheticStreamSpec::uniform_births(6);
  s.tokens_per_doc = 9;
  s.dim = 20;
  s.n_queries = 10;
  s.query_tokens = 2;
  s.noise_scale = 0.375;
  s.seed = 123;

  testutil::TempDir td("streamspec");
  {
    std::ofstream out(td / "s.ini");
    out << serialize_stream_spec(s);
  }
  auto b = load_bench_spec(td / "s.ini");
  CHECK(b.stream.n_docs == s.n_docs);
  CHECK(b.stream.n_concepts == s.n_concepts);
  CHECK(b.stream.concept_birth_times == s.concept_birth_times);
  CHECK(b.stream.tokens_per_doc == s.tokens_per_doc);
  CHECK(b.stream.dim == s.dim);
  CHECK(b.stream.n_queries == s.n_queries);
  CHECK(b.stream.query_tokens == s.query_tokens);
  CHECK(b.stream.noise_scale == doctest::Approx(s.noise_scale));
  CHECK(b.stream.seed == s.seed);
}

TEST_CASE("make_embedder builds the configured kind") {
  EngineConfig c;
  c.dim = 16;
  auto e = make_embedder(c);
  REQUIRE(e != nullptr);
  CHECK(e->dim() == 16);
  // two embedders from equal configs share a fingerprint
  auto e2 = make_embedder(c);
  CHECK(e->fingerprint() == e2->fingerprint());
  c.embedder.seed += 1;
  CHECK(make_embedder(c)->fingerprint() != e->fingerprint());
}
