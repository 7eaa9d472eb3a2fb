#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include "mvstream/lifecycle.hpp"
#include "mvstream/model.hpp"
#include "mvstream/shard.hpp"
#include "mvstream/stream.hpp"

namespace mvstream {

struct EmbedderConfig {
  std::string kind = "synthetic";  // synthetic | file
  std::uint64_t n_concepts = 16;
  double noise_scale = 0.3;
  std::uint64_t seed = 42;
  std::string vectors_path;        // file kind
  std::string query_vectors_path;  // file kind, optional

  bool operator==(const EmbedderConfig&) const = default;
};

// Whole-engine configuration, loadable from a sectioned key = value file.
struct EngineConfig {
  std::uint32_t dim = 64;
  std::uint64_t seed = 42;
  std::uint32_t max_passage_tokens = 180;
  std::uint32_t max_query_tokens = 64;
  std::uint8_t residual_bits = 1;
  std::string run_tag = "mvstream";

  LifecycleConfig lifecycle;
  ModelTrainConfig model;
  SearchParams search;
  std::uint32_t top_docs = 1000;
  EmbedderConfig embedder;

  void validate() const;  // throws config_error
  std::string serialize() const;
  static EngineConfig parse(const std::string& text);
  static EngineConfig load(const std::filesystem::path&);
  void save(const std::filesystem::path&) const;

  bool operator==(const EngineConfig&) const = default;
};

std::shared_ptr<const Embedder> make_embedder(const EngineConfig& cfg);

// Stream spec files reuse the same key = value syntax under [stream]; any
// engine sections present override the defaults, so one file can drive a
// whole benchmark.
struct BenchSpec {
  SyntheticStreamSpec stream;
  EngineConfig engine;
};
BenchSpec load_bench_spec(const std::filesystem::path&);
std::string serialize_stream_spec(const SyntheticStreamSpec&);

}  // namespace mvstream
