#include "mvstream/config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace mvstream {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// shortest decimal that parses back to the same double
std::string fmt_double(double v) {
  char buf[64];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::stod(buf) == v) break;
  }
  return buf;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
    throw config_error(key + " must be a non-negative integer, got '" + v +
                       "'");
  return std::stoull(v);
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw config_error("");
    return d;
  } catch (...) {
    throw config_error(key + " must be a number, got '" + v + "'");
  }
}

struct IniLine {
  std::string section;
  std::string key;
  std::string value;
};

std::vector<IniLine> parse_ini(const std::string& text) {
  std::vector<IniLine> lines;
  std::istringstream in(text);
  std::string raw, section;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw config_error("line " + std::to_string(lineno) +
                           ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw config_error("line " + std::to_string(lineno) +
                         ": expected key = value");
    lines.push_back(
        {section, trim(line.substr(0, eq)), trim(line.substr(eq + 1))});
  }
  return lines;
}

}  // namespace

void EngineConfig::validate() const {
  if (dim == 0 || dim > 4096) throw config_error("dim must be in [1, 4096]");
  if (residual_bits != 1 && residual_bits != 2 && residual_bits != 4 &&
      residual_bits != 8)
    throw config_error("residual_bits must be 1, 2, 4 or 8");
  if (max_passage_tokens == 0)
    throw config_error("max_passage_tokens must be positive");
  if (max_query_tokens == 0)
    throw config_error("max_query_tokens must be positive");
  if (run_tag.empty() ||
      run_tag.find_first_of(" \t\n") != std::string::npos)
    throw config_error("run_tag must be non-empty without whitespace");
  lifecycle.validate();
  if (model.policy.c_mult <= 0.0) throw config_error("c_mult must be positive");
  if (model.policy.K_min == 0) throw config_error("K_min must be positive");
  if (model.policy.K_max < model.policy.K_min)
    throw config_error("K_max must be >= K_min");
  if (model.max_training_tokens == 0)
    throw config_error("max_training_tokens must be positive");
  if (model.kmeans_iters == 0)
    throw config_error("kmeans_iters must be positive");
  if (search.n_per_shard == 0 || search.nprobe == 0 ||
      search.candidate_factor == 0)
    throw config_error("search parameters must be positive");
  if (top_docs == 0) throw config_error("top_docs must be positive");
  if (embedder.kind == "synthetic") {
    if (embedder.n_concepts == 0)
      throw config_error("embedder needs at least one concept");
    if (embedder.noise_scale < 0.0)
      throw config_error("noise_scale must be non-negative");
  } else if (embedder.kind == "file") {
    if (embedder.vectors_path.empty())
      throw config_error("file embedder needs vectors_path");
  } else {
    throw config_error("unknown embedder kind: " + embedder.kind);
  }
}

std::string EngineConfig::serialize() const {
  std::ostringstream o;
  o << "[engine]\n";
  o << "dim = " << dim << '\n';
  o << "seed = " << seed << '\n';
  o << "max_passage_tokens = " << max_passage_tokens << '\n';
  o << "max_query_tokens = " << max_query_tokens << '\n';
  o << "residual_bits = " << unsigned(residual_bits) << '\n';
  o << "run_tag = " << run_tag << '\n';
  o << "top_docs = " << top_docs << '\n';
  o << "\n[lifecycle]\n";
  o << "A = " << lifecycle.A << '\n';
  o << "B = " << lifecycle.B << '\n';
  o << "k = " << lifecycle.k << '\n';
  o << "min_bootstrap_passages = " << lifecycle.min_bootstrap_passages << '\n';
  o << "min_bootstrap_docs = " << lifecycle.min_bootstrap_docs << '\n';
  o << "\n[model]\n";
  o << "c_mult = " << fmt_double(model.policy.c_mult) << '\n';
  o << "K_min = " << model.policy.K_min << '\n';
  o << "K_max = " << model.policy.K_max << '\n';
  o << "max_training_tokens = " << model.max_training_tokens << '\n';
  o << "kmeans_iters = " << model.kmeans_iters << '\n';
  o << "\n[search]\n";
  o << "n_per_shard = " << search.n_per_shard << '\n';
  o << "nprobe = " << search.nprobe << '\n';
  o << "candidate_factor = " << search.candidate_factor << '\n';
  o << "\n[embedder]\n";
  o << "kind = " << embedder.kind << '\n';
  o << "n_concepts = " << embedder.n_concepts << '\n';
  o << "noise_scale = " << fmt_double(embedder.noise_scale) << '\n';
  o << "seed = " << embedder.seed << '\n';
  o << "vectors_path = " << embedder.vectors_path << '\n';
  o << "query_vectors_path = " << embedder.query_vectors_path << '\n';
  return o.str();
}

EngineConfig EngineConfig::parse(const std::string& text) {
  EngineConfig c;
  for (const auto& l : parse_ini(text)) {
    const std::string where = l.section.empty() ? l.key : l.section + "." + l.key;
    if (l.section == "engine" || l.section.empty()) {
      if (l.key == "dim") c.dim = std::uint32_t(parse_u64(where, l.value));
      else if (l.key == "seed") c.seed = parse_u64(where, l.value);
      else if (l.key == "max_passage_tokens")
        c.max_passage_tokens = std::uint32_t(parse_u64(where, l.value));
      else if (l.key == "max_query_tokens")
        c.max_query_tokens = std::uint32_t(parse_u64(where, l.value));
      else if (l.key == "residual_bits")
        c.residual_bits = std::uint8_t(parse_u64(where, l.value));
      else if (l.key == "run_tag") c.run_tag = l.value;
      else if (l.key == "top_docs")
        c.top_docs = std::uint32_t(parse_u64(where, l.value));
      else throw config_error("unknown key: " + where);
    } else if (l.section == "lifecycle") {
      if (l.key == "A") c.lifecycle.A = parse_u64(where, l.value);
      else if (l.key == "B") c.lifecycle.B = parse_u64(where, l.value);
      else if (l.key == "k") c.lifecycle.k = parse_u64(where, l.value);
      else if (l.key == "min_bootstrap_passages")
        c.lifecycle.min_bootstrap_passages = parse_u64(where, l.value);
      else if (l.key == "min_bootstrap_docs")
        c.lifecycle.min_bootstrap_docs = parse_u64(where, l.value);
      else throw config_error("unknown key: " + where);
    } else if (l.section == "model") {
      if (l.key == "c_mult") c.model.policy.c_mult = parse_double(where, l.value);
      else if (l.key == "K_min")
        c.model.policy.K_min = std::uint32_t(parse_u64(where, l.value));
      else if (l.key == "K_max")
        c.model.policy.K_max = std::uint32_t(parse_u64(where, l.value));
      else if (l.key == "max_training_tokens")
        c.model.max_training_tokens = parse_u64(where, l.value);
      else if (l.key == "kmeans_iters")
        c.model.kmeans_iters = std::uint32_t(parse_u64(where, l.value));
      else throw config_error("unknown key: " + where);
    } else if (l.section == "search") {
      if (l.key == "n_per_shard")
        c.search.n_per_shard = std::uint32_t(parse_u64(where, l.value));
      else if (l.key == "nprobe")
        c.search.nprobe = std::uint32_t(parse_u64(where, l.value));
      else if (l.key == "candidate_factor")
        c.search.candidate_factor = std::uint32_t(parse_u64(where, l.value));
      else throw config_error("unknown key: " + where);
    } else if (l.section == "embedder") {
      if (l.key == "kind") c.embedder.kind = l.value;
      else if (l.key == "n_concepts")
        c.embedder.n_concepts = parse_u64(where, l.value);
      else if (l.key == "noise_scale")
        c.embedder.noise_scale = parse_double(where, l.value);
      else if (l.key == "seed") c.embedder.seed = parse_u64(where, l.value);
      else if (l.key == "vectors_path") c.embedder.vectors_path = l.value;
      else if (l.key == "query_vectors_path")
        c.embedder.query_vectors_path = l.value;
      else throw config_error("unknown key: " + where);
    } else {
      throw config_error("unknown section: [" + l.section + "]");
    }
  }
  c.validate();
  return c;
}

EngineConfig EngineConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot read config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void EngineConfig::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw data_error("cannot write " + path.string());
  out << serialize();
  if (!out) throw data_error("cannot write " + path.string());
}

std::shared_ptr<const Embedder> make_embedder(const EngineConfig& cfg) {
  if (cfg.embedder.kind == "synthetic")
    return std::make_shared<SyntheticEmbedder>(
        cfg.dim, cfg.embedder.n_concepts, cfg.embedder.noise_scale,
        cfg.embedder.seed, cfg.max_query_tokens);
  auto e = std::make_shared<FileEmbedder>(
      cfg.embedder.vectors_path,
      cfg.embedder.query_vectors_path.empty()
          ? std::filesystem::path{}
          : std::filesystem::path(cfg.embedder.query_vectors_path),
      cfg.max_query_tokens);
  if (e->dim() != cfg.dim)
    throw config_error("vector file dim does not match configured dim");
  return e;
}

std::string serialize_stream_spec(const SyntheticStreamSpec& s) {
  std::ostringstream o;
  o << "[stream]\n";
  o << "n_docs = " << s.n_docs << '\n';
  o << "n_concepts = " << s.n_concepts << '\n';
  o << "concept_birth_times = ";
  for (std::size_t i = 0; i < s.concept_birth_times.size(); ++i) {
    if (i) o << ',';
    o << fmt_double(s.concept_birth_times[i]);
  }
  o << '\n';
  o << "tokens_per_doc = " << s.tokens_per_doc << '\n';
  o << "dim = " << s.dim << '\n';
  o << "n_queries = " << s.n_queries << '\n';
  o << "query_tokens = " << s.query_tokens << '\n';
  o << "noise_scale = " << fmt_double(s.noise_scale) << '\n';
  o << "seed = " << s.seed << '\n';
  return o.str();
}

BenchSpec load_bench_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot read spec " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  const auto lines = parse_ini(buf.str());

  BenchSpec b;
  bool births_given = false;
  std::ostringstream engine_text;
  std::string last_section;
  for (const auto& l : lines) {
    if (l.section != "stream") {
      if (l.section != last_section) {
        engine_text << '[' << l.section << "]\n";
        last_section = l.section;
      }
      engine_text << l.key << " = " << l.value << '\n';
      continue;
    }
    const std::string where = "stream." + l.key;
    if (l.key == "n_docs") b.stream.n_docs = parse_u64(where, l.value);
    else if (l.key == "n_concepts")
      b.stream.n_concepts = parse_u64(where, l.value);
    else if (l.key == "concept_birth_times") {
      births_given = true;
      b.stream.concept_birth_times.clear();
      std::istringstream vs(l.value);
      std::string item;
      while (std::getline(vs, item, ','))
        b.stream.concept_birth_times.push_back(parse_double(where, trim(item)));
    } else if (l.key == "tokens_per_doc")
      b.stream.tokens_per_doc = std::uint32_t(parse_u64(where, l.value));
    else if (l.key == "dim")
      b.stream.dim = std::uint32_t(parse_u64(where, l.value));
    else if (l.key == "n_queries")
      b.stream.n_queries = std::uint32_t(parse_u64(where, l.value));
    else if (l.key == "query_tokens")
      b.stream.query_tokens = std::uint32_t(parse_u64(where, l.value));
    else if (l.key == "noise_scale")
      b.stream.noise_scale = parse_double(where, l.value);
    else if (l.key == "seed") b.stream.seed = parse_u64(where, l.value);
    else throw config_error("unknown key: " + where);
  }
  if (!births_given)
    b.stream.concept_birth_times =
        SyntheticStreamSpec::uniform_births(b.stream.n_concepts);
  b.stream.validate();

  b.engine = EngineConfig::parse(engine_text.str());
  // the stream dictates the embedding space; mirrored so one spec file is
  // coherent by construction
  b.engine.dim = b.stream.dim;
  b.engine.embedder.kind = "synthetic";
  b.engine.embedder.n_concepts = b.stream.n_concepts;
  b.engine.embedder.noise_scale = b.stream.noise_scale;
  b.engine.embedder.seed = b.stream.seed;
  b.engine.validate();
  return b;
}

}  // namespace mvstream
