#include "mvstream/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace mvstream {

std::optional<int> RelevanceJudgments::grade(const std::string& query_id,
                                             const std::string& doc_id) const {
  auto qit = grades.find(query_id);
  if (qit == grades.end()) return std::nullopt;
  auto dit = qit->second.find(doc_id);
  if (dit == qit->second.end()) return std::nullopt;
  return dit->second;
}

const std::unordered_map<std::string, int>* RelevanceJudgments::for_query(
    const std::string& query_id) const {
  auto it = grades.find(query_id);
  return it == grades.end() ? nullptr : &it->second;
}

void RelevanceJudgments::add(const std::string& query_id,
                             const std::string& doc_id, int grade) {
  grades[query_id][doc_id] = grade;
}

RelevanceJudgments RelevanceJudgments::load(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot read " + path.string());
  RelevanceJudgments q;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string qid, zero, doc;
    int grade;
    if (!(ls >> qid >> zero >> doc >> grade))
      throw data_error(path.string() + ":" + std::to_string(lineno) +
                       ": malformed qrel line");
    q.add(qid, doc, grade);
  }
  return q;
}

void RelevanceJudgments::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw data_error("cannot write " + path.string());
  for (const auto& [qid, docs] : grades) {
    // deterministic doc order inside a query
    std::vector<std::pair<std::string, int>> sorted(docs.begin(), docs.end());
    std::sort(sorted.begin(), sorted.end());
    for (const auto& [doc, grade] : sorted)
      out << qid << " 0 " << doc << ' ' << grade << '\n';
  }
  if (!out) throw data_error("cannot write " + path.string());
}

namespace {

double gain_of(int grade, bool exponential) {
  return exponential ? std::exp2(double(grade)) - 1.0 : double(grade);
}

double dcg(const std::vector<double>& gains, std::uint32_t k) {
  double s = 0.0;
  const std::size_t n = std::min<std::size_t>(gains.size(), k);
  for (std::size_t i = 0; i < n; ++i)
    s += gains[i] / std::log2(double(i) + 2.0);
  return s;
}

}  // namespace

double ndcg_at_k(const Ranking& ranking, const RelevanceJudgments& qrels,
                 const std::string& query_id, std::uint32_t k,
                 bool exponential_gain) {
  if (k == 0) throw config_error("ndcg needs k >= 1");
  const auto* judged = qrels.for_query(query_id);
  if (!judged) return 0.0;
  std::vector<double> ideal;
  ideal.reserve(judged->size());
  for (const auto& [doc, grade] : *judged)
    if (grade > 0) ideal.push_back(gain_of(grade, exponential_gain));
  if (ideal.empty()) return 0.0;
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  std::vector<double> got;
  got.reserve(std::min<std::size_t>(ranking.size(), k));
  for (std::size_t i = 0; i < ranking.size() && i < k; ++i) {
    auto g = qrels.grade(query_id, ranking[i]);
    got.push_back(g ? gain_of(*g, exponential_gain) : 0.0);
  }
  const double denom = dcg(ideal, k);
  return denom == 0.0 ? 0.0 : dcg(got, k) / denom;
}

double average_precision(const Ranking& ranking,
                         const RelevanceJudgments& qrels,
                         const std::string& query_id) {
  const auto* judged = qrels.for_query(query_id);
  if (!judged) return 0.0;
  std::uint64_t n_rel = 0;
  for (const auto& [doc, grade] : *judged)
    if (grade >= 1) ++n_rel;
  if (n_rel == 0) return 0.0;
  double sum = 0.0;
  std::uint64_t hits = 0;
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    auto g = qrels.grade(query_id, ranking[i]);
    if (g && *g >= 1) {
      ++hits;
      sum += double(hits) / double(i + 1);
    }
  }
  return sum / double(n_rel);
}

double recall_at_k(const Ranking& ranking, const RelevanceJudgments& qrels,
                   const std::string& query_id, std::uint32_t k) {
  if (k == 0) throw config_error("recall needs k >= 1");
  const auto* judged = qrels.for_query(query_id);
  if (!judged) return 0.0;
  std::uint64_t n_rel = 0;
  for (const auto& [doc, grade] : *judged)
    if (grade >= 1) ++n_rel;
  if (n_rel == 0) return 0.0;
  std::uint64_t hits = 0;
  for (std::size_t i = 0; i < ranking.size() && i < k; ++i) {
    auto g = qrels.grade(query_id, ranking[i]);
    if (g && *g >= 1) ++hits;
  }
  return double(hits) / double(n_rel);
}

double judged_at_k(const Ranking& ranking, const RelevanceJudgments& qrels,
                   const std::string& query_id, std::uint32_t k) {
  if (k == 0) throw config_error("judged needs k >= 1");
  const std::size_t n = std::min<std::size_t>(ranking.size(), k);
  if (n == 0) return 0.0;
  std::uint64_t judged = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (qrels.grade(query_id, ranking[i])) ++judged;
  return double(judged) / double(n);
}

Ranking condense(const Ranking& ranking, const RelevanceJudgments& qrels,
                 const std::string& query_id) {
  Ranking out;
  out.reserve(ranking.size());
  for (const auto& doc : ranking)
    if (qrels.grade(query_id, doc)) out.push_back(doc);
  return out;
}

namespace {

struct MetricSpec {
  std::string name;
  std::string base;        // ndcg | map | r | judged
  std::uint32_t k = 0;     // 0 where not applicable
  bool primed = false;
};

MetricSpec parse_metric(const std::string& name) {
  MetricSpec m;
  m.name = name;
  std::string head = name;
  const auto at = name.find('@');
  if (at != std::string::npos) {
    head = name.substr(0, at);
    const std::string ks = name.substr(at + 1);
    if (ks.empty() ||
        ks.find_first_not_of("0123456789") != std::string::npos)
      throw config_error("bad cutoff in metric: " + name);
    m.k = std::uint32_t(std::stoul(ks));
    if (m.k == 0) throw config_error("metric cutoff must be >= 1: " + name);
  }
  if (!head.empty() && head.back() == '\'') {
    m.primed = true;
    head.pop_back();
  }
  m.base = head;
  const bool needs_k = head == "ndcg" || head == "r" || head == "judged";
  if (needs_k && m.k == 0)
    throw config_error("metric needs a cutoff: " + name);
  if (head == "map" && m.k != 0)
    throw config_error("map takes no cutoff: " + name);
  if (head == "judged" && m.primed)
    throw config_error("judged has no primed form: " + name);
  if (head != "ndcg" && head != "map" && head != "r" && head != "judged")
    throw config_error("unknown metric: " + name);
  return m;
}

}  // namespace

std::vector<std::string> parse_metric_list(const std::string& csv) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(csv);
  while (std::getline(in, cur, ',')) {
    // trim
    const auto a = cur.find_first_not_of(" \t");
    const auto b = cur.find_last_not_of(" \t");
    if (a == std::string::npos) continue;
    cur = cur.substr(a, b - a + 1);
    parse_metric(cur);  // validates
    out.push_back(cur);
  }
  if (out.empty()) throw config_error("empty metric list");
  return out;
}

MetricReport compute_metrics(const std::map<std::string, Ranking>& run,
                             const RelevanceJudgments& qrels,
                             const std::vector<std::string>& metric_names,
                             bool exponential_gain) {
  MetricReport rep;
  rep.metrics = metric_names;
  std::vector<MetricSpec> specs;
  specs.reserve(metric_names.size());
  for (const auto& n : metric_names) specs.push_back(parse_metric(n));

  for (const auto& [qid, ranking] : run) {
    const auto* judged = qrels.for_query(qid);
    bool has_rel = false;
    if (judged)
      for (const auto& [doc, grade] : *judged)
        if (grade >= 1) has_rel = true;
    if (!has_rel) continue;
    Ranking condensed;
    bool have_condensed = false;
    auto& row = rep.per_query[qid];
    for (const auto& s : specs) {
      const Ranking* r = &ranking;
      if (s.primed) {
        if (!have_condensed) {
          condensed = condense(ranking, qrels, qid);
          have_condensed = true;
        }
        r = &condensed;
      }
      double v = 0.0;
      if (s.base == "ndcg")
        v = ndcg_at_k(*r, qrels, qid, s.k, exponential_gain);
      else if (s.base == "map")
        v = average_precision(*r, qrels, qid);
      else if (s.base == "r")
        v = recall_at_k(*r, qrels, qid, s.k);
      else
        v = judged_at_k(*r, qrels, qid, s.k);
      row[s.name] = v;
    }
  }
  for (const auto& name : metric_names) {
    double sum = 0.0;
    for (const auto& [qid, row] : rep.per_query) sum += row.at(name);
    rep.mean[name] =
        rep.per_query.empty() ? 0.0 : sum / double(rep.per_query.size());
  }
  return rep;
}

void save_metric_report_json(const MetricReport& r,
                             const std::filesystem::path& path) {
  nlohmann::json j;
  j["metrics"] = r.metrics;
  j["mean"] = r.mean;
  j["per_query"] = r.per_query;
  j["n_queries"] = r.per_query.size();
  std::ofstream out(path, std::ios::trunc);
  out << j.dump(2) << '\n';
  if (!out) throw data_error("cannot write " + path.string());
}

void save_metric_report_tsv(const MetricReport& r,
                            const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw data_error("cannot write " + path.string());
  out << "query_id";
  for (const auto& m : r.metrics) out << '\t' << m;
  out << '\n';
  char buf[64];
  auto fmt = [&buf](double v) {
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return std::string(buf);
  };
  for (const auto& [qid, row] : r.per_query) {
    out << qid;
    for (const auto& m : r.metrics) out << '\t' << fmt(row.at(m));
    out << '\n';
  }
  out << "mean";
  for (const auto& m : r.metrics) out << '\t' << fmt(r.mean.at(m));
  out << '\n';
  if (!out) throw data_error("cannot write " + path.string());
}

}  // namespace mvstream
