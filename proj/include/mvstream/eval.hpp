#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "mvstream/types.hpp"

namespace mvstream {

// Graded relevance judgments keyed by (query_id, doc_id). Grade 0 means
// judged non-relevant; absence means unjudged.
struct RelevanceJudgments {
  std::map<std::string, std::unordered_map<std::string, int>> grades;

  std::optional<int> grade(const std::string& query_id,
                           const std::string& doc_id) const;
  const std::unordered_map<std::string, int>* for_query(
      const std::string& query_id) const;
  void add(const std::string& query_id, const std::string& doc_id, int grade);

  // 4-column text format: query_id 0 doc_id grade
  static RelevanceJudgments load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

using Ranking = std::vector<std::string>;  // doc ids, best first

// Gain is the raw grade by default; the exponential knob uses 2^grade - 1.
// Discount log2(rank+1); the ideal ranking is built from all judged docs of
// the query. Returns 0 when the query has no relevant judged doc.
double ndcg_at_k(const Ranking& ranking, const RelevanceJudgments& qrels,
                 const std::string& query_id, std::uint32_t k,
                 bool exponential_gain = false);

// Relevant means grade >= 1. Unjudged docs in the ranking count as
// non-relevant.
double average_precision(const Ranking& ranking,
                         const RelevanceJudgments& qrels,
                         const std::string& query_id);

double recall_at_k(const Ranking& ranking, const RelevanceJudgments& qrels,
                   const std::string& query_id, std::uint32_t k);

// Fraction of the top min(k, |ranking|) results that carry any judgment.
double judged_at_k(const Ranking& ranking, const RelevanceJudgments& qrels,
                   const std::string& query_id, std::uint32_t k);

// Removes unjudged docs, preserving order. Base metrics on the condensed
// ranking are the primed variants (ndcg', map', ...).
Ranking condense(const Ranking& ranking, const RelevanceJudgments& qrels,
                 const std::string& query_id);

struct MetricReport {
  std::vector<std::string> metrics;
  std::map<std::string, std::map<std::string, double>> per_query;
  std::map<std::string, double> mean;
};

// Metric names: ndcg@K, map, r@K, judged@K and primed forms ndcg'@K, map',
// r'@K. Unknown names raise config_error.
std::vector<std::string> parse_metric_list(const std::string& csv);

// Means are taken over queries with at least one relevant judged doc.
MetricReport compute_metrics(const std::map<std::string, Ranking>& run,
                             const RelevanceJudgments& qrels,
                             const std::vector<std::string>& metric_names,
                             bool exponential_gain = false);

void save_metric_report_json(const MetricReport& r,
                             const std::filesystem::path& path);
void save_metric_report_tsv(const MetricReport& r,
                            const std::filesystem::path& path);

}  // namespace mvstream
