// Copyright 2026 The CapCal Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "capcal/domain.hpp"

namespace capcal {

/// TREC relevance judgments: query_id -> doc_id -> grade (>= 0).
struct Qrels {
  std::map<std::string, std::map<std::string, int>> judgments;

  /// Grade of (query_id, doc_id); unjudged documents are 0.
  int grade(const std::string& query_id, const std::string& doc_id) const;
  std::size_t size() const;
};

/// `qid iter docid rel` per line, whitespace separated. Negative grades are
/// clamped to 0 with a warning. Throws ParseError / DuplicateJudgment.
Qrels parse_qrels(const std::string& path);
Qrels parse_qrels_text(std::string_view text, const std::string& source = "<qrels>");
std::string format_qrels(const Qrels& qrels);

struct RunEntry {
  std::string query_id;
  std::string doc_id;
  int rank = 0;
  double score = 0.0;
  std::string tag;

  bool operator==(const RunEntry&) const = default;
};

/// TREC run. Entries are kept grouped by query in first-appearance order,
/// ascending rank within a query.
struct RunFile {
  std::vector<RunEntry> entries;

  /// Query ids in file order.
  std::vector<std::string> query_ids() const;
  /// Doc ids of one query, best first.
  std::vector<std::string> ranking(const std::string& query_id) const;
};

/// `qid Q0 docid rank score tag` per line. Per query the ranks must be 1..m
/// (NonContiguousRanks otherwise), doc ids unique and scores non-increasing
/// with rank.
RunFile parse_run(const std::string& path);
RunFile parse_run_text(std::string_view text, const std::string& source = "<run>");

/// Scores are printed with six decimals.
std::string format_run(const RunFile& run);
void write_run(const RunFile& run, const std::string& path);

/// Equality of two runs ignoring the tag column.
bool same_ranking(const RunFile& a, const RunFile& b);

struct EvalReport {
  std::map<std::string, double> per_query;
  double mean = 0.0;
  std::string metric = "ndcg@10";
  std::string method_tag;
  std::string dataset = "default";
};

/// NDCG@k with gain 2^rel - 1 and discount log2(rank + 1). Ideal DCG comes
/// from every judgment of the query. Queries of the run without a positive
/// judgment are left out of the report and the mean.
EvalReport ndcg_at_k(const RunFile& run, const Qrels& qrels, int k);

/// Parses "ndcg@10" style metric names; returns k. Throws ConfigError.
int parse_ndcg_metric(std::string_view metric);

struct ComparisonRow {
  std::string method;
  std::map<std::string, double> values;  // dataset -> mean
  std::map<std::string, double> deltas;  // dataset -> mean - baseline mean
};

/// Per-method rows, per-dataset columns, deltas against the first method.
struct ComparisonTable {
  std::string metric;
  std::vector<std::string> datasets;
  std::vector<ComparisonRow> rows;
  bool has_deltas = false;

  std::string render_text() const;
  nlohmann::json to_json() const;
};

/// Throws QuerySetMismatch when reports of one dataset were computed over
/// different queries or metrics.
ComparisonTable compare_methods(const std::vector<EvalReport>& reports);

/// Kendall tau-a between two orderings of the same items.
double kendall_tau(const std::vector<int>& a, const std::vector<int>& b);

// ---------------------------------------------------------------------------
// Task files: one JSON object per line,
//   {"query_id": "...", "query_text": "...", "candidates": [{"doc_id": "...", "text": "..."}]}
// Candidate order is the first-stage retrieval order.
// ---------------------------------------------------------------------------

/// Texts are whitespace-normalized. Throws ParseError naming the line.
std::vector<RerankTask> load_tasks(const std::string& path, IdentifierScheme scheme = {},
                                   PlaceholderPolicy placeholder = {});
std::vector<RerankTask> parse_tasks_text(std::string_view text, IdentifierScheme scheme = {},
                                         PlaceholderPolicy placeholder = {},
                                         const std::string& source = "<tasks>");
std::string format_tasks(const std::vector<RerankTask>& tasks);

}  // namespace capcal
