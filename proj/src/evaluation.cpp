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

#include "capcal/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "capcal/errors.hpp"

namespace capcal {

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
    if (pos >= line.size()) break;
    std::size_t end = pos;
    while (end < line.size() && !std::isspace(static_cast<unsigned char>(line[end]))) ++end;
    fields.push_back(line.substr(pos, end - pos));
    pos = end;
  }
  return fields;
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t pos = 0;
  std::size_t number = 0;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    fn(++number, text.substr(pos, eol - pos));
    pos = eol + 1;
  }
}

bool parse_int(std::string_view s, long long& out) {
  if (s.empty()) return false;
  std::size_t i = 0;
  bool negative = false;
  if (s[0] == '-' || s[0] == '+') {
    negative = s[0] == '-';
    i = 1;
  }
  if (i >= s.size()) return false;
  long long v = 0;
  for (; i < s.size(); ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
    v = v * 10 + (s[i] - '0');
    if (v > 1'000'000'000LL) return false;
  }
  out = negative ? -v : v;
  return true;
}

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  std::string tmp(s);
  char* end = nullptr;
  out = std::strtod(tmp.c_str(), &end);
  return end == tmp.c_str() + tmp.size() && std::isfinite(out);
}

}  // namespace

int Qrels::grade(const std::string& query_id, const std::string& doc_id) const {
  auto q = judgments.find(query_id);
  if (q == judgments.end()) return 0;
  auto d = q->second.find(doc_id);
  return d == q->second.end() ? 0 : d->second;
}

std::size_t Qrels::size() const {
  std::size_t n = 0;
  for (const auto& [q, docs] : judgments) n += docs.size();
  return n;
}

Qrels parse_qrels_text(std::string_view text, const std::string& source) {
  Qrels qrels;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    const auto fields = split_fields(line);
    if (fields.empty()) return;
    if (fields.size() != 4) {
      throw ParseError(source, line_no, "expected 4 fields 'qid iter docid rel', got " +
                                            std::to_string(fields.size()));
    }
    long long grade = 0;
    if (!parse_int(fields[3], grade)) {
      throw ParseError(source, line_no, "relevance '" + std::string(fields[3]) + "' is not an integer");
    }
    if (grade < 0) {
      spdlog::warn("{}:{}: negative grade {} clamped to 0", source, line_no, grade);
      grade = 0;
    }
    auto& docs = qrels.judgments[std::string(fields[0])];
    if (!docs.emplace(std::string(fields[2]), static_cast<int>(grade)).second) {
      throw DuplicateJudgment(source, line_no, "duplicate judgment for (" + std::string(fields[0]) +
                                                   ", " + std::string(fields[2]) + ")");
    }
  });
  return qrels;
}

Qrels parse_qrels(const std::string& path) { return parse_qrels_text(read_file(path), path); }

std::string format_qrels(const Qrels& qrels) {
  std::string out;
  for (const auto& [qid, docs] : qrels.judgments) {
    for (const auto& [doc, grade] : docs) out += fmt::format("{} 0 {} {}\n", qid, doc, grade);
  }
  return out;
}

std::vector<std::string> RunFile::query_ids() const {
  std::vector<std::string> ids;
  for (const RunEntry& e : entries) {
    if (ids.empty() || ids.back() != e.query_id) ids.push_back(e.query_id);
  }
  return ids;
}

std::vector<std::string> RunFile::ranking(const std::string& query_id) const {
  std::vector<std::string> docs;
  for (const RunEntry& e : entries) {
    if (e.query_id == query_id) docs.push_back(e.doc_id);
  }
  return docs;
}

RunFile parse_run_text(std::string_view text, const std::string& source) {
  struct Parsed {
    RunEntry entry;
    std::size_t line;
  };
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<Parsed>> by_query;

  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    const auto fields = split_fields(line);
    if (fields.empty()) return;
    if (fields.size() != 6) {
      throw ParseError(source, line_no, "expected 6 fields 'qid Q0 docid rank score tag', got " +
                                            std::to_string(fields.size()));
    }
    long long rank = 0;
    if (!parse_int(fields[3], rank) || rank < 1) {
      throw ParseError(source, line_no, "rank '" + std::string(fields[3]) + "' is not a positive integer");
    }
    double score = 0.0;
    if (!parse_double(fields[4], score)) {
      throw ParseError(source, line_no, "score '" + std::string(fields[4]) + "' is not a number");
    }
    std::string qid(fields[0]);
    auto [it, inserted] = by_query.try_emplace(qid);
    if (inserted) order.push_back(qid);
    it->second.push_back({RunEntry{qid, std::string(fields[2]), static_cast<int>(rank), score,
                                   std::string(fields[5])},
                          line_no});
  });

  RunFile run;
  for (const std::string& qid : order) {
    auto& rows = by_query[qid];
    std::stable_sort(rows.begin(), rows.end(),
                     [](const Parsed& a, const Parsed& b) { return a.entry.rank < b.entry.rank; });
    std::unordered_set<std::string> docs;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const Parsed& row = rows[i];
      if (row.entry.rank != static_cast<int>(i) + 1) {
        throw NonContiguousRanks(source, row.line, "query '" + qid + "' has rank " +
                                                       std::to_string(row.entry.rank) + " where " +
                                                       std::to_string(i + 1) + " was expected");
      }
      if (!docs.insert(row.entry.doc_id).second) {
        throw ParseError(source, row.line, "document '" + row.entry.doc_id + "' listed twice for query '" + qid + "'");
      }
      if (i > 0 && row.entry.score > rows[i - 1].entry.score) {
        throw ParseError(source, row.line, "score increases with rank for query '" + qid + "'");
      }
      run.entries.push_back(row.entry);
    }
  }
  return run;
}

RunFile parse_run(const std::string& path) { return parse_run_text(read_file(path), path); }

std::string format_run(const RunFile& run) {
  std::string out;
  for (const RunEntry& e : run.entries) {
    out += fmt::format("{} Q0 {} {} {:.6f} {}\n", e.query_id, e.doc_id, e.rank, e.score, e.tag);
  }
  return out;
}

void write_run(const RunFile& run, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << format_run(run);
  if (!out) throw IoError("failed writing " + path);
}

bool same_ranking(const RunFile& a, const RunFile& b) {
  if (a.entries.size() != b.entries.size()) return false;
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    const RunEntry& x = a.entries[i];
    const RunEntry& y = b.entries[i];
    if (x.query_id != y.query_id || x.doc_id != y.doc_id || x.rank != y.rank || x.score != y.score) {
      return false;
    }
  }
  return true;
}

EvalReport ndcg_at_k(const RunFile& run, const Qrels& qrels, int k) {
  if (k < 1) throw ConfigError("NDCG cutoff must be >= 1");
  EvalReport report;
  report.metric = "ndcg@" + std::to_string(k);
  if (!run.entries.empty()) report.method_tag = run.entries.front().tag;

  const auto gain = [](int grade) { return std::exp2(static_cast<double>(grade)) - 1.0; };
  const auto discount = [](int rank) { return std::log2(static_cast<double>(rank) + 1.0); };

  for (const std::string& qid : run.query_ids()) {
    auto judged = qrels.judgments.find(qid);
    if (judged == qrels.judgments.end()) continue;
    std::vector<int> grades;
    for (const auto& [doc, grade] : judged->second) grades.push_back(grade);
    if (std::none_of(grades.begin(), grades.end(), [](int g) { return g > 0; })) continue;

    std::sort(grades.begin(), grades.end(), std::greater<>());
    double ideal = 0.0;
    for (int i = 0; i < k && i < static_cast<int>(grades.size()); ++i) ideal += gain(grades[static_cast<std::size_t>(i)]) / discount(i + 1);

    double dcg = 0.0;
    const auto docs = run.ranking(qid);
    for (int i = 0; i < k && i < static_cast<int>(docs.size()); ++i) {
      dcg += gain(qrels.grade(qid, docs[static_cast<std::size_t>(i)])) / discount(i + 1);
    }
    report.per_query[qid] = dcg / ideal;
  }

  if (!report.per_query.empty()) {
    double sum = 0.0;
    for (const auto& [q, v] : report.per_query) sum += v;
    report.mean = sum / static_cast<double>(report.per_query.size());
  }
  return report;
}

int parse_ndcg_metric(std::string_view metric) {
  constexpr std::string_view prefix = "ndcg@";
  long long k = 0;
  if (!metric.starts_with(prefix) || !parse_int(metric.substr(prefix.size()), k) || k < 1) {
    throw ConfigError("unsupported metric '" + std::string(metric) + "' (expected ndcg@k)");
  }
  return static_cast<int>(k);
}

ComparisonTable compare_methods(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw Error("no reports to compare");
  ComparisonTable table;
  table.metric = reports.front().metric;

  std::map<std::string, const EvalReport*> first_of_dataset;
  for (const EvalReport& r : reports) {
    if (r.metric != table.metric) {
      throw QuerySetMismatch("reports mix metrics " + table.metric + " and " + r.metric);
    }
    auto [it, inserted] = first_of_dataset.emplace(r.dataset, &r);
    if (inserted) {
      table.datasets.push_back(r.dataset);
    } else {
      const auto& ref = it->second->per_query;
      const bool same = ref.size() == r.per_query.size() &&
                        std::equal(ref.begin(), ref.end(), r.per_query.begin(),
                                   [](const auto& a, const auto& b) { return a.first == b.first; });
      if (!same) {
        throw QuerySetMismatch("'" + r.method_tag + "' and '" + it->second->method_tag +
                               "' were evaluated on different queries of " + r.dataset);
      }
    }

    auto row = std::find_if(table.rows.begin(), table.rows.end(),
                            [&](const ComparisonRow& x) { return x.method == r.method_tag; });
    if (row == table.rows.end()) {
      table.rows.push_back({r.method_tag, {}, {}});
      row = table.rows.end() - 1;
    }
    if (!row->values.emplace(r.dataset, r.mean).second) {
      throw Error("method '" + r.method_tag + "' reported twice for " + r.dataset);
    }
  }

  table.has_deltas = table.rows.size() > 1;
  if (table.has_deltas) {
    const ComparisonRow& baseline = table.rows.front();
    for (ComparisonRow& row : table.rows) {
      for (const auto& [dataset, value] : row.values) {
        if (auto b = baseline.values.find(dataset); b != baseline.values.end()) {
          row.deltas[dataset] = value - b->second;
        }
      }
    }
  }
  return table;
}

std::string ComparisonTable::render_text() const {
  std::size_t method_width = 6;
  for (const auto& row : rows) method_width = std::max(method_width, row.method.size());
  std::vector<std::size_t> value_width;
  std::vector<std::size_t> delta_width;
  for (const auto& ds : datasets) {
    value_width.push_back(std::max<std::size_t>(ds.size(), 7));
    delta_width.push_back(std::max<std::size_t>(ds.size() + 6, 7));
  }

  std::string out = fmt::format("{:<{}}", "method", method_width);
  for (std::size_t d = 0; d < datasets.size(); ++d) {
    out += fmt::format("  {:>{}}", datasets[d], value_width[d]);
    if (has_deltas) out += fmt::format("  {:>{}}", datasets[d] + " delta", delta_width[d]);
  }
  out += "\n";
  for (const auto& row : rows) {
    const bool baseline = &row == &rows.front();
    std::string line = fmt::format("{:<{}}", row.method, method_width);
    for (std::size_t d = 0; d < datasets.size(); ++d) {
      auto v = row.values.find(datasets[d]);
      line += v == row.values.end() ? fmt::format("  {:>{}}", "-", value_width[d])
                                    : fmt::format("  {:>{}.4f}", v->second, value_width[d]);
      if (!has_deltas) continue;
      auto delta = row.deltas.find(datasets[d]);
      line += (delta == row.deltas.end() || baseline)
                  ? fmt::format("  {:>{}}", "", delta_width[d])
                  : fmt::format("  {:>+{}.4f}", delta->second, delta_width[d]);
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

nlohmann::json ComparisonTable::to_json() const {
  nlohmann::json j{{"metric", metric}, {"datasets", datasets}, {"rows", nlohmann::json::array()}};
  if (has_deltas) j["baseline"] = rows.front().method;
  for (const auto& row : rows) {
    nlohmann::json r{{"method", row.method}, {"values", row.values}};
    if (has_deltas) r["deltas"] = row.deltas;
    j["rows"].push_back(std::move(r));
  }
  return j;
}

double kendall_tau(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw Error("kendall_tau needs orderings of equal length");
  const std::size_t n = a.size();
  if (n < 2) return 1.0;
  std::unordered_map<int, std::size_t> pos_b;
  for (std::size_t i = 0; i < n; ++i) pos_b[b[i]] = i;
  if (pos_b.size() != n) throw Error("kendall_tau needs orderings without repeats");

  // Position in b of each entry of a.
  std::vector<std::size_t> pos(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto it = pos_b.find(a[i]);
    if (it == pos_b.end()) throw Error("kendall_tau needs orderings of the same items");
    pos[i] = it->second;
  }
  long long concordant = 0;
  long long discordant = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (pos[i] < pos[j]) ++concordant;
      else ++discordant;
    }
  }
  return static_cast<double>(concordant - discordant) / (static_cast<double>(n * (n - 1)) / 2.0);
}

std::vector<RerankTask> parse_tasks_text(std::string_view text, IdentifierScheme scheme,
                                         PlaceholderPolicy placeholder, const std::string& source) {
  std::vector<RerankTask> tasks;
  std::set<std::string> seen;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) return;
    try {
      const auto j = nlohmann::json::parse(line);
      Query query{j.at("query_id").get<std::string>(), normalize_whitespace(j.at("query_text").get<std::string>())};
      if (query.text.empty()) throw ParseError(source, line_no, "blank query_text");
      if (!seen.insert(query.id).second) {
        throw ParseError(source, line_no, "query_id '" + query.id + "' appears twice");
      }
      std::vector<std::pair<std::string, std::string>> docs;
      for (const auto& c : j.at("candidates")) {
        docs.emplace_back(c.at("doc_id").get<std::string>(), normalize_whitespace(c.value("text", std::string())));
      }
      tasks.push_back(make_task(std::move(query), docs, scheme, placeholder));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(source, line_no, e.what());
    }
  });
  return tasks;
}

std::vector<RerankTask> load_tasks(const std::string& path, IdentifierScheme scheme,
                                   PlaceholderPolicy placeholder) {
  return parse_tasks_text(read_file(path), scheme, std::move(placeholder), path);
}

std::string format_tasks(const std::vector<RerankTask>& tasks) {
  std::string out;
  for (const RerankTask& task : tasks) {
    nlohmann::json j{{"query_id", task.query.id}, {"query_text", task.query.text},
                     {"candidates", nlohmann::json::array()}};
    for (const Candidate& c : task.candidates) {
      j["candidates"].push_back({{"doc_id", c.doc_id}, {"text", c.text}});
    }
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace capcal
