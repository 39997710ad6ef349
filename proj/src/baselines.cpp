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

#include "capcal/baselines.hpp"

#include <algorithm>
#include <climits>
#include <map>
#include <numeric>
#include <random>
#include <unordered_map>

#include "capcal/errors.hpp"
#include "capcal/random.hpp"

namespace capcal {

Permutation ShuffledTask::to_source(const Permutation& shuffled) const {
  Permutation out;
  out.order.reserve(shuffled.order.size());
  for (int slot : shuffled.order) out.order.push_back(source_index.at(static_cast<std::size_t>(slot - 1)));
  return out;
}

ShuffledTask shuffle_candidates(const RerankTask& task, std::uint64_t seed) {
  ShuffledTask out{task, {}};
  out.source_index.resize(task.candidates.size());
  std::iota(out.source_index.begin(), out.source_index.end(), 1);

  std::mt19937_64 gen(seed);
  for (std::size_t i = out.source_index.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_below(gen, i));
    std::swap(out.source_index[i - 1], out.source_index[j]);
  }
  for (std::size_t slot = 0; slot < out.source_index.size(); ++slot) {
    Candidate c = task.candidates[static_cast<std::size_t>(out.source_index[slot] - 1)];
    c.original_index = static_cast<int>(slot) + 1;
    out.task.candidates[slot] = std::move(c);
  }
  return out;
}

std::string_view to_string(RankAggregation agg) {
  return agg == RankAggregation::mean_rank ? "mean_rank" : "median_rank";
}

RankAggregation rank_aggregation_from_string(std::string_view s) {
  if (s == "mean_rank" || s == "mean") return RankAggregation::mean_rank;
  if (s == "median_rank" || s == "median") return RankAggregation::median_rank;
  throw ConfigError("unknown rank aggregation '" + std::string(s) + "'");
}

void PscConfig::validate() const {
  if (k_permutations < 1) throw ConfigError("PSC needs at least one permutation");
}

AggregatedRanking aggregate_rankings(const std::vector<std::vector<std::string>>& rankings,
                                     RankAggregation aggregation) {
  if (rankings.empty()) throw Error("no rankings to aggregate");
  std::map<std::string, std::vector<int>> ranks;
  for (std::size_t r = 0; r < rankings[0].size(); ++r) ranks[rankings[0][r]];
  if (ranks.size() != rankings[0].size()) throw Error("ranking lists a document twice");

  for (const auto& ranking : rankings) {
    if (ranking.size() != ranks.size()) throw Error("rankings cover different documents");
    for (std::size_t r = 0; r < ranking.size(); ++r) {
      auto it = ranks.find(ranking[r]);
      if (it == ranks.end()) throw Error("document '" + ranking[r] + "' missing from another ranking");
      it->second.push_back(static_cast<int>(r) + 1);
    }
  }

  std::vector<std::pair<double, std::string>> scored;
  scored.reserve(ranks.size());
  for (auto& [doc, positions] : ranks) {
    if (positions.size() != rankings.size()) throw Error("ranking lists a document twice");
    double value;
    if (aggregation == RankAggregation::mean_rank) {
      value = static_cast<double>(std::accumulate(positions.begin(), positions.end(), 0LL)) /
              static_cast<double>(positions.size());
    } else {
      std::sort(positions.begin(), positions.end());
      const std::size_t m = positions.size();
      value = m % 2 == 1 ? positions[m / 2] : 0.5 * (positions[m / 2 - 1] + positions[m / 2]);
    }
    scored.emplace_back(value, doc);
  }
  std::sort(scored.begin(), scored.end());

  AggregatedRanking out;
  for (auto& [value, doc] : scored) {
    out.doc_ids.push_back(std::move(doc));
    out.aggregate.push_back(value);
  }
  return out;
}

RankedList psc_rerank(const RerankTask& task, const PscConfig& config, const Ranker& inner) {
  config.validate();
  validate_task(task, INT_MAX);

  std::vector<std::vector<std::string>> passes;
  passes.reserve(static_cast<std::size_t>(config.k_permutations));
  for (int pass = 0; pass < config.k_permutations; ++pass) {
    const ShuffledTask shuffled = shuffle_candidates(task, mix_seed(config.seed, static_cast<std::uint64_t>(pass)));
    const RankedList ranked = inner(shuffled.task);
    if (!validate_permutation(ranked.permutation, task.size())) {
      throw Error("PSC pass " + std::to_string(pass) + " returned an invalid permutation");
    }
    std::vector<std::string> doc_ids;
    for (int idx : shuffled.to_source(ranked.permutation).order) {
      doc_ids.push_back(task.candidates[static_cast<std::size_t>(idx - 1)].doc_id);
    }
    passes.push_back(std::move(doc_ids));
  }

  const AggregatedRanking agg = aggregate_rankings(passes, config.aggregation);
  std::unordered_map<std::string_view, int> index_of;
  for (const Candidate& c : task.candidates) index_of.emplace(c.doc_id, c.original_index);

  RankedList out;
  for (std::size_t r = 0; r < agg.doc_ids.size(); ++r) {
    out.permutation.order.push_back(index_of.at(agg.doc_ids[r]));
    out.decision_scores.push_back(-agg.aggregate[r]);
  }
  return out;
}

}  // namespace capcal
