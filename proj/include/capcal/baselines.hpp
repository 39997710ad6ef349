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

#include <cstdint>
#include <string>
#include <vector>

#include "capcal/calibration.hpp"
#include "capcal/domain.hpp"

namespace capcal {

/// A reordered copy of a task. Candidates are re-slotted 1..N in their new
/// order; `source_index[slot - 1]` is the candidate's original_index in the
/// source task.
struct ShuffledTask {
  RerankTask task;
  std::vector<int> source_index;

  /// Maps a permutation of the shuffled task back to source indices.
  Permutation to_source(const Permutation& shuffled) const;
};

/// Uniform Fisher-Yates shuffle driven by a generator seeded with `seed`.
ShuffledTask shuffle_candidates(const RerankTask& task, std::uint64_t seed);

enum class RankAggregation { mean_rank, median_rank };

std::string_view to_string(RankAggregation agg);
RankAggregation rank_aggregation_from_string(std::string_view s);

struct PscConfig {
  int k_permutations = 10;
  std::uint64_t seed = 0;
  RankAggregation aggregation = RankAggregation::mean_rank;

  void validate() const;
};

struct AggregatedRanking {
  std::vector<std::string> doc_ids;  // best first
  std::vector<double> aggregate;     // aggregate rank of each entry in doc_ids
};

/// Orders documents by their mean (or median) 1-based rank across `rankings`,
/// ties broken by doc_id. Every ranking must list the same documents.
AggregatedRanking aggregate_rankings(const std::vector<std::vector<std::string>>& rankings,
                                     RankAggregation aggregation);

/// Permutation self-consistency: runs `inner` on k shuffled copies of the task
/// (pass i uses seed mix(config.seed, i)) and aggregates the per-document
/// ranks. Any failed pass aborts the whole call. Decision scores are the
/// negated aggregate ranks.
RankedList psc_rerank(const RerankTask& task, const PscConfig& config, const Ranker& inner);

}  // namespace capcal
