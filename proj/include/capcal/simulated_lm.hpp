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
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "capcal/lm_backend.hpp"
#include "capcal/prompting.hpp"

namespace capcal {

/// Parameters of the synthetic language model.
///
/// Candidate logit for list slot j (1-based) is
///   main prompt:          (relevance(q, d_j) + position_bias[j-1]) / temperature
///   content-free prompt:  position_bias[j-1] / temperature
/// Slots past the end of `position_bias` have zero bias.
struct SimulatedLmSpec {
  std::map<std::string, std::map<std::string, double>> relevance;  // query_id -> doc_id -> logit
  std::vector<double> position_bias;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  /// Pairs absent from `relevance` get a logit drawn uniformly from [-1, 1]
  /// by a generator keyed on (seed, query_id, doc_id) instead of 0.
  bool fill_missing = false;
};

/// Reads the JSON form:
///   {"relevance": {"q1": {"d1": 1.5}}, "position_bias": [2, 0, 0],
///    "temperature": 1.0, "seed": 7, "fill_missing": false}
SimulatedLmSpec load_simulated_lm_spec(const std::string& path);
SimulatedLmSpec parse_simulated_lm_spec(const std::string& json_text);

/// Deterministic scorer for prompts rendered by this library.
///
/// Prompts are parsed back with the template. The query text selects the
/// task; a prompt whose passages are all registered documents of that query is
/// a main prompt. A prompt whose passages are all unregistered, or all
/// identical, is content-free. Anything else is an UnrecognizedPrompt.
///
/// Label tokens are single characters followed by the terminator, and all of
/// a label's probability mass sits on its first token. Scores are a softmax
/// restricted to the requested labels not already bracketed in the prefix;
/// bracketed labels score -inf.
class SimulatedLM final : public LmBackend {
 public:
  SimulatedLM(SimulatedLmSpec spec, const std::vector<RerankTask>& tasks,
              PromptTemplate tmpl = PromptTemplate::standard());

  std::vector<ContinuationScore> score_continuations(const ScoringRequest& req) const override;
  TokenSeq tokenize_label(std::string_view label, std::string_view terminator) const override;

  const SimulatedLmSpec& spec() const noexcept { return spec_; }

  /// Relevance logit the simulator assigns to (query_id, doc_id).
  double relevance(const std::string& query_id, const std::string& doc_id) const;

  /// Candidate logits the simulator would use for `prompt`, one per passage
  /// line, before exclusion and softmax.
  std::vector<double> prompt_logits(std::string_view prompt) const;

 private:
  struct QueryIndex {
    std::string query_id;
    std::unordered_map<std::string, double> logit_by_text;
  };

  std::vector<double> logits_for(const ParsedPrompt& parsed) const;

  SimulatedLmSpec spec_;
  PromptTemplate template_;
  std::unordered_map<std::string, QueryIndex> by_query_text_;
};

}  // namespace capcal
