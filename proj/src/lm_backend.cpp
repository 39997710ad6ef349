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

#include "capcal/lm_backend.hpp"

#include <cmath>
#include <numeric>

#include "capcal/errors.hpp"

namespace capcal {

ContinuationScore ContinuationScore::from_logprobs(TokenSeq continuation,
                                                   std::vector<double> logprobs) {
  ContinuationScore score{std::move(continuation), std::move(logprobs), 0.0};
  score.total_logprob = std::accumulate(score.token_logprobs.begin(), score.token_logprobs.end(), 0.0);
  return score;
}

void check_scores(const ScoringRequest& req, const std::vector<ContinuationScore>& scores) {
  if (scores.size() != req.continuations.size()) {
    throw MalformedResponse("expected " + std::to_string(req.continuations.size()) +
                            " continuation scores, got " + std::to_string(scores.size()));
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const ContinuationScore& s = scores[i];
    if (s.continuation.rendered != req.continuations[i].rendered) {
      throw MalformedResponse("score " + std::to_string(i) + " answers '" + s.continuation.rendered +
                              "' instead of '" + req.continuations[i].rendered + "'");
    }
    if (s.token_logprobs.size() != s.continuation.tokens.size()) {
      throw MalformedResponse("token/logprob count mismatch for '" + s.continuation.rendered + "'");
    }
    for (double lp : s.token_logprobs) {
      if (std::isnan(lp) || lp > 0.0) {
        throw MalformedResponse("invalid log-probability for '" + s.continuation.rendered + "'");
      }
    }
  }
}

}  // namespace capcal
