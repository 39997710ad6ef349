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

#include <string>
#include <string_view>
#include <vector>

#include "capcal/domain.hpp"

namespace capcal {

/// Teacher-forced scoring of candidate continuations after prompt + prefix.
struct ScoringRequest {
  std::string prompt;
  std::string prefix;
  std::vector<TokenSeq> continuations;
};

/// Natural-log probabilities, one per continuation token.
struct ContinuationScore {
  TokenSeq continuation;
  std::vector<double> token_logprobs;
  double total_logprob = 0.0;

  static ContinuationScore from_logprobs(TokenSeq continuation, std::vector<double> logprobs);
};

/// Uniform scoring surface over a language model. Implementations must be
/// safe to call concurrently and must return identical scores for identical
/// requests.
class LmBackend {
 public:
  virtual ~LmBackend() = default;

  /// One score per continuation, in request order.
  virtual std::vector<ContinuationScore> score_continuations(const ScoringRequest& req) const = 0;

  /// Token sequence rendering `label + terminator` under the backend tokenizer.
  virtual TokenSeq tokenize_label(std::string_view label, std::string_view terminator) const = 0;
};

/// Throws MalformedResponse unless `scores` answers `req` one-to-one with
/// well-formed log-probabilities.
void check_scores(const ScoringRequest& req, const std::vector<ContinuationScore>& scores);

}  // namespace capcal
