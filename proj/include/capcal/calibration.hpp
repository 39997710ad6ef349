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

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "capcal/domain.hpp"
#include "capcal/errors.hpp"
#include "capcal/lm_backend.hpp"
#include "capcal/prompting.hpp"

namespace capcal {

/// How the content-free stream is conditioned across decode steps.
enum class PriorMode {
  /// The empty prompt is scored at every step with the same generated prefix
  /// as the main prompt.
  lockstep,
  /// The empty prompt is scored once at the first step; later steps restrict
  /// that distribution to the remaining candidates.
  static_renormalized,
};

/// Whether the prior is renormalized over the remaining candidates before it
/// is compared with the uniform baseline.
enum class PriorNormalization { renormalized, raw };

enum class TieBreak { by_main_prob_then_lowest_index };

struct CalibrationConfig {
  double beta = 1.0;
  PriorMode prior_mode = PriorMode::lockstep;
  PriorNormalization prior_normalization = PriorNormalization::renormalized;
  std::string terminator = "]";
  TieBreak tie_break = TieBreak::by_main_prob_then_lowest_index;
  /// Mass at or below which a distribution counts as empty.
  double epsilon = 1e-12;
  int window_cap = kDefaultWindowCap;

  void validate() const;
};

std::string_view to_string(PriorMode mode);
std::string_view to_string(PriorNormalization norm);
PriorMode prior_mode_from_string(std::string_view s);
PriorNormalization prior_normalization_from_string(std::string_view s);

struct CalibratedRanking {
  Permutation permutation;
  std::vector<StepTrace> trace;
  CalibrationConfig config_used;
  /// False for the uncalibrated decoder.
  bool calibrated = false;
};

/// A backend failure in the middle of a decode. Carries the steps completed
/// before the failure.
class DecodeError : public BackendError {
 public:
  DecodeError(const std::string& what, CalibratedRanking partial)
      : BackendError(what), partial_(std::move(partial)) {}

  const CalibratedRanking& partial() const noexcept { return partial_; }

 private:
  CalibratedRanking partial_;
};

// ---------------------------------------------------------------------------
// Per-step arithmetic. Probability vectors are aligned with the remaining
// candidate set; the caller keeps the index mapping.
// ---------------------------------------------------------------------------

/// Shannon entropy (nats) of `probs` after normalizing it to sum to one, with
/// 0 ln 0 = 0. If every entry is at or below `floor` the distribution carries
/// no preference and the maximum ln(n) is returned. Result lies in [0, ln n].
template <typename Derived>
typename Derived::Scalar shannon_entropy(const Eigen::MatrixBase<Derived>& probs,
                                         typename Derived::Scalar floor) {
  using Scalar = typename Derived::Scalar;
  using std::log;
  const Eigen::Index n = probs.size();
  if (n <= 1) return Scalar(0);
  const Scalar max_entropy = log(static_cast<Scalar>(n));
  if (probs.maxCoeff() <= floor) return max_entropy;

  const Scalar total = probs.sum();
  Scalar h(0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar p = probs[i] / total;
    if (p > Scalar(0)) h -= p * log(p);
  }
  if (h < Scalar(0)) return Scalar(0);
  return h > max_entropy ? max_entropy : h;
}

template <typename Scalar>
struct CalibrationStep {
  Scalar entropy;
  Scalar alpha;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> scores;
};

/// Calibrated scores over the remaining candidates:
///   alpha = beta * H(p_main)
///   S_i   = p_main_i - alpha * (prior_i - 1/n)
/// where prior is `p_prior` renormalized over the remaining set (or left as is
/// for PriorNormalization::raw). A prior with no mass above `floor` is treated
/// as uniform.
template <typename DerivedMain, typename DerivedPrior>
CalibrationStep<typename DerivedMain::Scalar> calibrate_step(
    const Eigen::MatrixBase<DerivedMain>& p_main, const Eigen::MatrixBase<DerivedPrior>& p_prior,
    typename DerivedMain::Scalar beta, PriorNormalization normalization,
    typename DerivedMain::Scalar floor) {
  using Scalar = typename DerivedMain::Scalar;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  eigen_assert(p_main.size() == p_prior.size());

  const Eigen::Index n = p_main.size();
  const Scalar uniform = Scalar(1) / static_cast<Scalar>(n);
  const Scalar entropy = shannon_entropy(p_main, floor);
  const Scalar alpha = beta * entropy;

  Vector deviation = Vector::Zero(n);
  if (p_prior.maxCoeff() > floor) {
    if (normalization == PriorNormalization::renormalized) {
      deviation = (p_prior / p_prior.sum()).array() - uniform;
    } else {
      deviation = p_prior.array() - uniform;
    }
  }
  Vector scores = p_main - alpha * deviation;
  return {entropy, alpha, std::move(scores)};
}

/// Uncalibrated step: S = p_main, alpha = 0.
template <typename Derived>
CalibrationStep<typename Derived::Scalar> base_step(const Eigen::MatrixBase<Derived>& p_main,
                                                    typename Derived::Scalar floor) {
  using Scalar = typename Derived::Scalar;
  return {shannon_entropy(p_main, floor), Scalar(0), p_main};
}

/// Position of the winner among aligned candidates: highest score, then
/// highest main probability, then lowest original index.
template <typename DerivedScores, typename DerivedMain>
Eigen::Index select_candidate(const Eigen::MatrixBase<DerivedScores>& scores,
                              const Eigen::MatrixBase<DerivedMain>& p_main,
                              const std::vector<int>& original_index) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < scores.size(); ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const auto ub = static_cast<std::size_t>(best);
    if (scores[i] > scores[best] ||
        (scores[i] == scores[best] &&
         (p_main[i] > p_main[best] ||
          (p_main[i] == p_main[best] && original_index[ui] < original_index[ub])))) {
      best = i;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Decoders
// ---------------------------------------------------------------------------

/// P(label + terminator | prompt + prefix): the product of the continuation's
/// token probabilities.
double joint_identifier_prob(const LmBackend& backend, const std::string& prompt,
                             const std::string& prefix, std::string_view label,
                             std::string_view terminator = "]");

/// Greedy constrained decode with the content-free prior subtracted at every
/// step. At step k the scoring prefix is the ranking emitted so far followed
/// by "[", e.g. "[3] > [1] > [". Throws DecodeError on backend failure.
CalibratedRanking decode_capcal(const LmBackend& backend, const RerankTask& task,
                                const PromptTemplate& tmpl, const CalibrationConfig& config);

/// The same loop ranking by the main-prompt probability alone. No content-free
/// pass is made and trace entries carry no prior.
CalibratedRanking decode_base(const LmBackend& backend, const RerankTask& task,
                              const PromptTemplate& tmpl, const CalibrationConfig& config = {});

/// A ranking plus the decision score behind each position (S for the
/// calibrated decoder, p_main for the base one), aligned with `permutation`.
struct RankedList {
  Permutation permutation;
  std::vector<double> decision_scores;
};

RankedList to_ranked_list(const CalibratedRanking& ranking);

using Ranker = std::function<RankedList(const RerankTask&)>;

/// Reranks lists longer than one prompt window by applying `inner` to
/// overlapping windows from the tail of the list to its head, moving each
/// window's winners forward. Windows are [max(0, end - window), end) with end
/// starting at N and shrinking by `stride` until a window reaches the head.
/// Requires 2 <= window <= cap and 1 <= stride < window.
RankedList sliding_window_rerank(const RerankTask& task, int window, int stride,
                                 const Ranker& inner, int cap = kDefaultWindowCap);

}  // namespace capcal
