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

#include "capcal/calibration.hpp"

#include <algorithm>
#include <climits>
#include <numeric>

namespace capcal {

void CalibrationConfig::validate() const {
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be a finite value >= 0");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
  if (terminator.empty()) throw ConfigError("terminator must be non-empty");
  if (window_cap < 2) throw ConfigError("window cap must be >= 2");
}

std::string_view to_string(PriorMode mode) {
  return mode == PriorMode::lockstep ? "lockstep" : "static_renormalized";
}

std::string_view to_string(PriorNormalization norm) {
  return norm == PriorNormalization::renormalized ? "renormalized" : "raw";
}

PriorMode prior_mode_from_string(std::string_view s) {
  if (s == "lockstep") return PriorMode::lockstep;
  if (s == "static_renormalized" || s == "static") return PriorMode::static_renormalized;
  throw ConfigError("unknown prior mode '" + std::string(s) + "'");
}

PriorNormalization prior_normalization_from_string(std::string_view s) {
  if (s == "renormalized") return PriorNormalization::renormalized;
  if (s == "raw") return PriorNormalization::raw;
  throw ConfigError("unknown prior normalization '" + std::string(s) + "'");
}

double joint_identifier_prob(const LmBackend& backend, const std::string& prompt,
                             const std::string& prefix, std::string_view label,
                             std::string_view terminator) {
  ScoringRequest req{prompt, prefix, {backend.tokenize_label(label, terminator)}};
  const auto scores = backend.score_continuations(req);
  check_scores(req, scores);
  return std::exp(scores.front().total_logprob);
}

namespace {

Eigen::VectorXd score_labels(const LmBackend& backend, const std::string& prompt,
                             const std::string& prefix, const std::vector<TokenSeq>& continuations) {
  ScoringRequest req{prompt, prefix, continuations};
  const auto scores = backend.score_continuations(req);
  check_scores(req, scores);
  Eigen::VectorXd probs(static_cast<Eigen::Index>(scores.size()));
  for (std::size_t i = 0; i < scores.size(); ++i) {
    probs[static_cast<Eigen::Index>(i)] = std::exp(scores[i].total_logprob);
  }
  return probs;
}

CalibratedRanking greedy_decode(const LmBackend& backend, const RerankTask& task,
                                const PromptTemplate& tmpl, const CalibrationConfig& config,
                                bool calibrate) {
  config.validate();
  validate_task(task, config.window_cap);
  const int n = task.size();

  CalibratedRanking result;
  result.config_used = config;
  result.calibrated = calibrate;
  result.trace.reserve(static_cast<std::size_t>(n));

  try {
    const std::string main_prompt = render_main_prompt(task, tmpl);
    const std::string empty_prompt = calibrate ? render_empty_prompt(task, tmpl) : std::string();

    std::vector<std::string> labels(static_cast<std::size_t>(n) + 1);
    std::vector<TokenSeq> tokens(static_cast<std::size_t>(n) + 1);
    for (int idx = 1; idx <= n; ++idx) {
      labels[static_cast<std::size_t>(idx)] = task.scheme.render(idx);
      tokens[static_cast<std::size_t>(idx)] =
          backend.tokenize_label(labels[static_cast<std::size_t>(idx)], config.terminator);
    }

    std::vector<int> remaining(static_cast<std::size_t>(n));
    std::iota(remaining.begin(), remaining.end(), 1);
    Eigen::VectorXd static_prior;  // indexed by original_index - 1
    std::string emitted;

    for (int k = 1; k <= n; ++k) {
      std::vector<TokenSeq> continuations;
      continuations.reserve(remaining.size());
      for (int idx : remaining) continuations.push_back(tokens[static_cast<std::size_t>(idx)]);
      const std::string prefix = emitted + "[";

      StepTrace step;
      step.step_index = k;
      step.remaining = remaining;
      step.p_main = score_labels(backend, main_prompt, prefix, continuations);

      CalibrationStep<double> calc;
      if (calibrate) {
        Eigen::VectorXd p_prior;
        if (config.prior_mode == PriorMode::lockstep) {
          p_prior = score_labels(backend, empty_prompt, prefix, continuations);
        } else {
          if (k == 1) static_prior = score_labels(backend, empty_prompt, prefix, continuations);
          p_prior.resize(static_cast<Eigen::Index>(remaining.size()));
          for (std::size_t i = 0; i < remaining.size(); ++i) {
            p_prior[static_cast<Eigen::Index>(i)] = static_prior[remaining[i] - 1];
          }
        }
        calc = calibrate_step(step.p_main, p_prior, config.beta, config.prior_normalization,
                              config.epsilon);
        step.p_prior = std::move(p_prior);
      } else {
        calc = base_step(step.p_main, config.epsilon);
      }
      step.entropy_h = calc.entropy;
      step.alpha_k = calc.alpha;
      step.scores = std::move(calc.scores);

      const Eigen::Index best = select_candidate(step.scores, step.p_main, remaining);
      step.chosen = remaining[static_cast<std::size_t>(best)];
      result.permutation.order.push_back(step.chosen);
      result.trace.push_back(std::move(step));

      const int chosen = result.permutation.order.back();
      remaining.erase(remaining.begin() + best);
      emitted += "[" + labels[static_cast<std::size_t>(chosen)] + "]";
      if (k < n) emitted += " > ";
    }
  } catch (const DecodeError&) {
    throw;
  } catch (const BackendError& e) {
    const std::string what = "query '" + task.query.id + "' failed at step " +
                             std::to_string(result.trace.size() + 1) + ": " + e.what();
    throw DecodeError(what, std::move(result));
  }
  return result;
}

}  // namespace

CalibratedRanking decode_capcal(const LmBackend& backend, const RerankTask& task,
                                const PromptTemplate& tmpl, const CalibrationConfig& config) {
  return greedy_decode(backend, task, tmpl, config, true);
}

CalibratedRanking decode_base(const LmBackend& backend, const RerankTask& task,
                              const PromptTemplate& tmpl, const CalibrationConfig& config) {
  return greedy_decode(backend, task, tmpl, config, false);
}

RankedList to_ranked_list(const CalibratedRanking& ranking) {
  RankedList list{ranking.permutation, {}};
  list.decision_scores.reserve(ranking.trace.size());
  for (const StepTrace& step : ranking.trace) {
    list.decision_scores.push_back(step.scores[step.chosen_slot()]);
  }
  return list;
}

RankedList sliding_window_rerank(const RerankTask& task, int window, int stride,
                                 const Ranker& inner, int cap) {
  if (window < 2 || window > cap) {
    throw ConfigError("window must be in [2, " + std::to_string(cap) + "]");
  }
  if (stride < 1 || stride >= window) throw ConfigError("stride must be in [1, window)");
  validate_task(task, INT_MAX);

  const int n = task.size();
  if (n <= window) return inner(task);

  // Current order as source original indices, with the latest decision score
  // each document received.
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 1);
  std::vector<double> decision(static_cast<std::size_t>(n) + 1, 0.0);

  int end = n;
  while (true) {
    const int start = std::max(0, end - window);
    RerankTask sub{task.query, {}, task.scheme, task.placeholder};
    for (int pos = start; pos < end; ++pos) {
      Candidate c = task.candidates[static_cast<std::size_t>(order[static_cast<std::size_t>(pos)] - 1)];
      c.original_index = pos - start + 1;
      sub.candidates.push_back(std::move(c));
    }

    const RankedList ranked = inner(sub);
    if (!validate_permutation(ranked.permutation, sub.size())) {
      throw Error("window ranker returned an invalid permutation");
    }
    std::vector<int> reordered;
    reordered.reserve(ranked.permutation.order.size());
    for (std::size_t r = 0; r < ranked.permutation.order.size(); ++r) {
      const int source = order[static_cast<std::size_t>(start + ranked.permutation.order[r] - 1)];
      reordered.push_back(source);
      if (r < ranked.decision_scores.size()) decision[static_cast<std::size_t>(source)] = ranked.decision_scores[r];
    }
    std::copy(reordered.begin(), reordered.end(), order.begin() + start);

    if (start == 0) break;
    end -= stride;
  }

  RankedList result{Permutation{order}, {}};
  result.decision_scores.reserve(order.size());
  for (int idx : order) result.decision_scores.push_back(decision[static_cast<std::size_t>(idx)]);
  return result;
}

}  // namespace capcal
