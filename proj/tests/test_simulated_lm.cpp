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

#include <doctest.h>

#include <cmath>
#include <numeric>

#include "capcal/errors.hpp"
#include "capcal/simulated_lm.hpp"
#include "support.hpp"

using namespace capcal;

namespace {

std::vector<double> probs(const LmBackend& lm, const RerankTask& task, bool empty, const std::string& prefix = "[") {
  ScoringRequest req;
  req.prompt = empty ? render_empty_prompt(task, PromptTemplate::standard())
                     : render_main_prompt(task, PromptTemplate::standard());
  req.prefix = prefix;
  for (int i = 1; i <= task.size(); ++i) req.continuations.push_back(lm.tokenize_label(task.scheme.render(i), "]"));
  const auto scores = lm.score_continuations(req);
  check_scores(req, scores);
  std::vector<double> out;
  for (const auto& s : scores) out.push_back(std::exp(s.total_logprob));
  return out;
}

}  // namespace

TEST_CASE("unbiased simulator gives uniform log-probabilities") {
  const RerankTask task = testing::synthetic_task(1, 4);
  const SimulatedLM lm(testing::slot_relevance_spec({task}, {0, 0, 0, 0}, {}), {task});
  ScoringRequest req{render_main_prompt(task, PromptTemplate::standard()), "[", {}};
  for (int i = 1; i <= 4; ++i) req.continuations.push_back(lm.tokenize_label(std::to_string(i), "]"));
  for (const auto& s : lm.score_continuations(req)) CHECK(s.total_logprob == doctest::Approx(std::log(0.25)));
}

TEST_CASE("content-free prompt reflects only the position bias") {
  const RerankTask task = testing::synthetic_task(1, 4);
  const SimulatedLM lm(testing::slot_relevance_spec({task}, {0, 0, 0, 0}, {2, 0, 0, 0}), {task});
  const auto p = probs(lm, task, true);
  CHECK(p[0] == doctest::Approx(0.7112345942275938));
  for (int i = 1; i < 4; ++i) CHECK(p[i] == doctest::Approx(0.09625513525746872));
}

TEST_CASE("main prompt combines relevance and bias") {
  const RerankTask task = testing::synthetic_task(2, 3);
  const SimulatedLM lm(testing::slot_relevance_spec({task}, {1, 0, -1}, {}), {task});
  const auto p = probs(lm, task, false);
  CHECK(p[0] == doctest::Approx(0.6652409557748219));
  CHECK(p[1] == doctest::Approx(0.24472847105479767));
  CHECK(p[2] == doctest::Approx(0.09003057317038046));

  const SimulatedLM hot(testing::slot_relevance_spec({task}, {2, 0, -2}, {}, 2.0), {task});
  const auto q = probs(hot, task, false);
  for (int i = 0; i < 3; ++i) CHECK(q[i] == doctest::Approx(p[i]));
}

TEST_CASE("labels already in the prefix are excluded") {
  const RerankTask task = testing::synthetic_task(2, 3);
  const SimulatedLM lm(testing::slot_relevance_spec({task}, {1, 0, -1}, {}), {task});
  const auto p = probs(lm, task, false, "[2] > [");
  CHECK(p[1] == 0.0);
  const double rest = 0.6652409557748219 + 0.09003057317038046;
  CHECK(p[0] == doctest::Approx(0.6652409557748219 / rest));
  CHECK(p[2] == doctest::Approx(0.09003057317038046 / rest));
}

TEST_CASE("content-free scores do not depend on relevance") {
  const RerankTask task = testing::synthetic_task(5, 6);
  const std::vector<double> bias{0.9, -0.3, 0.1, 0.0, -1.2, 0.4};
  const SimulatedLM a(testing::slot_relevance_spec({task}, {3, -2, 1, 0, 5, -4}, bias), {task});
  const SimulatedLM b(testing::slot_relevance_spec({task}, {-1, 0, 0, 2, 0, 7}, bias), {task});
  for (auto kind : {PlaceholderKind::fixed_string, PlaceholderKind::passage1_copy, PlaceholderKind::space_len_i}) {
    RerankTask t = task;
    t.placeholder.kind = kind;
    const auto pa = probs(a, t, true);
    const auto pb = probs(b, t, true);
    for (int i = 0; i < 6; ++i) CHECK(pa[i] == doctest::Approx(pb[i]).epsilon(1e-12));
  }
  CHECK(probs(a, task, false) != probs(b, task, false));
}

TEST_CASE("multi-digit labels tokenize into several tokens") {
  const RerankTask task = testing::synthetic_task(1, 12);
  const SimulatedLM lm(testing::slot_relevance_spec({task}, {}, {}), {task});
  const TokenSeq ten = lm.tokenize_label("10", "]");
  CHECK(ten.tokens.size() >= 2);
  CHECK(ten.rendered == "10]");
  CHECK(ten.consistent());
  const auto p = probs(lm, task, false);
  CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0));
  CHECK(p[9] == doctest::Approx(1.0 / 12));
}

TEST_CASE("simulator rejects prompts it did not render") {
  const RerankTask task = testing::synthetic_task(1, 3);
  const SimulatedLM lm(testing::slot_relevance_spec({task}, {}, {}), {task});
  const auto conts = std::vector<TokenSeq>{lm.tokenize_label("1", "]")};
  CHECK_THROWS_AS(lm.score_continuations({"free text", "[", conts}), UnrecognizedPrompt);

  const RerankTask other = testing::synthetic_task(2, 3);
  CHECK_THROWS_AS(lm.score_continuations({render_main_prompt(other, PromptTemplate::standard()), "[", conts}),
                  UnrecognizedPrompt);

  RerankTask mixed = task;
  mixed.candidates[1].text = "an unregistered passage";
  CHECK_THROWS_AS(lm.score_continuations({render_main_prompt(mixed, PromptTemplate::standard()), "[", conts}),
                  UnrecognizedPrompt);

  CHECK_THROWS_AS(
      lm.score_continuations({render_main_prompt(task, PromptTemplate::standard()), "[", {lm.tokenize_label("7", "]")}}),
      UnrecognizedPrompt);
}

TEST_CASE("spec JSON") {
  const auto spec = parse_simulated_lm_spec(
      R"({"relevance": {"q1": {"d1": 1.5, "d2": -0.5}}, "position_bias": [2, 0, 0], "temperature": 0.5,
          "seed": 7, "fill_missing": true})");
  CHECK(spec.relevance.at("q1").at("d1") == 1.5);
  CHECK(spec.position_bias == std::vector<double>{2, 0, 0});
  CHECK(spec.temperature == 0.5);
  CHECK(spec.seed == 7);
  CHECK(spec.fill_missing);

  const SimulatedLM lm(spec, {});
  CHECK(lm.relevance("q1", "d2") == -0.5);
  const double filled = lm.relevance("q1", "d9");
  CHECK(filled >= -1.0);
  CHECK(filled <= 1.0);
  CHECK(lm.relevance("q1", "d9") == filled);

  CHECK(parse_simulated_lm_spec("{}").temperature == 1.0);
  CHECK_THROWS_AS(parse_simulated_lm_spec("{\"temperature\": 0}"), ConfigError);
  CHECK_THROWS_AS(parse_simulated_lm_spec("{\"position_bias\": \"x\"}"), ConfigError);
  CHECK_THROWS_AS(parse_simulated_lm_spec("not json"), ConfigError);
  CHECK_THROWS_AS(load_simulated_lm_spec("/nonexistent/spec.json"), IoError);
}
