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

#include "capcal/simulated_lm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "capcal/errors.hpp"
#include "capcal/random.hpp"

namespace capcal {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<std::string> bracketed_labels(std::string_view prefix) {
  std::vector<std::string> labels;
  std::size_t pos = 0;
  while ((pos = prefix.find('[', pos)) != std::string_view::npos) {
    const auto close = prefix.find(']', pos + 1);
    if (close == std::string_view::npos) break;
    labels.emplace_back(prefix.substr(pos + 1, close - pos - 1));
    pos = close + 1;
  }
  return labels;
}

}  // namespace

SimulatedLmSpec parse_simulated_lm_spec(const std::string& json_text) {
  SimulatedLmSpec spec;
  try {
    const auto j = nlohmann::json::parse(json_text);
    if (j.contains("relevance")) {
      for (const auto& [qid, docs] : j.at("relevance").items()) {
        for (const auto& [doc_id, logit] : docs.items()) {
          spec.relevance[qid][doc_id] = logit.get<double>();
        }
      }
    }
    if (j.contains("position_bias")) spec.position_bias = j.at("position_bias").get<std::vector<double>>();
    spec.temperature = j.value("temperature", 1.0);
    spec.seed = j.value("seed", std::uint64_t{0});
    spec.fill_missing = j.value("fill_missing", false);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid simulated LM spec: ") + e.what());
  }
  if (!(spec.temperature > 0.0) || !std::isfinite(spec.temperature)) {
    throw ConfigError("simulated LM temperature must be positive");
  }
  return spec;
}

SimulatedLmSpec load_simulated_lm_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open simulated LM spec " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_simulated_lm_spec(ss.str());
}

SimulatedLM::SimulatedLM(SimulatedLmSpec spec, const std::vector<RerankTask>& tasks,
                         PromptTemplate tmpl)
    : spec_(std::move(spec)), template_(std::move(tmpl)) {
  if (!(spec_.temperature > 0.0)) throw ConfigError("simulated LM temperature must be positive");
  template_.validate();
  for (const RerankTask& task : tasks) {
    auto [it, inserted] = by_query_text_.try_emplace(task.query.text);
    QueryIndex& index = it->second;
    if (inserted) {
      index.query_id = task.query.id;
    } else if (index.query_id != task.query.id) {
      throw ConfigError("queries '" + index.query_id + "' and '" + task.query.id +
                        "' share the same text");
    }
    for (const Candidate& c : task.candidates) {
      index.logit_by_text.try_emplace(c.text, relevance(task.query.id, c.doc_id));
    }
  }
}

double SimulatedLM::relevance(const std::string& query_id, const std::string& doc_id) const {
  if (auto q = spec_.relevance.find(query_id); q != spec_.relevance.end()) {
    if (auto d = q->second.find(doc_id); d != q->second.end()) return d->second;
  }
  if (!spec_.fill_missing) return 0.0;
  std::mt19937_64 gen(mix_seed(spec_.seed, hash_string(query_id) ^ splitmix64(hash_string(doc_id))));
  return uniform_real(gen, -1.0, 1.0);
}

std::vector<double> SimulatedLM::prompt_logits(std::string_view prompt) const {
  const auto parsed = parse_prompt(prompt, template_);
  if (!parsed) throw UnrecognizedPrompt("prompt does not follow the simulator's template");
  return logits_for(*parsed);
}

std::vector<double> SimulatedLM::logits_for(const ParsedPrompt& parsed) const {
  auto q = by_query_text_.find(parsed.query);
  if (q == by_query_text_.end()) {
    throw UnrecognizedPrompt("unknown query text '" + parsed.query + "'");
  }

  const auto& passages = parsed.passages;
  const bool all_identical = std::all_of(passages.begin(), passages.end(), [&](const auto& p) {
    return p.text == passages.front().text;
  });
  std::size_t known = 0;
  for (const auto& p : passages) known += q->second.logit_by_text.count(p.text);
  const bool content_free = known == 0 || all_identical;
  if (!content_free && known != passages.size()) {
    throw UnrecognizedPrompt("prompt mixes documents and placeholders");
  }

  std::vector<double> logits(passages.size(), 0.0);
  for (std::size_t j = 0; j < passages.size(); ++j) {
    double z = j < spec_.position_bias.size() ? spec_.position_bias[j] : 0.0;
    if (!content_free) z += q->second.logit_by_text.at(passages[j].text);
    logits[j] = z / spec_.temperature;
  }
  return logits;
}

std::vector<ContinuationScore> SimulatedLM::score_continuations(const ScoringRequest& req) const {
  if (req.continuations.empty()) throw MalformedResponse("scoring request has no continuations");
  const auto parsed = parse_prompt(req.prompt, template_);
  if (!parsed) throw UnrecognizedPrompt("prompt does not follow the simulator's template");
  const std::vector<double> logits = logits_for(*parsed);
  const std::vector<std::string> used = bracketed_labels(req.prefix);

  // Slot of each requested label, or -1 when already emitted.
  std::vector<int> slot_of(req.continuations.size(), -1);
  double max_logit = kNegInf;
  for (std::size_t i = 0; i < req.continuations.size(); ++i) {
    const TokenSeq& cont = req.continuations[i];
    if (cont.tokens.size() < 2) throw TokenizationMismatch("'" + cont.rendered + "' has no terminator token");
    std::string label;
    for (std::size_t t = 0; t + 1 < cont.tokens.size(); ++t) label += cont.tokens[t];

    const auto& passages = parsed->passages;
    auto it = std::find_if(passages.begin(), passages.end(),
                           [&](const ParsedPassage& p) { return p.label == label; });
    if (it == passages.end()) throw UnrecognizedPrompt("label '" + label + "' is not in the prompt");
    if (std::find(used.begin(), used.end(), label) != used.end()) continue;
    slot_of[i] = static_cast<int>(it - passages.begin());
    max_logit = std::max(max_logit, logits[static_cast<std::size_t>(slot_of[i])]);
  }

  double log_norm = kNegInf;
  if (max_logit > kNegInf) {
    double sum = 0.0;
    for (int slot : slot_of) {
      if (slot >= 0) sum += std::exp(logits[static_cast<std::size_t>(slot)] - max_logit);
    }
    log_norm = max_logit + std::log(sum);
  }

  std::vector<ContinuationScore> scores;
  scores.reserve(req.continuations.size());
  for (std::size_t i = 0; i < req.continuations.size(); ++i) {
    const TokenSeq& cont = req.continuations[i];
    std::vector<double> lp(cont.tokens.size(), 0.0);
    lp.front() = slot_of[i] >= 0 ? logits[static_cast<std::size_t>(slot_of[i])] - log_norm : kNegInf;
    scores.push_back(ContinuationScore::from_logprobs(cont, std::move(lp)));
  }
  return scores;
}

TokenSeq SimulatedLM::tokenize_label(std::string_view label, std::string_view terminator) const {
  if (label.empty()) throw TokenizationMismatch("empty label");
  std::vector<std::string> tokens;
  tokens.reserve(label.size() + 1);
  for (char c : label) tokens.emplace_back(1, c);
  tokens.emplace_back(terminator);
  return TokenSeq::from_tokens(std::move(tokens));
}

}  // namespace capcal
