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

// Shared fixtures: synthetic tasks and a scripted backend with hand-set token
// probabilities.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "capcal/domain.hpp"
#include "capcal/lm_backend.hpp"
#include "capcal/random.hpp"
#include "capcal/simulated_lm.hpp"

namespace capcal::testing {

inline RerankTask synthetic_task(int query, int n, IdentifierScheme scheme = {},
                                 PlaceholderPolicy placeholder = {}) {
  std::vector<std::pair<std::string, std::string>> docs;
  for (int j = 1; j <= n; ++j) {
    docs.emplace_back("q" + std::to_string(query) + "-d" + std::to_string(j),
                      "passage " + std::to_string(j) + " for query " + std::to_string(query) +
                          " discusses topic " + std::to_string((query * 31 + j * 7) % 97));
  }
  return make_task(Query{"q" + std::to_string(query), "what is topic " + std::to_string(query)}, docs, scheme,
                   placeholder);
}

/// A simulated LM over `tasks` with the given per-slot relevance (shared by
/// every task, indexed by slot) and bias.
inline SimulatedLmSpec slot_relevance_spec(const std::vector<RerankTask>& tasks, const std::vector<double>& relevance,
                                           const std::vector<double>& bias, double temperature = 1.0) {
  SimulatedLmSpec spec;
  spec.position_bias = bias;
  spec.temperature = temperature;
  for (const RerankTask& t : tasks) {
    for (std::size_t j = 0; j < t.candidates.size() && j < relevance.size(); ++j) {
      spec.relevance[t.query.id][t.candidates[j].doc_id] = relevance[j];
    }
  }
  return spec;
}

/// Random instance: N in [n_lo, n_hi], relevance and bias drawn from
/// uniform ranges.
struct RandomInstance {
  RerankTask task;
  std::vector<double> relevance;  // by slot
  std::vector<double> bias;
  double temperature = 1.0;
};

inline RandomInstance random_instance(std::mt19937_64& gen, int id, int n_lo, int n_hi, double rel_scale = 2.0,
                                      double bias_scale = 2.0) {
  RandomInstance inst;
  const int n = n_lo + static_cast<int>(uniform_below(gen, static_cast<std::uint64_t>(n_hi - n_lo + 1)));
  inst.task = synthetic_task(id, n);
  for (int j = 0; j < n; ++j) {
    inst.relevance.push_back(uniform_real(gen, -rel_scale, rel_scale));
    inst.bias.push_back(uniform_real(gen, -bias_scale, bias_scale));
  }
  inst.temperature = uniform_real(gen, 0.25, 2.0);
  return inst;
}

/// Backend answering from a table: label -> per-token probabilities
/// (including the terminator token). Labels are tokenized one character per
/// token plus the terminator.
class ScriptedBackend final : public LmBackend {
 public:
  explicit ScriptedBackend(std::map<std::string, std::vector<double>> token_probs)
      : token_probs_(std::move(token_probs)) {}

  std::vector<ContinuationScore> score_continuations(const ScoringRequest& req) const override {
    std::vector<ContinuationScore> out;
    for (const TokenSeq& cont : req.continuations) {
      std::string label;
      for (std::size_t t = 0; t + 1 < cont.tokens.size(); ++t) label += cont.tokens[t];
      const auto& probs = token_probs_.at(label);
      std::vector<double> lp;
      for (double p : probs) lp.push_back(std::log(p));
      out.push_back(ContinuationScore::from_logprobs(cont, lp));
    }
    return out;
  }

  TokenSeq tokenize_label(std::string_view label, std::string_view terminator) const override {
    std::vector<std::string> tokens;
    for (char c : label) tokens.emplace_back(1, c);
    tokens.emplace_back(terminator);
    return TokenSeq::from_tokens(std::move(tokens));
  }

 private:
  std::map<std::string, std::vector<double>> token_probs_;
};

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("capcal_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace capcal::testing
