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

#include "capcal/http_backend.hpp"

#include <cmath>
#include <cstdlib>
#include <future>
#include <numbers>
#include <sstream>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "capcal/errors.hpp"

namespace capcal {

namespace {

using nlohmann::json;

class InFlightSlot {
 public:
  explicit InFlightSlot(std::counting_semaphore<>& sem) : sem_(sem) { sem_.acquire(); }
  ~InFlightSlot() { sem_.release(); }
  InFlightSlot(const InFlightSlot&) = delete;
  InFlightSlot& operator=(const InFlightSlot&) = delete;

 private:
  std::counting_semaphore<>& sem_;
};

std::vector<std::string> string_array(const json& j, const char* field) {
  if (!j.contains(field) || !j.at(field).is_array()) {
    throw MalformedResponse(std::string("response lacks array field '") + field + "'");
  }
  return j.at(field).get<std::vector<std::string>>();
}

}  // namespace

HttpScoringMode http_mode_from_string(std::string_view s) {
  if (s == "native") return HttpScoringMode::native;
  if (s == "echo") return HttpScoringMode::echo;
  throw ConfigError("unknown HTTP scoring mode '" + std::string(s) + "'");
}

LogprobBase logprob_base_from_string(std::string_view s) {
  if (s == "e" || s == "natural") return LogprobBase::natural;
  if (s == "10" || s == "log10") return LogprobBase::log10;
  throw ConfigError("unknown log-probability base '" + std::string(s) + "'");
}

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
  if (config_.base_url.empty()) throw ConfigError("HTTP backend needs a base URL");
  if (config_.max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
  if (config_.retries < 0) throw ConfigError("retries must be >= 0");
  if (!(config_.timeout_seconds > 0.0)) throw ConfigError("timeout must be positive");
  if (config_.mode == HttpScoringMode::echo && config_.model.empty()) {
    throw ConfigError("echo mode needs a model name");
  }
  if (!config_.auth_env.empty()) {
    const char* token = std::getenv(config_.auth_env.c_str());
    if (token == nullptr) throw ConfigError("auth variable " + config_.auth_env + " is not set");
    bearer_ = token;
  }
  in_flight_ = std::make_unique<std::counting_semaphore<>>(config_.max_in_flight);
}

HttpBackend::~HttpBackend() = default;

std::string HttpBackend::post(const std::string& path, const std::string& body) const {
  InFlightSlot slot(*in_flight_);

  const auto secs = static_cast<time_t>(config_.timeout_seconds);
  const auto usecs = static_cast<time_t>((config_.timeout_seconds - static_cast<double>(secs)) * 1e6);
  std::string last_error;
  for (int attempt = 0; attempt <= config_.retries; ++attempt) {
    httplib::Client client(config_.base_url);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    if (!bearer_.empty()) client.set_bearer_token_auth(bearer_);

    auto res = client.Post(path, body, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
    } else if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
    } else if (res->status >= 400) {
      throw MalformedResponse(config_.base_url + path + " rejected the request: HTTP " +
                              std::to_string(res->status) + " " + res->body);
    } else {
      return res->body;
    }
    spdlog::warn("{}{} attempt {}/{} failed: {}", config_.base_url, path, attempt + 1,
                 config_.retries + 1, last_error);
  }
  throw BackendUnavailable(config_.base_url + path + " unavailable after " +
                           std::to_string(config_.retries + 1) + " attempts: " + last_error);
}

double HttpBackend::to_natural(double logprob) const {
  // Servers occasionally report a certain token as +1e-7 or so.
  if (logprob > 0.0 && logprob < 1e-6) logprob = 0.0;
  return config_.logprob_base == LogprobBase::log10 ? logprob * std::numbers::ln10 : logprob;
}

std::vector<ContinuationScore> HttpBackend::score_continuations(const ScoringRequest& req) const {
  if (req.continuations.empty()) throw MalformedResponse("scoring request has no continuations");
  std::vector<ContinuationScore> scores;
  if (config_.mode == HttpScoringMode::native) {
    scores = score_native(req);
  } else {
    std::vector<std::future<ContinuationScore>> pending;
    pending.reserve(req.continuations.size());
    for (const TokenSeq& cont : req.continuations) {
      pending.push_back(std::async(std::launch::async, [this, &req, &cont] { return score_echo(req, cont); }));
    }
    scores.reserve(pending.size());
    for (auto& f : pending) scores.push_back(f.get());
  }
  check_scores(req, scores);
  return scores;
}

std::vector<ContinuationScore> HttpBackend::score_native(const ScoringRequest& req) const {
  json body{{"prompt", req.prompt}, {"prefix", req.prefix}, {"continuations", json::array()}};
  for (const TokenSeq& cont : req.continuations) {
    body["continuations"].push_back({{"text", cont.rendered}, {"tokens", cont.tokens}});
  }
  const std::string response = post("/score", body.dump());

  std::vector<ContinuationScore> scores;
  std::istringstream lines(response);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::size_t i = scores.size();
    if (i >= req.continuations.size()) throw MalformedResponse("more score lines than continuations");
    try {
      const json j = json::parse(line);
      auto tokens = string_array(j, "tokens");
      auto raw = j.at("token_logprobs").get<std::vector<double>>();
      TokenSeq seq = TokenSeq::from_tokens(std::move(tokens));
      if (seq.rendered != req.continuations[i].rendered) {
        throw TokenizationMismatch("backend tokens render '" + seq.rendered + "', expected '" +
                                   req.continuations[i].rendered + "'");
      }
      if (seq.tokens != req.continuations[i].tokens) {
        throw TokenizationMismatch("backend split '" + seq.rendered + "' differently than tokenize_label");
      }
      for (double& lp : raw) lp = to_natural(lp);
      scores.push_back(ContinuationScore::from_logprobs(std::move(seq), std::move(raw)));
    } catch (const json::exception& e) {
      throw MalformedResponse(std::string("bad score line: ") + e.what());
    }
  }
  return scores;
}

ContinuationScore HttpBackend::score_echo(const ScoringRequest& req, const TokenSeq& cont) const {
  const json body{{"model", config_.model},
                  {"prompt", req.prompt + req.prefix + cont.rendered},
                  {"max_tokens", 0},
                  {"echo", true},
                  {"logprobs", 0},
                  {"temperature", 0}};
  const std::string response = post("/v1/completions", body.dump());
  try {
    const json j = json::parse(response);
    const json& lp = j.at("choices").at(0).at("logprobs");
    const auto tokens = string_array(lp, "tokens");
    const json& values = lp.at("token_logprobs");
    if (values.size() != tokens.size()) throw MalformedResponse("echo tokens and logprobs differ in length");

    // Walk back from the end until the tail renders the continuation exactly.
    std::string tail;
    std::size_t first = tokens.size();
    while (first > 0 && tail.size() < cont.rendered.size()) {
      --first;
      tail.insert(0, tokens[first]);
    }
    if (tail != cont.rendered) {
      throw TokenizationMismatch("echoed tail '" + tail + "' does not align with '" + cont.rendered + "'");
    }
    std::vector<std::string> tail_tokens(tokens.begin() + static_cast<std::ptrdiff_t>(first), tokens.end());
    std::vector<double> logprobs;
    for (std::size_t t = first; t < tokens.size(); ++t) {
      if (values[t].is_null()) throw MalformedResponse("echo returned a null logprob inside the continuation");
      logprobs.push_back(to_natural(values[t].get<double>()));
    }
    return ContinuationScore::from_logprobs(TokenSeq::from_tokens(std::move(tail_tokens)), std::move(logprobs));
  } catch (const json::exception& e) {
    throw MalformedResponse(std::string("bad completion response: ") + e.what());
  }
}

TokenSeq HttpBackend::tokenize_label(std::string_view label, std::string_view terminator) const {
  const std::string text = std::string(label) + std::string(terminator);
  if (config_.mode == HttpScoringMode::echo) {
    // The echo segmentation is only known after scoring.
    return TokenSeq::from_tokens({std::string(label), std::string(terminator)});
  }
  const std::string response = post("/tokenize", json{{"text", text}}.dump());
  try {
    TokenSeq seq = TokenSeq::from_tokens(string_array(json::parse(response), "tokens"));
    if (seq.rendered != text || seq.tokens.empty()) {
      throw TokenizationMismatch("tokenizer renders '" + seq.rendered + "' for '" + text + "'");
    }
    return seq;
  } catch (const json::exception& e) {
    throw MalformedResponse(std::string("bad tokenize response: ") + e.what());
  }
}

}  // namespace capcal
