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

#include <memory>
#include <semaphore>
#include <string>

#include "capcal/lm_backend.hpp"

namespace capcal {

enum class HttpScoringMode {
  /// POST /score with every continuation in one request.
  native,
  /// One teacher-forced POST /v1/completions (echo, max_tokens 0) per
  /// continuation; the tail token log-probs are sliced off the echo.
  echo,
};

enum class LogprobBase { natural, log10 };

struct HttpBackendConfig {
  std::string base_url = "http://127.0.0.1:8000";
  /// Environment variable holding a bearer token. Empty: no Authorization header.
  std::string auth_env;
  double timeout_seconds = 30.0;
  int retries = 2;
  int max_in_flight = 8;
  HttpScoringMode mode = HttpScoringMode::native;
  /// Model name sent in echo mode.
  std::string model;
  LogprobBase logprob_base = LogprobBase::natural;
};

HttpScoringMode http_mode_from_string(std::string_view s);
LogprobBase logprob_base_from_string(std::string_view s);

/// Scoring client for a remote inference server. The wire format is
/// documented in docs/backend_protocol.md.
class HttpBackend final : public LmBackend {
 public:
  explicit HttpBackend(HttpBackendConfig config);
  ~HttpBackend() override;

  std::vector<ContinuationScore> score_continuations(const ScoringRequest& req) const override;
  TokenSeq tokenize_label(std::string_view label, std::string_view terminator) const override;

  const HttpBackendConfig& config() const noexcept { return config_; }

 private:
  std::string post(const std::string& path, const std::string& body) const;
  std::vector<ContinuationScore> score_native(const ScoringRequest& req) const;
  ContinuationScore score_echo(const ScoringRequest& req, const TokenSeq& continuation) const;
  double to_natural(double logprob) const;

  HttpBackendConfig config_;
  std::string bearer_;
  std::unique_ptr<std::counting_semaphore<>> in_flight_;
};

}  // namespace capcal
