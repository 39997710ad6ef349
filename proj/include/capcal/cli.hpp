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
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "capcal/baselines.hpp"
#include "capcal/calibration.hpp"
#include "capcal/http_backend.hpp"
#include "capcal/lm_backend.hpp"

namespace capcal::cli {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 1,
  kBackendFailure = 2,
  kIoError = 3,
};

enum class Method { base, capcal, psc };

std::string_view to_string(Method m);
Method method_from_string(std::string_view s);

struct BackendOptions {
  std::string kind = "simulated";  // simulated | http
  std::string sim_spec;
  HttpBackendConfig http;
};

/// Options shared by every command that decodes.
struct DecodeOptions {
  std::string tasks_path;
  BackendOptions backend;
  std::string template_path;
  PlaceholderPolicy placeholder;
  IdentifierScheme scheme;
  CalibrationConfig calibration;
  PscConfig psc;
  Method psc_inner = Method::base;
  int window = kDefaultWindowCap;
  int stride = 10;
  std::uint64_t seed = 0;
  int workers = 1;
};

struct RerankOptions {
  DecodeOptions decode;
  Method method = Method::capcal;
  std::string output_path;
  std::string tag;  // defaults to the method name
  std::string trace_path;
  std::vector<double> sweep_beta;
};

struct PriorOptions {
  DecodeOptions decode;
  std::string query_id;
  std::string json_path;
  bool json_stdout = false;
};

struct EvalOptions {
  std::string run_path;
  std::string qrels_path;
  std::string metric = "ndcg@10";
  std::string json_path;
};

struct CompareOptions {
  std::vector<std::string> run_paths;
  std::string qrels_path;
  std::string metric = "ndcg@10";
  std::string dataset;  // defaults to the qrels file stem
  std::string json_path;
};

/// Run-file score for rank r of n given the decision score s at that rank:
/// (n - r + 1) + 0.5 * logistic(s). Strictly decreasing in r for any s.
double run_score(int rank, int n, double decision);

nlohmann::json to_json(const CalibrationConfig& config);
CalibrationConfig calibration_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const StepTrace& step, const IdentifierScheme& scheme);
nlohmann::json to_json(const CalibratedRanking& ranking, const IdentifierScheme& scheme);

/// Builds the configured backend. The simulator is bound to `tasks`.
std::unique_ptr<LmBackend> make_backend(const BackendOptions& options,
                                        const std::vector<RerankTask>& tasks,
                                        const PromptTemplate& tmpl);

/// Builds the full-list ranker for a method, wrapping lists longer than the
/// window in sliding_window_rerank. Calibrated traces are appended to `traces`
/// when it is non-null.
Ranker make_ranker(const LmBackend& backend, const PromptTemplate& tmpl, const DecodeOptions& options,
                   Method method, std::vector<CalibratedRanking>* traces = nullptr);

int cmd_rerank(const RerankOptions& options, std::ostream& out);
int cmd_prior(const PriorOptions& options, std::ostream& out);
int cmd_eval(const EvalOptions& options, std::ostream& out);
int cmd_compare(const CompareOptions& options, std::ostream& out);

/// Parses argv and dispatches. Precedence: flags > environment > --config
/// file > defaults. Errors are reported on `err` and mapped to ExitCode.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace capcal::cli
