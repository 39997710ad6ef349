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

#include "capcal/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "capcal/evaluation.hpp"
#include "capcal/simulated_lm.hpp"

namespace capcal::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Method m) {
  switch (m) {
    case Method::base: return "base";
    case Method::capcal: return "capcal";
    case Method::psc: return "psc";
  }
  return "unknown";
}

Method method_from_string(std::string_view s) {
  if (s == "base") return Method::base;
  if (s == "capcal") return Method::capcal;
  if (s == "psc") return Method::psc;
  throw ConfigError("unknown method '" + std::string(s) + "'");
}

double run_score(int rank, int n, double decision) {
  return static_cast<double>(n - rank + 1) + 0.5 / (1.0 + std::exp(-decision));
}

json to_json(const CalibrationConfig& config) {
  return json{{"beta", config.beta},
              {"prior_mode", to_string(config.prior_mode)},
              {"prior_normalization", to_string(config.prior_normalization)},
              {"terminator", config.terminator},
              {"tie_break", "by_main_prob_then_lowest_index"},
              {"epsilon", config.epsilon},
              {"window_cap", config.window_cap}};
}

CalibrationConfig calibration_config_from_json(const json& j) {
  CalibrationConfig c;
  try {
    c.beta = j.value("beta", c.beta);
    c.prior_mode = prior_mode_from_string(j.value("prior_mode", std::string(to_string(c.prior_mode))));
    c.prior_normalization = prior_normalization_from_string(
        j.value("prior_normalization", std::string(to_string(c.prior_normalization))));
    c.terminator = j.value("terminator", c.terminator);
    if (j.value("tie_break", std::string("by_main_prob_then_lowest_index")) != "by_main_prob_then_lowest_index") {
      throw ConfigError("unknown tie_break");
    }
    c.epsilon = j.value("epsilon", c.epsilon);
    c.window_cap = j.value("window_cap", c.window_cap);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid calibration config: ") + e.what());
  }
  c.validate();
  return c;
}

namespace {

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

json to_json(const StepTrace& step, const IdentifierScheme& scheme) {
  json labels = json::array();
  for (int idx : step.remaining) labels.push_back(scheme.render(idx));
  return json{{"step", step.step_index},
              {"remaining", step.remaining},
              {"labels", labels},
              {"p_main", to_std(step.p_main)},
              {"p_prior", step.p_prior ? json(to_std(*step.p_prior)) : json(nullptr)},
              {"entropy", step.entropy_h},
              {"alpha", step.alpha_k},
              {"scores", to_std(step.scores)},
              {"chosen", step.chosen}};
}

json to_json(const CalibratedRanking& ranking, const IdentifierScheme& scheme) {
  json steps = json::array();
  for (const StepTrace& s : ranking.trace) steps.push_back(to_json(s, scheme));
  return json{{"calibrated", ranking.calibrated},
              {"permutation", ranking.permutation.order},
              {"config", to_json(ranking.config_used)},
              {"trace", std::move(steps)}};
}

std::unique_ptr<LmBackend> make_backend(const BackendOptions& options,
                                        const std::vector<RerankTask>& tasks,
                                        const PromptTemplate& tmpl) {
  if (options.kind == "simulated") {
    if (options.sim_spec.empty()) throw ConfigError("--sim-spec is required for the simulated backend");
    return std::make_unique<SimulatedLM>(load_simulated_lm_spec(options.sim_spec), tasks, tmpl);
  }
  if (options.kind == "http") return std::make_unique<HttpBackend>(options.http);
  throw ConfigError("unknown backend kind '" + options.kind + "'");
}

Ranker make_ranker(const LmBackend& backend, const PromptTemplate& tmpl, const DecodeOptions& options,
                   Method method, std::vector<CalibratedRanking>* traces) {
  const auto decoder = [&backend, &tmpl, &options, traces](Method m) -> Ranker {
    const bool calibrated = m == Method::capcal;
    return [&backend, &tmpl, &options, traces, calibrated](const RerankTask& task) {
      CalibratedRanking r = calibrated ? decode_capcal(backend, task, tmpl, options.calibration)
                                       : decode_base(backend, task, tmpl, options.calibration);
      RankedList list = to_ranked_list(r);
      if (traces != nullptr) traces->push_back(std::move(r));
      return list;
    };
  };

  Ranker single;
  if (method == Method::psc) {
    if (options.psc_inner == Method::psc) throw ConfigError("PSC cannot wrap itself");
    Ranker inner = decoder(options.psc_inner);
    PscConfig psc = options.psc;
    single = [inner, psc](const RerankTask& task) { return psc_rerank(task, psc, inner); };
  } else {
    single = decoder(method);
  }

  const int window = options.window;
  const int stride = options.stride;
  const int cap = options.calibration.window_cap;
  return [single, window, stride, cap](const RerankTask& task) -> RankedList {
    if (task.size() == 1) return RankedList{Permutation{{1}}, {0.0}};
    if (task.size() > window) return sliding_window_rerank(task, window, stride, single, cap);
    return single(task);
  };
}

namespace {

PromptTemplate load_prompt_template(const DecodeOptions& options) {
  return options.template_path.empty() ? PromptTemplate::standard() : load_template(options.template_path);
}

std::vector<RerankTask> load_decode_tasks(const DecodeOptions& options) {
  PlaceholderPolicy placeholder = options.placeholder;
  return load_tasks(options.tasks_path, options.scheme, placeholder);
}

void check_decode_options(const DecodeOptions& options) {
  options.calibration.validate();
  options.psc.validate();
  if (options.window < 2 || options.window > options.calibration.window_cap) {
    throw ConfigError("--window must be in [2, " + std::to_string(options.calibration.window_cap) + "]");
  }
  if (options.stride < 1 || options.stride >= options.window) {
    throw ConfigError("--stride must be in [1, window)");
  }
  if (options.workers < 1) throw ConfigError("--workers must be >= 1");
  if (options.tasks_path.empty()) throw ConfigError("--tasks is required");
}

int exit_code_for(const std::exception_ptr& error) {
  try {
    std::rethrow_exception(error);
  } catch (const BackendError&) {
    return kBackendFailure;
  } catch (const IoError&) {
    return kIoError;
  } catch (const ParseError&) {
    return kIoError;
  } catch (...) {
    return kConfigError;
  }
}

std::string path_with_suffix(const std::string& path, const std::string& suffix) {
  fs::path p(path);
  fs::path out = p.parent_path() / (p.stem().string() + suffix + p.extension().string());
  return out.string();
}

struct QueryResult {
  std::optional<RankedList> ranked;
  std::vector<CalibratedRanking> traces;
  std::exception_ptr error;
};

int rerank_once(const RerankOptions& options, const DecodeOptions& decode,
                const std::vector<RerankTask>& tasks, const LmBackend& backend,
                const PromptTemplate& tmpl, const std::string& output_path, const std::string& tag,
                const std::string& trace_path, std::ostream& out) {
  std::vector<QueryResult> results(tasks.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  const bool want_traces = !trace_path.empty();

  const auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      QueryResult& result = results[i];
      try {
        Ranker ranker = make_ranker(backend, tmpl, decode, options.method, want_traces ? &result.traces : nullptr);
        result.ranked = ranker(tasks[i]);
        spdlog::info("[{}/{}] query {} ranked ({} candidates)", ++done, tasks.size(), tasks[i].query.id,
                     tasks[i].size());
      } catch (const std::exception& e) {
        result.error = std::current_exception();
        spdlog::error("[{}/{}] query {} failed: {}", ++done, tasks.size(), tasks[i].query.id, e.what());
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const int n_workers = std::min<int>(decode.workers, static_cast<int>(std::max<std::size_t>(tasks.size(), 1)));
    for (int w = 1; w < n_workers; ++w) pool.emplace_back(worker);
    worker();
  }

  RunFile run;
  int code = kOk;
  std::size_t failed = 0;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const QueryResult& result = results[i];
    if (result.error) {
      code = std::max(code, exit_code_for(result.error));
      ++failed;
      continue;
    }
    const RankedList& ranked = *result.ranked;
    const int n = static_cast<int>(ranked.permutation.order.size());
    for (int r = 1; r <= n; ++r) {
      const int idx = ranked.permutation.order[static_cast<std::size_t>(r - 1)];
      const double decision = static_cast<std::size_t>(r - 1) < ranked.decision_scores.size()
                                  ? ranked.decision_scores[static_cast<std::size_t>(r - 1)]
                                  : 0.0;
      run.entries.push_back({tasks[i].query.id, tasks[i].candidates[static_cast<std::size_t>(idx - 1)].doc_id, r,
                             run_score(r, n, decision), tag});
    }
  }
  write_run(run, output_path);
  out << fmt::format("wrote {} ({} queries, {} failed)\n", output_path, tasks.size() - failed, failed);

  if (want_traces) {
    std::ofstream trace(trace_path, std::ios::trunc);
    if (!trace) throw IoError("cannot write " + trace_path);
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      json windows = json::array();
      for (const CalibratedRanking& r : results[i].traces) windows.push_back(to_json(r, tasks[i].scheme));
      trace << json{{"query_id", tasks[i].query.id}, {"method", to_string(options.method)}, {"tag", tag},
                    {"rankings", std::move(windows)}}
                   .dump()
            << "\n";
    }
  }
  return code;
}

}  // namespace

int cmd_rerank(const RerankOptions& options, std::ostream& out) {
  check_decode_options(options.decode);
  if (options.output_path.empty()) throw ConfigError("--output is required");
  const PromptTemplate tmpl = load_prompt_template(options.decode);
  const std::vector<RerankTask> tasks = load_decode_tasks(options.decode);
  const auto backend = make_backend(options.decode.backend, tasks, tmpl);
  const std::string tag = options.tag.empty() ? std::string(to_string(options.method)) : options.tag;

  if (options.sweep_beta.empty()) {
    return rerank_once(options, options.decode, tasks, *backend, tmpl, options.output_path, tag,
                       options.trace_path, out);
  }
  int code = kOk;
  for (double beta : options.sweep_beta) {
    DecodeOptions decode = options.decode;
    decode.calibration.beta = beta;
    decode.calibration.validate();
    const std::string suffix = fmt::format("_beta{}", beta);
    const std::string trace = options.trace_path.empty() ? "" : path_with_suffix(options.trace_path, suffix);
    code = std::max(code, rerank_once(options, decode, tasks, *backend, tmpl,
                                      path_with_suffix(options.output_path, suffix), tag + suffix, trace, out));
  }
  return code;
}

int cmd_prior(const PriorOptions& options, std::ostream& out) {
  check_decode_options(options.decode);
  const PromptTemplate tmpl = load_prompt_template(options.decode);
  const std::vector<RerankTask> tasks = load_decode_tasks(options.decode);
  auto it = std::find_if(tasks.begin(), tasks.end(),
                         [&](const RerankTask& t) { return t.query.id == options.query_id; });
  if (it == tasks.end()) throw UnknownQuery("query '" + options.query_id + "' is not in " + options.decode.tasks_path);
  const RerankTask& task = *it;
  if (task.size() > options.decode.calibration.window_cap) {
    throw InvalidTask("query '" + task.query.id + "' has more candidates than one prompt window");
  }
  const auto backend = make_backend(options.decode.backend, tasks, tmpl);
  const CalibratedRanking ranking = decode_capcal(*backend, task, tmpl, options.decode.calibration);

  json steps = json::array();
  std::string text = fmt::format("query {}  placeholder {}  prior_mode {}\n", task.query.id,
                                 to_string(task.placeholder.kind), to_string(options.decode.calibration.prior_mode));
  for (const StepTrace& step : ranking.trace) {
    const Eigen::VectorXd& prior = *step.p_prior;
    const double uniform = 1.0 / static_cast<double>(step.remaining.size());
    const double total = prior.sum();
    json candidates = json::array();
    text += fmt::format("step {}  uniform {:.4f}  chosen [{}]\n", step.step_index, uniform,
                        task.scheme.render(step.chosen));
    for (std::size_t i = 0; i < step.remaining.size(); ++i) {
      const double p = total > options.decode.calibration.epsilon ? prior[static_cast<Eigen::Index>(i)] / total : uniform;
      const std::string label = task.scheme.render(step.remaining[i]);
      text += fmt::format("  [{}]  p_prior {:.4f}  deviation {:+.4f}\n", label, p, p - uniform);
      candidates.push_back({{"index", step.remaining[i]}, {"label", label}, {"p_prior", p}, {"deviation", p - uniform}});
    }
    steps.push_back({{"step", step.step_index},
                     {"uniform", uniform},
                     {"chosen", step.chosen},
                     {"candidates", std::move(candidates)}});
  }
  const json report{{"query_id", task.query.id},
                    {"placeholder", to_string(task.placeholder.kind)},
                    {"prior_mode", to_string(options.decode.calibration.prior_mode)},
                    {"steps", std::move(steps)}};

  if (options.json_stdout) {
    out << report.dump(2) << "\n";
  } else {
    out << text;
  }
  if (!options.json_path.empty()) {
    std::ofstream f(options.json_path, std::ios::trunc);
    if (!f) throw IoError("cannot write " + options.json_path);
    f << report.dump(2) << "\n";
  }
  return kOk;
}

int cmd_eval(const EvalOptions& options, std::ostream& out) {
  const int k = parse_ndcg_metric(options.metric);
  const RunFile run = parse_run(options.run_path);
  const Qrels qrels = parse_qrels(options.qrels_path);
  const EvalReport report = ndcg_at_k(run, qrels, k);

  for (const auto& [qid, value] : report.per_query) out << fmt::format("{}\t{}\t{:.4f}\n", report.metric, qid, value);
  out << fmt::format("{}\tall\t{:.4f}\n", report.metric, report.mean);

  if (!options.json_path.empty()) {
    std::ofstream f(options.json_path, std::ios::trunc);
    if (!f) throw IoError("cannot write " + options.json_path);
    f << json{{"metric", report.metric}, {"method", report.method_tag}, {"per_query", report.per_query},
              {"mean", report.mean}}
             .dump(2)
      << "\n";
  }
  return kOk;
}

int cmd_compare(const CompareOptions& options, std::ostream& out) {
  if (options.run_paths.empty()) throw ConfigError("compare needs at least one run file");
  const int k = parse_ndcg_metric(options.metric);
  const Qrels qrels = parse_qrels(options.qrels_path);
  const std::string dataset =
      options.dataset.empty() ? fs::path(options.qrels_path).stem().string() : options.dataset;

  std::vector<EvalReport> reports;
  for (const std::string& path : options.run_paths) {
    EvalReport report = ndcg_at_k(parse_run(path), qrels, k);
    report.method_tag = fs::path(path).stem().string();
    report.dataset = dataset;
    reports.push_back(std::move(report));
  }
  const ComparisonTable table = compare_methods(reports);
  out << table.render_text();
  if (!options.json_path.empty()) {
    std::ofstream f(options.json_path, std::ios::trunc);
    if (!f) throw IoError("cannot write " + options.json_path);
    f << table.to_json().dump(2) << "\n";
  }
  return kOk;
}

namespace {

void add_decode_options(CLI::App& cmd, DecodeOptions& d, std::string& placeholder, std::string& scheme,
                        std::string& prior_mode, std::string& prior_norm, std::string& http_mode,
                        std::string& logprob_base, std::string& psc_agg, std::string& psc_inner) {
  cmd.add_option("--tasks", d.tasks_path, "Task file (JSONL)")->envname("CAPCAL_TASKS");
  cmd.add_option("--backend", d.backend.kind, "simulated | http")->envname("CAPCAL_BACKEND");
  cmd.add_option("--sim-spec", d.backend.sim_spec, "Simulated LM spec (JSON)")->envname("CAPCAL_SIM_SPEC");
  cmd.add_option("--endpoint", d.backend.http.base_url, "Scoring server base URL")->envname("CAPCAL_ENDPOINT");
  cmd.add_option("--auth-env", d.backend.http.auth_env, "Variable holding a bearer token")->envname("CAPCAL_AUTH_ENV");
  cmd.add_option("--http-mode", http_mode, "native | echo")->envname("CAPCAL_HTTP_MODE");
  cmd.add_option("--model", d.backend.http.model, "Model name for echo mode")->envname("CAPCAL_MODEL");
  cmd.add_option("--logprob-base", logprob_base, "e | 10")->envname("CAPCAL_LOGPROB_BASE");
  cmd.add_option("--timeout", d.backend.http.timeout_seconds, "Request timeout (s)")->envname("CAPCAL_TIMEOUT");
  cmd.add_option("--retries", d.backend.http.retries, "Retries per request")->envname("CAPCAL_RETRIES");
  cmd.add_option("--max-in-flight", d.backend.http.max_in_flight, "Concurrent request cap")
      ->envname("CAPCAL_MAX_IN_FLIGHT");
  cmd.add_option("--template", d.template_path, "Prompt template override")->envname("CAPCAL_TEMPLATE");
  cmd.add_option("--placeholder", placeholder, "Placeholder policy")->envname("CAPCAL_PLACEHOLDER");
  cmd.add_option("--placeholder-text", d.placeholder.fixed_text, "Text of the fixed_string placeholder");
  cmd.add_option("--scheme", scheme, "numeric | alphabetic")->envname("CAPCAL_SCHEME");
  cmd.add_option("--beta", d.calibration.beta, "Entropy penalty scale")->envname("CAPCAL_BETA");
  cmd.add_option("--prior-mode", prior_mode, "lockstep | static_renormalized")->envname("CAPCAL_PRIOR_MODE");
  cmd.add_option("--prior-normalization", prior_norm, "renormalized | raw")->envname("CAPCAL_PRIOR_NORMALIZATION");
  cmd.add_option("--terminator", d.calibration.terminator, "Identifier terminator");
  cmd.add_option("--psc-k", d.psc.k_permutations, "PSC passes")->envname("CAPCAL_PSC_K");
  cmd.add_option("--psc-aggregation", psc_agg, "mean_rank | median_rank")->envname("CAPCAL_PSC_AGGREGATION");
  cmd.add_option("--psc-inner", psc_inner, "Decoder inside PSC: base | capcal");
  cmd.add_option("--window", d.window, "Window size")->envname("CAPCAL_WINDOW");
  cmd.add_option("--stride", d.stride, "Window stride")->envname("CAPCAL_STRIDE");
  cmd.add_option("--seed", d.seed, "Seed for shuffles and random placeholders")->envname("CAPCAL_SEED");
  cmd.add_option("--workers", d.workers, "Queries decoded concurrently")->envname("CAPCAL_WORKERS");
}

struct EnumFlags {
  std::string placeholder = "fixed_string";
  std::string scheme = "numeric";
  std::string prior_mode = "lockstep";
  std::string prior_norm = "renormalized";
  std::string http_mode = "native";
  std::string logprob_base = "e";
  std::string psc_agg = "mean_rank";
  std::string psc_inner = "base";

  void apply(DecodeOptions& d) const {
    d.placeholder.kind = placeholder_kind_from_string(placeholder);
    d.placeholder.rng_seed = d.seed;
    d.scheme.kind = identifier_kind_from_string(scheme);
    d.calibration.prior_mode = prior_mode_from_string(prior_mode);
    d.calibration.prior_normalization = prior_normalization_from_string(prior_norm);
    d.backend.http.mode = http_mode_from_string(http_mode);
    d.backend.http.logprob_base = logprob_base_from_string(logprob_base);
    d.psc.aggregation = rank_aggregation_from_string(psc_agg);
    d.psc.seed = d.seed;
    d.psc_inner = method_from_string(psc_inner);
  }
};

// Environment values become flags placed right after the subcommand unless
// the flag is already present.
void inject_env(const CLI::App& sub, std::vector<std::string>& args, std::ptrdiff_t pos) {
  std::vector<std::string> injected;
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string& env = opt->get_envname();
    if (env.empty()) continue;
    const char* value = std::getenv(env.c_str());
    if (value == nullptr || *value == '\0') continue;
    bool given = false;
    for (const std::string& name : opt->get_lnames()) {
      const std::string flag = "--" + name;
      given = given || std::any_of(args.begin(), args.end(), [&](const std::string& a) {
                return a == flag || a.starts_with(flag + "=");
              });
    }
    for (const std::string& name : opt->get_snames()) {
      given = given || std::find(args.begin(), args.end(), "-" + name) != args.end();
    }
    if (!given) {
      injected.push_back("--" + opt->get_lnames().front());
      injected.emplace_back(value);
    }
  }
  args.insert(args.begin() + pos, injected.begin(), injected.end());
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Listwise reranking with content-agnostic prior calibration", "capcal"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML config file", false);

  RerankOptions rerank;
  EnumFlags rerank_enums;
  std::string method = "capcal";
  std::string sweep;
  CLI::App* rerank_cmd = app.add_subcommand("rerank", "Rerank every query of a task file into a TREC run");
  add_decode_options(*rerank_cmd, rerank.decode, rerank_enums.placeholder, rerank_enums.scheme,
                     rerank_enums.prior_mode, rerank_enums.prior_norm, rerank_enums.http_mode,
                     rerank_enums.logprob_base, rerank_enums.psc_agg, rerank_enums.psc_inner);
  rerank_cmd->add_option("--method", method, "base | capcal | psc")->envname("CAPCAL_METHOD");
  rerank_cmd->add_option("--output,-o", rerank.output_path, "Run file to write");
  rerank_cmd->add_option("--tag", rerank.tag, "Run tag (default: method)");
  rerank_cmd->add_option("--trace", rerank.trace_path, "Write per-step traces (JSONL)");
  rerank_cmd->add_option("--sweep-beta", sweep, "Comma-separated betas; one run per value");

  PriorOptions prior;
  EnumFlags prior_enums;
  CLI::App* prior_cmd = app.add_subcommand("prior", "Show the content-free prior of one query per step");
  add_decode_options(*prior_cmd, prior.decode, prior_enums.placeholder, prior_enums.scheme, prior_enums.prior_mode,
                     prior_enums.prior_norm, prior_enums.http_mode, prior_enums.logprob_base, prior_enums.psc_agg,
                     prior_enums.psc_inner);
  prior_cmd->add_option("--query-id,-q", prior.query_id, "Query to inspect")->required();
  prior_cmd->add_option("--json", prior.json_path, "Also write the JSON report here");
  prior_cmd->add_flag("--json-stdout", prior.json_stdout, "Print JSON instead of the text table");

  EvalOptions eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Score a run file against qrels");
  eval_cmd->add_option("--run", eval.run_path, "Run file")->required();
  eval_cmd->add_option("--qrels", eval.qrels_path, "Qrels file")->required();
  eval_cmd->add_option("--metric", eval.metric, "ndcg@k");
  eval_cmd->add_option("--json", eval.json_path, "Write the report as JSON");

  CompareOptions compare;
  CLI::App* compare_cmd = app.add_subcommand("compare", "Tabulate several runs; deltas against the first");
  compare_cmd->add_option("runs", compare.run_paths, "Run files")->required();
  compare_cmd->add_option("--qrels", compare.qrels_path, "Qrels file")->required();
  compare_cmd->add_option("--metric", compare.metric, "ndcg@k");
  compare_cmd->add_option("--dataset", compare.dataset, "Column name (default: qrels file stem)");
  compare_cmd->add_option("--json", compare.json_path, "Write the table as JSON");

  std::vector<std::string> args(argv + 1, argv + argc);
  for (CLI::App* sub : {rerank_cmd, prior_cmd}) {
    auto at = std::find(args.begin(), args.end(), sub->get_name());
    if (at != args.end()) inject_env(*sub, args, at - args.begin() + 1);
  }
  std::reverse(args.begin(), args.end());

  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }

  try {
    if (rerank_cmd->parsed()) {
      rerank_enums.apply(rerank.decode);
      rerank.method = method_from_string(method);
      if (!sweep.empty()) {
        for (const auto& item : CLI::detail::split(sweep, ',')) {
          try {
            rerank.sweep_beta.push_back(std::stod(CLI::detail::trim_copy(item)));
          } catch (const std::exception&) {
            throw ConfigError("bad --sweep-beta value '" + item + "'");
          }
        }
      }
      return cmd_rerank(rerank, out);
    }
    if (prior_cmd->parsed()) {
      prior_enums.apply(prior.decode);
      return cmd_prior(prior, out);
    }
    if (eval_cmd->parsed()) return cmd_eval(eval, out);
    if (compare_cmd->parsed()) return cmd_compare(compare, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(std::current_exception());
  }
  return kConfigError;
}

}  // namespace capcal::cli
