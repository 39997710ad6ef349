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

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include <nlohmann/json.hpp>

#include "capcal/cli.hpp"
#include "capcal/evaluation.hpp"
#include "support.hpp"

using namespace capcal;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kFixtures = CAPCAL_FIXTURES;

std::string fixture(const std::string& name) { return kFixtures + "/" + name; }

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "capcal");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> rerank_args(const std::string& method, const std::string& output,
                                     const std::string& spec = "sim.json") {
  return {"rerank", "--tasks", fixture("tasks.jsonl"), "--sim-spec", fixture(spec), "--method", method, "-o", output};
}

std::string strip_tags(std::string text, const std::string& tag) {
  for (auto pos = text.find(" " + tag + "\n"); pos != std::string::npos; pos = text.find(" " + tag + "\n", pos)) {
    text.replace(pos, tag.size() + 2, " TAG\n");
  }
  return text;
}

}  // namespace

TEST_CASE("rerank writes a valid run for every query") {
  const auto dir = testing::temp_dir("cli_rerank");
  const std::string out = (dir / "capcal.run").string();
  const Result r = run_cli(rerank_args("capcal", out));
  REQUIRE(r.code == 0);
  CHECK(r.out.find("3 queries, 0 failed") != std::string::npos);

  const RunFile run = parse_run(out);
  CHECK(run.query_ids() == std::vector<std::string>{"q1", "q2", "q3"});
  CHECK(run.ranking("q1").size() == 4);
  CHECK(run.ranking("q2").size() == 5);
  CHECK(run.ranking("q3").size() == 3);
  for (const auto& e : run.entries) CHECK(e.tag == "capcal");
  CHECK(run.ranking("q3").front() == "d33");
}

TEST_CASE("capcal at beta 0 reproduces base byte for byte apart from the tag") {
  const auto dir = testing::temp_dir("cli_beta0");
  const std::string base = (dir / "base.run").string();
  const std::string capcal = (dir / "capcal.run").string();
  REQUIRE(run_cli(rerank_args("base", base)).code == 0);
  auto args = rerank_args("capcal", capcal);
  args.insert(args.end(), {"--beta", "0"});
  REQUIRE(run_cli(args).code == 0);
  CHECK(strip_tags(testing::read_text(base), "base") == strip_tags(testing::read_text(capcal), "capcal"));
  CHECK(same_ranking(parse_run(base), parse_run(capcal)));
}

TEST_CASE("rerank output is reproducible and independent of the worker count") {
  const auto dir = testing::temp_dir("cli_repro");
  for (const std::string method : {"capcal", "psc"}) {
    const std::string a = (dir / (method + "_a.run")).string();
    const std::string b = (dir / (method + "_b.run")).string();
    REQUIRE(run_cli(rerank_args(method, a)).code == 0);
    auto args = rerank_args(method, b);
    args.insert(args.end(), {"--workers", "3"});
    REQUIRE(run_cli(args).code == 0);
    CHECK(testing::read_text(a) == testing::read_text(b));
  }
}

TEST_CASE("psc and sliding windows through the command line") {
  const auto dir = testing::temp_dir("cli_psc");
  const std::string out = (dir / "psc.run").string();
  auto args = rerank_args("psc", out);
  args.insert(args.end(), {"--psc-k", "4", "--psc-inner", "capcal", "--window", "3", "--stride", "1", "--seed", "9"});
  REQUIRE(run_cli(args).code == 0);
  const RunFile run = parse_run(out);
  CHECK(run.ranking("q2").size() == 5);
  for (const auto& e : run.entries) CHECK(e.tag == "psc");
}

TEST_CASE("traces record every decode step") {
  const auto dir = testing::temp_dir("cli_trace");
  auto args = rerank_args("capcal", (dir / "c.run").string());
  args.insert(args.end(), {"--trace", (dir / "trace.jsonl").string()});
  REQUIRE(run_cli(args).code == 0);
  std::istringstream lines(testing::read_text(dir / "trace.jsonl"));
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) {
    const json j = json::parse(line);
    const auto& ranking = j.at("rankings").at(0);
    CHECK(ranking.at("calibrated") == true);
    CHECK(ranking.at("trace").size() == ranking.at("permutation").size());
    const auto& step = ranking.at("trace").at(0);
    for (const char* key : {"step", "remaining", "labels", "p_main", "p_prior", "entropy", "alpha", "scores", "chosen"}) {
      CHECK(step.contains(key));
    }
    CHECK(ranking.at("config").at("beta") == 1.0);
    ++count;
  }
  CHECK(count == 3);
}

TEST_CASE("beta sweep writes one run per value") {
  const auto dir = testing::temp_dir("cli_sweep");
  auto args = rerank_args("capcal", (dir / "sweep.run").string());
  args.insert(args.end(), {"--sweep-beta", "0,0.5,1"});
  REQUIRE(run_cli(args).code == 0);
  for (const std::string suffix : {"_beta0", "_beta0.5", "_beta1"}) {
    const fs::path path = dir / ("sweep" + suffix + ".run");
    REQUIRE(fs::exists(path));
    CHECK(parse_run(path.string()).entries.front().tag == "capcal" + suffix);
  }
  CHECK(run_cli({"rerank", "--tasks", fixture("tasks.jsonl"), "--sim-spec", fixture("sim.json"), "-o",
                 (dir / "x.run").string(), "--sweep-beta", "0,abc"})
            .code == 1);
}

TEST_CASE("prior shows the per-step content-free deviations") {
  const std::vector<std::string> base{"prior", "--tasks", fixture("tasks.jsonl"), "--sim-spec", fixture("sim.json"),
                                      "-q", "q1"};
  SUBCASE("text") {
    const Result r = run_cli(base);
    REQUIRE(r.code == 0);
    CHECK(r.out.find("[1]  p_prior 0.7112  deviation +0.4612") != std::string::npos);
    CHECK(r.out.find("[2]  p_prior 0.0963  deviation -0.1537") != std::string::npos);
  }
  SUBCASE("json") {
    auto args = base;
    args.push_back("--json-stdout");
    const Result r = run_cli(args);
    REQUIRE(r.code == 0);
    const json j = json::parse(r.out);
    CHECK(j.at("query_id") == "q1");
    CHECK(j.at("placeholder") == "fixed_string");
    CHECK(j.at("prior_mode") == "lockstep");
    const auto& steps = j.at("steps");
    REQUIRE(steps.size() == 4);
    const auto& first = steps.at(0);
    CHECK(first.at("uniform").get<double>() == doctest::Approx(0.25));
    const auto& c = first.at("candidates");
    REQUIRE(c.size() == 4);
    CHECK(c[0].at("deviation").get<double>() == doctest::Approx(0.46123459422759383).epsilon(1e-9));
    for (int i = 1; i < 4; ++i) {
      CHECK(c[i].at("deviation").get<double>() == doctest::Approx(-0.1537448647425313).epsilon(1e-9));
      CHECK(c[i].at("label") == std::to_string(i + 1));
      CHECK(c[i].at("index") == i + 1);
      CHECK(c[i].contains("p_prior"));
    }
    CHECK(steps.at(3).at("candidates").size() == 1);
  }
  SUBCASE("json file") {
    const auto dir = testing::temp_dir("cli_prior");
    auto args = base;
    args.insert(args.end(), {"--json", (dir / "p.json").string()});
    REQUIRE(run_cli(args).code == 0);
    CHECK(json::parse(testing::read_text(dir / "p.json")).at("steps").size() == 4);
  }
  SUBCASE("zero bias gives zero deviations") {
    const Result r = run_cli({"prior", "--tasks", fixture("tasks.jsonl"), "--sim-spec", fixture("sim_unbiased.json"),
                              "-q", "q2", "--json-stdout"});
    REQUIRE(r.code == 0);
    for (const auto& step : json::parse(r.out).at("steps")) {
      for (const auto& c : step.at("candidates")) CHECK(std::abs(c.at("deviation").get<double>()) < 1e-12);
    }
  }
  SUBCASE("unknown query") {
    auto args = base;
    args.back() = "q9";
    const Result r = run_cli(args);
    CHECK(r.code == 1);
    CHECK(r.err.find("q9") != std::string::npos);
  }
}

TEST_CASE("eval prints per-query and mean NDCG") {
  const Result r = run_cli({"eval", "--run", fixture("ndcg.run"), "--qrels", fixture("ndcg.qrels")});
  REQUIRE(r.code == 0);
  CHECK(r.out == "ndcg@10\tq1\t0.6443\nndcg@10\tall\t0.6443\n");

  const Result five = run_cli({"eval", "--run", fixture("ideal.run"), "--qrels", fixture("ndcg.qrels"), "--metric", "ndcg@5"});
  CHECK(five.out == "ndcg@5\tq1\t1.0000\nndcg@5\tall\t1.0000\n");

  const auto dir = testing::temp_dir("cli_eval");
  REQUIRE(run_cli({"eval", "--run", fixture("ndcg.run"), "--qrels", fixture("ndcg.qrels"), "--json",
                   (dir / "e.json").string()})
              .code == 0);
  const json j = json::parse(testing::read_text(dir / "e.json"));
  CHECK(j.at("mean").get<double>() == doctest::Approx(0.6442869262030828));
  CHECK(j.at("method") == "fixture");
}

TEST_CASE("compare tabulates runs with deltas") {
  const auto dir = testing::temp_dir("cli_compare");
  const std::string base = (dir / "base.run").string();
  const std::string capcal = (dir / "capcal.run").string();
  REQUIRE(run_cli(rerank_args("base", base)).code == 0);
  REQUIRE(run_cli(rerank_args("capcal", capcal)).code == 0);

  const Result r = run_cli({"compare", base, capcal, "--qrels", fixture("tasks.qrels"), "--json", (dir / "t.json").string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("tasks delta") != std::string::npos);
  CHECK(r.out.find("base") != std::string::npos);
  CHECK(r.out.find("capcal") != std::string::npos);
  const json j = json::parse(testing::read_text(dir / "t.json"));
  CHECK(j.at("metric") == "ndcg@10");
  CHECK(j.at("baseline") == "base");
  CHECK(j.at("rows").size() == 2);

  const Result single = run_cli({"compare", capcal, "--qrels", fixture("tasks.qrels")});
  CHECK(single.code == 0);
  CHECK(single.out.find("delta") == std::string::npos);

  testing::write_text(dir / "partial.run", "q1 Q0 d12 1 1.0 partial\n");
  CHECK(run_cli({"compare", base, (dir / "partial.run").string(), "--qrels", fixture("tasks.qrels")}).code == 1);
}

TEST_CASE("unreachable HTTP backend exits with the backend failure code") {
  const auto dir = testing::temp_dir("cli_http");
  const Result r = run_cli({"rerank", "--tasks", fixture("tasks.jsonl"), "--backend", "http", "--endpoint",
                            "http://127.0.0.1:1", "--retries", "0", "--timeout", "1", "-o", (dir / "h.run").string()});
  CHECK(r.code == 2);
}

TEST_CASE("exit codes") {
  const auto dir = testing::temp_dir("cli_codes");
  const std::string out = (dir / "o.run").string();
  CHECK(run_cli({}).code == 1);
  CHECK(run_cli({"rerank", "--bogus"}).code == 1);
  CHECK(run_cli({"--help"}).code == 0);

  auto missing = rerank_args("capcal", out);
  missing[2] = (dir / "missing.jsonl").string();
  CHECK(run_cli(missing).code == 3);

  testing::write_text(dir / "bad.jsonl", "{\"query_id\": \"q1\"\n");
  auto malformed = rerank_args("capcal", out);
  malformed[2] = (dir / "bad.jsonl").string();
  const Result bad = run_cli(malformed);
  CHECK(bad.code == 3);
  CHECK(bad.err.find("bad.jsonl:1") != std::string::npos);

  auto args = rerank_args("capcal", out);
  args.insert(args.end(), {"--placeholder", "nonsense"});
  CHECK(run_cli(args).code == 1);
  args = rerank_args("capcal", out);
  args.insert(args.end(), {"--beta", "-1"});
  CHECK(run_cli(args).code == 1);
  args = rerank_args("capcal", out);
  args.insert(args.end(), {"--window", "25"});
  CHECK(run_cli(args).code == 1);
  CHECK(run_cli(rerank_args("nonsense", out)).code == 1);

  testing::write_text(dir / "gap.run", "q1 Q0 d1 1 2.0 t\nq1 Q0 d2 3 1.0 t\n");
  const Result gap = run_cli({"eval", "--run", (dir / "gap.run").string(), "--qrels", fixture("ndcg.qrels")});
  CHECK(gap.code == 3);
  CHECK(gap.err.find("gap.run:2") != std::string::npos);
  CHECK(run_cli({"eval", "--run", fixture("ndcg.run"), "--qrels", fixture("ndcg.qrels"), "--metric", "map"}).code == 1);
}

TEST_CASE("configuration precedence: flags over environment over config file") {
  const auto dir = testing::temp_dir("cli_config");
  const std::string out = (dir / "c.run").string();
  const std::vector<std::string> common{"rerank", "--tasks", fixture("tasks.jsonl"), "--sim-spec", fixture("sim.json"),
                                        "-o", out};
  const auto tag_of = [&] { return parse_run(out).entries.front().tag; };

  std::vector<std::string> args{"--config", fixture("config.toml")};
  args.insert(args.end(), common.begin(), common.end());
  REQUIRE(run_cli(args).code == 0);
  CHECK(tag_of() == "base");

  ::setenv("CAPCAL_METHOD", "psc", 1);
  REQUIRE(run_cli(args).code == 0);
  CHECK(tag_of() == "psc");

  auto flagged = args;
  flagged.insert(flagged.end(), {"--method", "capcal"});
  REQUIRE(run_cli(flagged).code == 0);
  CHECK(tag_of() == "capcal");
  ::unsetenv("CAPCAL_METHOD");

  std::vector<std::string> missing{"--config", (dir / "none.toml").string()};
  missing.insert(missing.end(), common.begin(), common.end());
  CHECK(run_cli(missing).code == 1);
}

TEST_CASE("run scores decrease with rank") {
  for (int n : {1, 2, 20}) {
    for (int r = 1; r < n; ++r) CHECK(cli::run_score(r, n, -50.0) > cli::run_score(r + 1, n, 50.0));
  }
  CHECK(cli::run_score(1, 1, 0.0) == 1.25);
}
