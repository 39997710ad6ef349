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

#include <algorithm>
#include <cctype>
#include <random>
#include <sstream>

#include "capcal/errors.hpp"
#include "capcal/prompting.hpp"
#include "support.hpp"

using namespace capcal;

namespace {

RerankTask two_passages(IdentifierScheme scheme = {}) {
  return make_task({"q1", "how do tides work"},
                   {{"d1", "The moon's gravity pulls on the ocean."}, {"d2", "Tides follow lunar cycles."}}, scheme);
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

// Replaces the body of every passage line ("[label] body") with a marker.
std::string mask_passages(const std::string& prompt) {
  std::istringstream in(prompt);
  std::string line;
  std::string out;
  while (std::getline(in, line)) {
    const auto close = line.find("] ");
    const bool passage = line.size() > 1 && line[0] == '[' && close != std::string::npos && close > 1 &&
                         line.find_first_not_of("ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789", 1) == close;
    out += passage ? line.substr(0, close + 2) + "<passage>" : line;
    out += "\n";
  }
  return out;
}

}  // namespace

TEST_CASE("main prompt follows the listwise template") {
  const std::string prompt = render_main_prompt(two_passages(), PromptTemplate::standard());
  CHECK(contains(prompt, "\n[1] The moon's gravity pulls on the ocean.\n"));
  CHECK(contains(prompt, "\n[2] Tides follow lunar cycles.\n"));
  CHECK(contains(prompt, "Rank the passages based on their relevance to the search query: how do tides work."));
  CHECK(contains(prompt, "I will provide you with 2 passages"));
  CHECK(contains(prompt, "Rank the 2 passages above"));
  CHECK(contains(prompt, "Search Query: how do tides work."));
  CHECK(prompt.starts_with("<|system|>\nYou are RankLLM"));
  CHECK(prompt.ends_with("<|assistant|>\n"));
}

TEST_CASE("alphabetic identifiers in the prompt") {
  const std::string prompt = render_main_prompt(two_passages({IdentifierKind::alphabetic}), PromptTemplate::standard());
  CHECK(contains(prompt, "\n[A] The moon's"));
  CHECK(contains(prompt, "\n[B] Tides"));
  CHECK_FALSE(contains(prompt, "\n[1] "));
}

TEST_CASE("content-free prompt replaces passage bodies only") {
  RerankTask task = testing::synthetic_task(4, 3);
  const auto tmpl = PromptTemplate::standard();

  SUBCASE("fixed string") {
    const std::string prompt = render_empty_prompt(task, tmpl);
    for (int i = 1; i <= 3; ++i) CHECK(contains(prompt, "\n[" + std::to_string(i) + "] This is a placeholder\n"));
    CHECK_FALSE(contains(prompt, "passage 1 for query"));
  }
  SUBCASE("single space") {
    task.placeholder.kind = PlaceholderKind::single_space;
    const std::string prompt = render_empty_prompt(task, tmpl);
    CHECK(contains(prompt, "\n[1]  \n[2]  \n[3]  \n"));
  }
  SUBCASE("space times len[i]") {
    task.candidates[1].text = "twelve chars";
    task.placeholder.kind = PlaceholderKind::space_len_i;
    const std::string prompt = render_empty_prompt(task, tmpl);
    CHECK(contains(prompt, "\n[2] " + std::string(12, ' ') + "\n"));
  }
}

TEST_CASE("placeholder policies") {
  const RerankTask task = testing::synthetic_task(9, 4);
  const auto& c = task.candidates;
  PlaceholderPolicy policy;
  CHECK(make_placeholder(policy, c, 3) == "This is a placeholder");

  policy.kind = PlaceholderKind::passage1_copy;
  for (int i = 1; i <= 4; ++i) CHECK(make_placeholder(policy, c, i) == c[0].text);

  policy.kind = PlaceholderKind::space_x20;
  CHECK(make_placeholder(policy, c, 2) == std::string(20, ' '));

  policy.kind = PlaceholderKind::single_space;
  CHECK(make_placeholder(policy, c, 2) == " ");

  policy.kind = PlaceholderKind::space_len1;
  CHECK(make_placeholder(policy, c, 4) == std::string(c[0].text.size(), ' '));

  policy.kind = PlaceholderKind::random_x20;
  const std::string r = make_placeholder(policy, c, 2);
  CHECK(r.size() == 20);
  CHECK(std::all_of(r.begin(), r.end(), [](char ch) { return std::isalnum(static_cast<unsigned char>(ch)) != 0; }));
  CHECK(make_placeholder(policy, c, 2) == r);
  CHECK(make_placeholder(policy, c, 3) != r);
  policy.rng_seed = 99;
  CHECK(make_placeholder(policy, c, 2) != r);

  policy.kind = PlaceholderKind::random_len1;
  CHECK(make_placeholder(policy, c, 3).size() == c[0].text.size());
}

TEST_CASE("length-matched placeholders count code points") {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 50; ++trial) {
    RerankTask task = testing::synthetic_task(trial, 2 + static_cast<int>(uniform_below(gen, 10)));
    for (auto& cand : task.candidates) {
      cand.text.clear();
      const auto len = uniform_below(gen, 40);
      for (std::uint64_t i = 0; i < len; ++i) cand.text += (i % 5 == 0) ? "\xc3\xa9" : "x";
    }
    PlaceholderPolicy policy{PlaceholderKind::space_len_i, "", 0};
    for (const auto& cand : task.candidates) {
      CHECK(utf8_length(make_placeholder(policy, task.candidates, cand.original_index)) == utf8_length(cand.text));
    }
  }
}

TEST_CASE("main and content-free prompts differ only inside passage bodies") {
  const auto tmpl = PromptTemplate::standard();
  for (auto kind : {PlaceholderKind::fixed_string, PlaceholderKind::passage1_copy, PlaceholderKind::single_space,
                    PlaceholderKind::space_x20, PlaceholderKind::random_x20, PlaceholderKind::space_len1,
                    PlaceholderKind::random_len1, PlaceholderKind::space_len_i}) {
    for (auto scheme : {IdentifierKind::numeric, IdentifierKind::alphabetic}) {
      const RerankTask task = testing::synthetic_task(3, 12, {scheme}, {kind, "This is a placeholder", 17});
      const std::string main = render_main_prompt(task, tmpl);
      const std::string empty = render_empty_prompt(task, tmpl);
      CHECK(main != empty);
      CHECK(mask_passages(main) == mask_passages(empty));
      CHECK(render_empty_prompt(task, tmpl) == empty);
    }
  }
}

TEST_CASE("rendered prompts parse back") {
  const auto tmpl = PromptTemplate::standard();
  RerankTask task = testing::synthetic_task(8, 11, {IdentifierKind::alphabetic});
  task.candidates[4].text.clear();
  const auto parsed = parse_prompt(render_main_prompt(task, tmpl), tmpl);
  REQUIRE(parsed.has_value());
  CHECK(parsed->query == task.query.text);
  REQUIRE(parsed->passages.size() == 11);
  for (std::size_t i = 0; i < 11; ++i) {
    CHECK(parsed->passages[i].label == task.scheme.render(static_cast<int>(i) + 1));
    CHECK(parsed->passages[i].text == task.candidates[i].text);
  }
  CHECK_FALSE(parse_prompt("not a prompt", tmpl).has_value());
  CHECK_FALSE(parse_prompt(render_main_prompt(task, tmpl) + "extra", tmpl).has_value());
}

TEST_CASE("template validation") {
  PromptTemplate tmpl = PromptTemplate::standard();
  CHECK_NOTHROW(tmpl.validate());

  tmpl.user_preamble = "Rank {count} passages for {query}.\n";
  CHECK_THROWS_AS(tmpl.validate(), TemplateError);
  CHECK_THROWS_AS(render_main_prompt(two_passages(), tmpl), TemplateError);

  tmpl = PromptTemplate::standard();
  tmpl.passage_line_format = "[{label}]{text}";
  CHECK_THROWS_AS(tmpl.validate(), TemplateError);

  tmpl = PromptTemplate::standard();
  tmpl.system_text = "json braces {\"a\": 1} are literal\n";
  CHECK_NOTHROW(tmpl.validate());
}

TEST_CASE("template files override named sections") {
  const std::string text =
      "[[system]]\nSYS\n[[passage]]\n({label}) {text}\n[[assistant]]\nA:";
  const PromptTemplate tmpl = parse_template(text);
  CHECK(tmpl.system_text == "SYS\n");
  CHECK(tmpl.passage_line_format == "({label}) {text}\n");
  CHECK(tmpl.assistant_open == "A:");
  CHECK(tmpl.user_preamble == PromptTemplate::standard().user_preamble);

  const std::string prompt = render_main_prompt(two_passages(), tmpl);
  CHECK(contains(prompt, "(1) The moon's"));
  const auto parsed = parse_prompt(prompt, tmpl);
  REQUIRE(parsed.has_value());
  CHECK(parsed->passages[1].label == "2");

  CHECK_THROWS_AS(parse_template("[[bogus]]\nx\n"), TemplateError);
  CHECK_THROWS_AS(parse_template("stray\n[[system]]\nx\n"), TemplateError);
  CHECK_THROWS_AS(parse_template("[[preamble]]\n{num}{query}\n"), TemplateError);

  const auto dir = testing::temp_dir("template");
  testing::write_text(dir / "t.txt", text);
  CHECK(load_template((dir / "t.txt").string()).assistant_open == "A:");
  CHECK_THROWS_AS(load_template((dir / "missing.txt").string()), IoError);
}
