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

#include "capcal/prompting.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <random>
#include <sstream>
#include <utility>

#include "capcal/errors.hpp"
#include "capcal/random.hpp"

namespace capcal {

namespace {

struct Piece {
  bool is_slot = false;
  std::string text;  // slot name or literal
};

bool is_slot_name(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!((c >= 'a' && c <= 'z') || c == '_')) return false;
  }
  return true;
}

std::vector<Piece> split_format(std::string_view fmt) {
  std::vector<Piece> pieces;
  std::string literal;
  std::size_t i = 0;
  while (i < fmt.size()) {
    if (fmt[i] == '{') {
      const auto close = fmt.find('}', i + 1);
      if (close != std::string_view::npos && is_slot_name(fmt.substr(i + 1, close - i - 1))) {
        if (!literal.empty()) pieces.push_back({false, std::exchange(literal, {})});
        pieces.push_back({true, std::string(fmt.substr(i + 1, close - i - 1))});
        i = close + 1;
        continue;
      }
    }
    literal.push_back(fmt[i++]);
  }
  if (!literal.empty()) pieces.push_back({false, std::move(literal)});
  return pieces;
}

using SlotValues = std::vector<std::pair<std::string_view, std::string_view>>;

void append_formatted(std::string& out, std::string_view section, std::string_view fmt,
                      const SlotValues& values) {
  for (const Piece& p : split_format(fmt)) {
    if (!p.is_slot) {
      out += p.text;
      continue;
    }
    bool found = false;
    for (const auto& [name, value] : values) {
      if (name == p.text) {
        out += value;
        found = true;
        break;
      }
    }
    if (!found) {
      throw TemplateError("unresolvable slot {" + p.text + "} in " + std::string(section));
    }
  }
}

void check_section(std::string_view section, std::string_view fmt,
                   std::initializer_list<std::string_view> allowed) {
  const auto pieces = split_format(fmt);
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    if (!pieces[i].is_slot) continue;
    if (std::find(allowed.begin(), allowed.end(), pieces[i].text) == allowed.end()) {
      throw TemplateError("unresolvable slot {" + pieces[i].text + "} in " + std::string(section));
    }
    if (i + 1 >= pieces.size() || pieces[i + 1].is_slot) {
      throw TemplateError("slot {" + pieces[i].text + "} in " + std::string(section) +
                          " must be followed by literal text");
    }
  }
}

// Matches one formatted section at `pos`. Slot values must agree with any
// value already captured under the same name.
bool match_section(std::string_view input, std::size_t& pos, const std::vector<Piece>& pieces,
                   std::vector<std::pair<std::string, std::string>>& captures) {
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    const Piece& p = pieces[i];
    if (!p.is_slot) {
      if (input.substr(pos, p.text.size()) != p.text) return false;
      pos += p.text.size();
      continue;
    }
    const std::string& next = pieces[i + 1].text;
    const auto end = input.find(next, pos);
    if (end == std::string_view::npos) return false;
    std::string value(input.substr(pos, end - pos));
    pos = end;
    bool seen = false;
    for (const auto& [name, prior] : captures) {
      if (name == p.text) {
        if (prior != value) return false;
        seen = true;
      }
    }
    if (!seen) captures.emplace_back(p.text, std::move(value));
  }
  return true;
}

std::string_view capture(const std::vector<std::pair<std::string, std::string>>& captures,
                         std::string_view name) {
  for (const auto& [k, v] : captures) {
    if (k == name) return v;
  }
  return {};
}

template <typename TextFn>
std::string render_prompt(const RerankTask& task, const PromptTemplate& tmpl, TextFn&& text_of) {
  tmpl.validate();
  const std::string num = std::to_string(task.size());
  const SlotValues header{{"num", num}, {"query", task.query.text}};

  std::string out = tmpl.system_text;
  append_formatted(out, "preamble", tmpl.user_preamble, header);
  for (const Candidate& c : task.candidates) {
    const std::string label = task.scheme.render(c.original_index);
    const std::string text = text_of(c);
    append_formatted(out, "passage", tmpl.passage_line_format, {{"label", label}, {"text", text}});
  }
  append_formatted(out, "postamble", tmpl.user_postamble, header);
  out += tmpl.assistant_open;
  return out;
}

std::string random_alnum(std::uint64_t seed, int index, std::size_t length) {
  static constexpr std::string_view kAlphabet =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";
  std::mt19937_64 gen(mix_seed(seed, static_cast<std::uint64_t>(index)));
  std::string out(length, ' ');
  for (auto& c : out) c = kAlphabet[uniform_below(gen, kAlphabet.size())];
  return out;
}

}  // namespace

PromptTemplate PromptTemplate::standard() {
  return PromptTemplate{
      "<|system|>\n"
      "You are RankLLM, an intelligent assistant that can rank passages based on their "
      "relevancy to the query.\n",
      "<|user|>\n"
      "I will provide you with {num} passages, each indicated by a numerical identifier []. "
      "Rank the passages based on their relevance to the search query: {query}.\n\n",
      "[{label}] {text}\n",
      "\nSearch Query: {query}.\n\n"
      "Rank the {num} passages above based on their relevance to the search query. All the "
      "passages should be included and listed using identifiers, in descending order of "
      "relevance. The output format should be [] > [], e.g., [4] > [2]. Only respond with the "
      "ranking results, do not say any word or explain.\n",
      "<|assistant|>\n",
  };
}

void PromptTemplate::validate() const {
  check_section("system", system_text, {});
  check_section("preamble", user_preamble, {"num", "query"});
  check_section("passage", passage_line_format, {"label", "text"});
  check_section("postamble", user_postamble, {"num", "query"});
  check_section("assistant", assistant_open, {});
}

PromptTemplate parse_template(std::string_view contents) {
  PromptTemplate tmpl = PromptTemplate::standard();
  std::string* current = nullptr;
  std::size_t pos = 0;
  while (pos < contents.size()) {
    auto eol = contents.find('\n', pos);
    const std::size_t line_end = eol == std::string_view::npos ? contents.size() : eol;
    const std::size_t next = eol == std::string_view::npos ? contents.size() : eol + 1;
    std::string_view line = contents.substr(pos, line_end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    std::string* header = nullptr;
    if (line == "[[system]]") header = &tmpl.system_text;
    else if (line == "[[preamble]]") header = &tmpl.user_preamble;
    else if (line == "[[passage]]") header = &tmpl.passage_line_format;
    else if (line == "[[postamble]]") header = &tmpl.user_postamble;
    else if (line == "[[assistant]]") header = &tmpl.assistant_open;
    else if (line.size() > 4 && line.starts_with("[[") && line.ends_with("]]"))
      throw TemplateError("unknown template section " + std::string(line));

    if (header != nullptr) {
      current = header;
      current->clear();
    } else if (current != nullptr) {
      current->append(contents.substr(pos, next - pos));
    } else if (!line.empty()) {
      throw TemplateError("template text before the first section header");
    }
    pos = next;
  }
  tmpl.validate();
  return tmpl;
}

PromptTemplate load_template(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open template file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_template(ss.str());
}

std::string render_main_prompt(const RerankTask& task, const PromptTemplate& tmpl) {
  return render_prompt(task, tmpl, [](const Candidate& c) { return c.text; });
}

std::string render_empty_prompt(const RerankTask& task, const PromptTemplate& tmpl) {
  return render_prompt(task, tmpl, [&](const Candidate& c) {
    return make_placeholder(task.placeholder, task.candidates, c.original_index);
  });
}

std::string make_placeholder(const PlaceholderPolicy& policy,
                             const std::vector<Candidate>& candidates, int index) {
  const auto passage_length = [&](int slot) -> std::size_t {
    if (slot < 1 || static_cast<std::size_t>(slot) > candidates.size()) {
      throw InvalidTask("placeholder slot " + std::to_string(slot) + " out of range");
    }
    return utf8_length(candidates[static_cast<std::size_t>(slot - 1)].text);
  };

  switch (policy.kind) {
    case PlaceholderKind::fixed_string:
      return policy.fixed_text;
    case PlaceholderKind::passage1_copy:
      if (candidates.empty()) throw InvalidTask("passage1_copy needs at least one candidate");
      return candidates.front().text;
    case PlaceholderKind::single_space:
      return " ";
    case PlaceholderKind::space_x20:
      return std::string(20, ' ');
    case PlaceholderKind::random_x20:
      return random_alnum(policy.rng_seed, index, 20);
    case PlaceholderKind::space_len1:
      return std::string(passage_length(1), ' ');
    case PlaceholderKind::random_len1:
      return random_alnum(policy.rng_seed, index, passage_length(1));
    case PlaceholderKind::space_len_i:
      return std::string(passage_length(index), ' ');
  }
  return policy.fixed_text;
}

std::optional<ParsedPrompt> parse_prompt(std::string_view prompt, const PromptTemplate& tmpl) {
  if (!prompt.starts_with(tmpl.system_text)) return std::nullopt;
  std::size_t pos = tmpl.system_text.size();

  std::vector<std::pair<std::string, std::string>> header;
  if (!match_section(prompt, pos, split_format(tmpl.user_preamble), header)) return std::nullopt;
  const std::string_view num_text = capture(header, "num");
  const auto num = parse_label(IdentifierScheme{IdentifierKind::numeric}, num_text);
  if (!num || *num > 100000) return std::nullopt;

  ParsedPrompt parsed;
  parsed.query = std::string(capture(header, "query"));
  parsed.passages.reserve(static_cast<std::size_t>(*num));
  const auto line_pieces = split_format(tmpl.passage_line_format);
  for (int i = 0; i < *num; ++i) {
    std::vector<std::pair<std::string, std::string>> line;
    if (!match_section(prompt, pos, line_pieces, line)) return std::nullopt;
    parsed.passages.push_back({std::string(capture(line, "label")),
                               std::string(capture(line, "text"))});
  }
  if (!match_section(prompt, pos, split_format(tmpl.user_postamble), header)) return std::nullopt;
  if (prompt.substr(pos) != tmpl.assistant_open) return std::nullopt;
  return parsed;
}

}  // namespace capcal
