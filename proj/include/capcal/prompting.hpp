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

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "capcal/domain.hpp"

namespace capcal {

/// Listwise ranking prompt. Sections are concatenated in declaration order
/// with one `passage_line_format` instance per candidate between the preamble
/// and the postamble.
///
/// Slots: {num} and {query} in the preamble and postamble, {label} and {text}
/// in the passage line. Any other `{name}` is a TemplateError. A slot must be
/// followed by literal text in the same section so rendered prompts can be
/// parsed back.
struct PromptTemplate {
  std::string system_text;
  std::string user_preamble;
  std::string passage_line_format;
  std::string user_postamble;
  std::string assistant_open;

  /// The RankLLM listwise prompt.
  static PromptTemplate standard();

  /// Throws TemplateError on unknown slots or a slot without a literal after it.
  void validate() const;
};

/// Reads a template override. The file is a sequence of sections, each opened
/// by a line `[[name]]` where name is one of system, preamble, passage,
/// postamble, assistant. A section's value is every byte after its header
/// line up to the next header line. Missing sections keep the standard text.
PromptTemplate load_template(const std::string& path);
PromptTemplate parse_template(std::string_view contents);

/// x = T(q, d_1..d_N).
std::string render_main_prompt(const RerankTask& task, const PromptTemplate& tmpl);

/// x_empty: same layout as the main prompt with each passage body replaced by
/// the task's placeholder.
std::string render_empty_prompt(const RerankTask& task, const PromptTemplate& tmpl);

/// Placeholder body for slot `index` (1-based). Length-matched variants count
/// UTF-8 code points. Random variants draw letters and digits from a generator
/// seeded by (rng_seed, index).
std::string make_placeholder(const PlaceholderPolicy& policy,
                             const std::vector<Candidate>& candidates, int index);

struct ParsedPassage {
  std::string label;
  std::string text;
};

/// Structure recovered from a rendered prompt.
struct ParsedPrompt {
  std::string query;
  std::vector<ParsedPassage> passages;
};

/// Inverse of the renderers: recovers the query and the passage lines of a
/// prompt produced with `tmpl`. Empty when the prompt does not follow it.
std::optional<ParsedPrompt> parse_prompt(std::string_view prompt, const PromptTemplate& tmpl);

}  // namespace capcal
