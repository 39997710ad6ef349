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
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace capcal {

/// Largest candidate list a single listwise prompt may carry.
inline constexpr int kDefaultWindowCap = 20;

struct Query {
  std::string id;
  std::string text;
};

/// One document in a rerank list. `original_index` is the 1-based slot the
/// document occupies in the prompt.
struct Candidate {
  std::string doc_id;
  std::string text;
  int original_index = 0;
};

enum class IdentifierKind { numeric, alphabetic };

struct IdentifierScheme {
  IdentifierKind kind = IdentifierKind::numeric;

  std::string render(int index) const;
  std::optional<int> parse(std::string_view label) const;
};

/// "7" for numeric schemes; bijective base-26 ("A".."Z", "AA", "AB", ...) for
/// alphabetic ones. Requires index >= 1.
std::string render_label(IdentifierScheme scheme, int index);

/// Inverse of render_label. Empty for strings the scheme never produces.
std::optional<int> parse_label(IdentifierScheme scheme, std::string_view label);

enum class PlaceholderKind {
  fixed_string,
  passage1_copy,
  single_space,
  space_x20,
  random_x20,
  space_len1,
  random_len1,
  space_len_i,
};

/// What replaces each passage body in the content-free prompt.
struct PlaceholderPolicy {
  PlaceholderKind kind = PlaceholderKind::fixed_string;
  std::string fixed_text = "This is a placeholder";
  std::uint64_t rng_seed = 0;
};

struct RerankTask {
  Query query;
  std::vector<Candidate> candidates;
  IdentifierScheme scheme;
  PlaceholderPolicy placeholder;

  int size() const noexcept { return static_cast<int>(candidates.size()); }
};

/// Builds a task whose candidates occupy slots 1..N in the given order.
RerankTask make_task(Query query,
                     const std::vector<std::pair<std::string, std::string>>& docs,
                     IdentifierScheme scheme = {},
                     PlaceholderPolicy placeholder = {});

/// Throws InvalidTask unless 2 <= N <= cap, doc ids are unique, the query text
/// is non-blank and original_index runs 1..N in list order.
void validate_task(const RerankTask& task, int cap = kDefaultWindowCap);

/// Most-relevant-first list of 1-based original indices.
struct Permutation {
  std::vector<int> order;

  bool operator==(const Permutation&) const = default;
};

bool validate_permutation(const Permutation& perm, int n);

/// Token surfaces of a forced continuation; `rendered` is their concatenation.
struct TokenSeq {
  std::vector<std::string> tokens;
  std::string rendered;

  static TokenSeq from_tokens(std::vector<std::string> tokens);
  bool consistent() const;
};

/// One greedy decode step. All vectors are aligned with `remaining`.
struct StepTrace {
  int step_index = 0;
  std::vector<int> remaining;
  Eigen::VectorXd p_main;
  std::optional<Eigen::VectorXd> p_prior;
  double entropy_h = 0.0;
  double alpha_k = 0.0;
  Eigen::VectorXd scores;
  int chosen = 0;

  /// Position of `chosen` inside `remaining`.
  int chosen_slot() const;
};

// String forms used by config files, CLI flags and JSON output.
std::string_view to_string(IdentifierKind kind);
std::string_view to_string(PlaceholderKind kind);
IdentifierKind identifier_kind_from_string(std::string_view s);
PlaceholderKind placeholder_kind_from_string(std::string_view s);

/// Collapses whitespace runs to one space and trims both ends.
std::string normalize_whitespace(std::string_view text);

/// Number of UTF-8 code points (bytes that are not continuation bytes).
std::size_t utf8_length(std::string_view text);

}  // namespace capcal
