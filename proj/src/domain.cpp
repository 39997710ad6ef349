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

#include "capcal/domain.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <limits>
#include <stdexcept>
#include <unordered_set>

#include "capcal/errors.hpp"

namespace capcal {

std::string render_label(IdentifierScheme scheme, int index) {
  if (index < 1) throw std::out_of_range("identifier index must be >= 1");
  if (scheme.kind == IdentifierKind::numeric) return std::to_string(index);

  std::string label;
  long long n = index;
  while (n > 0) {
    --n;
    label.push_back(static_cast<char>('A' + n % 26));
    n /= 26;
  }
  std::reverse(label.begin(), label.end());
  return label;
}

std::optional<int> parse_label(IdentifierScheme scheme, std::string_view label) {
  if (label.empty() || label.size() > 9) return std::nullopt;
  long long value = 0;
  if (scheme.kind == IdentifierKind::numeric) {
    if (label.front() == '0') return std::nullopt;
    for (char c : label) {
      if (c < '0' || c > '9') return std::nullopt;
      value = value * 10 + (c - '0');
    }
  } else {
    for (char c : label) {
      if (c < 'A' || c > 'Z') return std::nullopt;
      value = value * 26 + (c - 'A' + 1);
    }
  }
  if (value < 1 || value > std::numeric_limits<int>::max()) return std::nullopt;
  return static_cast<int>(value);
}

std::string IdentifierScheme::render(int index) const {
  return render_label(*this, index);
}

std::optional<int> IdentifierScheme::parse(std::string_view label) const {
  return parse_label(*this, label);
}

RerankTask make_task(Query query,
                     const std::vector<std::pair<std::string, std::string>>& docs,
                     IdentifierScheme scheme, PlaceholderPolicy placeholder) {
  RerankTask task{std::move(query), {}, scheme, std::move(placeholder)};
  task.candidates.reserve(docs.size());
  int slot = 1;
  for (const auto& [doc_id, text] : docs) {
    task.candidates.push_back({doc_id, text, slot++});
  }
  return task;
}

void validate_task(const RerankTask& task, int cap) {
  const int n = task.size();
  if (n < 2 || n > cap) {
    throw InvalidTask("task '" + task.query.id + "' has " + std::to_string(n) +
                      " candidates; expected 2.." + std::to_string(cap));
  }
  if (normalize_whitespace(task.query.text).empty()) {
    throw InvalidTask("task '" + task.query.id + "' has a blank query");
  }
  std::unordered_set<std::string_view> seen;
  for (int i = 0; i < n; ++i) {
    const Candidate& c = task.candidates[static_cast<std::size_t>(i)];
    if (c.original_index != i + 1) {
      throw InvalidTask("candidate '" + c.doc_id + "' sits in slot " + std::to_string(i + 1) +
                        " but has original_index " + std::to_string(c.original_index));
    }
    if (!seen.insert(c.doc_id).second) {
      throw InvalidTask("duplicate doc_id '" + c.doc_id + "' in task '" + task.query.id + "'");
    }
  }
}

bool validate_permutation(const Permutation& perm, int n) {
  if (n < 0 || perm.order.size() != static_cast<std::size_t>(n)) return false;
  std::vector<bool> seen(static_cast<std::size_t>(n) + 1, false);
  for (int idx : perm.order) {
    if (idx < 1 || idx > n || seen[static_cast<std::size_t>(idx)]) return false;
    seen[static_cast<std::size_t>(idx)] = true;
  }
  return true;
}

TokenSeq TokenSeq::from_tokens(std::vector<std::string> tokens) {
  TokenSeq seq{std::move(tokens), {}};
  for (const auto& t : seq.tokens) seq.rendered += t;
  return seq;
}

bool TokenSeq::consistent() const {
  std::string joined;
  for (const auto& t : tokens) joined += t;
  return joined == rendered;
}

int StepTrace::chosen_slot() const {
  auto it = std::find(remaining.begin(), remaining.end(), chosen);
  if (it == remaining.end()) return -1;
  return static_cast<int>(it - remaining.begin());
}

namespace {

constexpr std::array<std::pair<PlaceholderKind, std::string_view>, 8> kPlaceholderNames{{
    {PlaceholderKind::fixed_string, "fixed_string"},
    {PlaceholderKind::passage1_copy, "passage1_copy"},
    {PlaceholderKind::single_space, "single_space"},
    {PlaceholderKind::space_x20, "space_x20"},
    {PlaceholderKind::random_x20, "random_x20"},
    {PlaceholderKind::space_len1, "space_len1"},
    {PlaceholderKind::random_len1, "random_len1"},
    {PlaceholderKind::space_len_i, "space_len_i"},
}};

}  // namespace

std::string_view to_string(IdentifierKind kind) {
  return kind == IdentifierKind::numeric ? "numeric" : "alphabetic";
}

std::string_view to_string(PlaceholderKind kind) {
  for (const auto& [k, name] : kPlaceholderNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

IdentifierKind identifier_kind_from_string(std::string_view s) {
  if (s == "numeric") return IdentifierKind::numeric;
  if (s == "alphabetic") return IdentifierKind::alphabetic;
  throw ConfigError("unknown identifier scheme '" + std::string(s) + "'");
}

PlaceholderKind placeholder_kind_from_string(std::string_view s) {
  for (const auto& [k, name] : kPlaceholderNames) {
    if (name == s) return k;
  }
  throw ConfigError("unknown placeholder policy '" + std::string(s) + "'");
}

std::string normalize_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

std::size_t utf8_length(std::string_view text) {
  std::size_t count = 0;
  for (unsigned char c : text) {
    if ((c & 0xC0) != 0x80) ++count;
  }
  return count;
}

}  // namespace capcal
