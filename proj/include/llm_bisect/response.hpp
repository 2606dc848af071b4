// Copyright 2026 The llm-bisect Authors.
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

// The structured response document a model returns for one bisect step, and
// its validator. The wire format is a JSON object with exactly nine fields:
//
//   target_behaviour      string
//   has_compile_error     boolean
//   behaviour_change      string, one of intro | del | mod | no-effect
//   behaviour_confidence  integer in [0, 100]
//   sem_edits             array of {id: string, kind: string, semantic: boolean,
//                         behaviour: string, likelihood: integer,
//                         dependency: string, precedent: string}
//   counterfactual_fix    string
//   reasoning_chain       array of strings
//   reflection            string
//   bisect_mark           string, one of good | bad
//
// No other properties are allowed, at the top level or inside sem_edits.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "llm_bisect/error.hpp"

namespace llm_bisect {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

inline constexpr std::array<std::string_view, 9> kResponseFields = {
    "target_behaviour", "has_compile_error", "behaviour_change",
    "behaviour_confidence", "sem_edits", "counterfactual_fix",
    "reasoning_chain", "reflection", "bisect_mark"};

inline constexpr std::array<std::string_view, 7> kSemEditFields = {
    "id", "kind", "semantic", "behaviour", "likelihood", "dependency", "precedent"};

inline constexpr std::array<std::string_view, 4> kBehaviourChanges = {"intro", "del", "mod",
                                                                      "no-effect"};
inline constexpr std::array<std::string_view, 2> kBisectMarks = {"good", "bad"};

struct SemEdit {
  std::string id;
  std::string kind;
  bool semantic = false;
  std::string behaviour;
  std::int64_t likelihood = 0;
  std::string dependency;
  std::string precedent;

  friend bool operator==(const SemEdit&, const SemEdit&) = default;
};

/// Enum-valued fields are kept as text so a hand-edited correction can hold
/// an out-of-vocabulary value until `validate` rejects it.
struct CotResponse {
  std::string target_behaviour;
  bool has_compile_error = false;
  std::string behaviour_change;
  std::int64_t behaviour_confidence = 0;
  std::vector<SemEdit> sem_edits;
  std::string counterfactual_fix;
  std::vector<std::string> reasoning_chain;
  std::string reflection;
  std::string bisect_mark;

  bool marks_bad() const noexcept { return bisect_mark == "bad"; }
  friend bool operator==(const CotResponse&, const CotResponse&) = default;
};

namespace detail {

template <std::size_t N>
bool one_of(const std::string& v, const std::array<std::string_view, N>& set) {
  for (auto s : set)
    if (v == s) return true;
  return false;
}

template <std::size_t N>
std::string join_set(const std::array<std::string_view, N>& set) {
  std::string out;
  for (auto s : set) {
    if (!out.empty()) out += ", ";
    out += s;
  }
  return out;
}

// JSON Schema draft-07 integers: any number with a zero fractional part.
inline bool is_integer(const json& v) {
  if (v.is_number_integer()) return true;
  if (!v.is_number_float()) return false;
  double d = v.get<double>();
  return std::isfinite(d) && std::floor(d) == d;
}

inline std::int64_t to_int64(const json& v, const std::string& field) {
  if (v.is_number_unsigned()) {
    auto u = v.get<std::uint64_t>();
    if (u > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
      throw SchemaViolation(field, "integer out of range");
    return static_cast<std::int64_t>(u);
  }
  if (v.is_number_integer()) return v.get<std::int64_t>();
  double d = v.get<double>();
  if (d < -9.2e18 || d > 9.2e18) throw SchemaViolation(field, "integer out of range");
  return static_cast<std::int64_t>(d);
}

inline void expect_string(const json& v, const std::string& field) {
  if (!v.is_string()) throw SchemaViolation(field, "expected string");
}
inline void expect_bool(const json& v, const std::string& field) {
  if (!v.is_boolean()) throw SchemaViolation(field, "expected boolean");
}
inline void expect_integer(const json& v, const std::string& field) {
  if (!is_integer(v)) throw SchemaViolation(field, "expected integer");
}

inline void check_confidence(std::int64_t c) {
  if (c < 0) throw SchemaViolation("behaviour_confidence", "minimum 0");
  if (c > 100) throw SchemaViolation("behaviour_confidence", "maximum 100");
}

inline SemEdit sem_edit_from_json(const json& item, const std::string& path) {
  if (!item.is_object()) throw SchemaViolation(path, "expected object");
  for (auto f : kSemEditFields) {
    if (!item.contains(std::string(f))) throw SchemaViolation(path + "." + std::string(f), "missing");
  }
  for (const auto& [key, _] : item.items()) {
    bool known = false;
    for (auto f : kSemEditFields) known = known || key == f;
    if (!known) throw SchemaViolation(path + "." + key, "additional property not allowed");
  }
  SemEdit e;
  auto get_string = [&](const char* f, std::string& dst) {
    expect_string(item[f], path + "." + f);
    dst = item[f].get<std::string>();
  };
  get_string("id", e.id);
  get_string("kind", e.kind);
  expect_bool(item["semantic"], path + ".semantic");
  e.semantic = item["semantic"].get<bool>();
  get_string("behaviour", e.behaviour);
  expect_integer(item["likelihood"], path + ".likelihood");
  e.likelihood = to_int64(item["likelihood"], path + ".likelihood");
  get_string("dependency", e.dependency);
  get_string("precedent", e.precedent);
  return e;
}

}  // namespace detail

/// Value-level checks on an already typed response.
inline void validate(const CotResponse& r) {
  if (!detail::one_of(r.behaviour_change, kBehaviourChanges)) {
    throw SchemaViolation("behaviour_change", "not one of " + detail::join_set(kBehaviourChanges));
  }
  detail::check_confidence(r.behaviour_confidence);
  if (!detail::one_of(r.bisect_mark, kBisectMarks)) {
    throw SchemaViolation("bisect_mark", "not one of " + detail::join_set(kBisectMarks));
  }
}

inline bool is_valid(const CotResponse& r) {
  try {
    validate(r);
    return true;
  } catch (const SchemaViolation&) {
    return false;
  }
}

/// Full structural validation of a parsed document. Checks required fields
/// in declaration order, then rejects unknown properties. With
/// `check_values` off only structure and types are enforced, which is how
/// stored corrections are loaded before `validate` judges them.
inline CotResponse response_from_json(const json& doc, bool check_values = true) {
  if (!doc.is_object()) throw SchemaViolation("$", "expected object");
  CotResponse r;
  for (auto f : kResponseFields) {
    std::string field(f);
    if (!doc.contains(field)) throw SchemaViolation(field, "missing");
    const json& v = doc[field];
    if (field == "target_behaviour") {
      detail::expect_string(v, field);
      r.target_behaviour = v.get<std::string>();
    } else if (field == "has_compile_error") {
      detail::expect_bool(v, field);
      r.has_compile_error = v.get<bool>();
    } else if (field == "behaviour_change") {
      detail::expect_string(v, field);
      r.behaviour_change = v.get<std::string>();
      if (check_values && !detail::one_of(r.behaviour_change, kBehaviourChanges))
        throw SchemaViolation(field, "not one of " + detail::join_set(kBehaviourChanges));
    } else if (field == "behaviour_confidence") {
      detail::expect_integer(v, field);
      if (check_values && v.is_number_float()) {
        double d = v.get<double>();
        if (d < 0) throw SchemaViolation(field, "minimum 0");
        if (d > 100) throw SchemaViolation(field, "maximum 100");
      }
      r.behaviour_confidence = detail::to_int64(v, field);
      if (check_values) detail::check_confidence(r.behaviour_confidence);
    } else if (field == "sem_edits") {
      if (!v.is_array()) throw SchemaViolation(field, "expected array");
      for (std::size_t i = 0; i < v.size(); ++i) {
        r.sem_edits.push_back(
            detail::sem_edit_from_json(v[i], "sem_edits[" + std::to_string(i) + "]"));
      }
    } else if (field == "counterfactual_fix") {
      detail::expect_string(v, field);
      r.counterfactual_fix = v.get<std::string>();
    } else if (field == "reasoning_chain") {
      if (!v.is_array()) throw SchemaViolation(field, "expected array");
      for (std::size_t i = 0; i < v.size(); ++i) {
        detail::expect_string(v[i], "reasoning_chain[" + std::to_string(i) + "]");
        r.reasoning_chain.push_back(v[i].get<std::string>());
      }
    } else if (field == "reflection") {
      detail::expect_string(v, field);
      r.reflection = v.get<std::string>();
    } else if (field == "bisect_mark") {
      detail::expect_string(v, field);
      r.bisect_mark = v.get<std::string>();
      if (check_values && !detail::one_of(r.bisect_mark, kBisectMarks))
        throw SchemaViolation(field, "not one of " + detail::join_set(kBisectMarks));
    }
  }
  for (const auto& [key, _] : doc.items()) {
    bool known = false;
    for (auto f : kResponseFields) known = known || key == f;
    if (!known) throw SchemaViolation(key, "additional property not allowed");
  }
  return r;
}

inline ordered_json to_json(const CotResponse& r) {
  ordered_json edits = ordered_json::array();
  for (const auto& e : r.sem_edits) {
    edits.push_back(ordered_json{{"id", e.id},
                                 {"kind", e.kind},
                                 {"semantic", e.semantic},
                                 {"behaviour", e.behaviour},
                                 {"likelihood", e.likelihood},
                                 {"dependency", e.dependency},
                                 {"precedent", e.precedent}});
  }
  return ordered_json{{"target_behaviour", r.target_behaviour},
                      {"has_compile_error", r.has_compile_error},
                      {"behaviour_change", r.behaviour_change},
                      {"behaviour_confidence", r.behaviour_confidence},
                      {"sem_edits", std::move(edits)},
                      {"counterfactual_fix", r.counterfactual_fix},
                      {"reasoning_chain", r.reasoning_chain},
                      {"reflection", r.reflection},
                      {"bisect_mark", r.bisect_mark}};
}

/// Canonical compact form: schema field order, no whitespace.
inline std::string serialize(const CotResponse& r) { return to_json(r).dump(); }

namespace detail {

// Balanced {...} blocks in `text`, in order of appearance. String literals
// are tracked only inside a block, so quotes in surrounding prose are inert.
inline std::vector<std::string> brace_blocks(std::string_view text) {
  std::vector<std::string> blocks;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] != '{') {
      ++i;
      continue;
    }
    std::size_t depth = 0;
    bool in_string = false;
    bool escaped = false;
    std::size_t j = i;
    for (; j < text.size(); ++j) {
      char c = text[j];
      if (in_string) {
        if (escaped) escaped = false;
        else if (c == '\\') escaped = true;
        else if (c == '"') in_string = false;
        continue;
      }
      if (c == '"') in_string = true;
      else if (c == '{') ++depth;
      else if (c == '}' && --depth == 0) break;
    }
    if (j >= text.size()) {
      ++i;  // unbalanced: retry from the next brace
      continue;
    }
    blocks.emplace_back(text.substr(i, j - i + 1));
    i = j + 1;
  }
  return blocks;
}

// Bodies of ``` fenced blocks; the info string after the opening fence is dropped.
inline std::vector<std::string_view> fenced_bodies(std::string_view text) {
  std::vector<std::string_view> bodies;
  std::size_t pos = 0;
  while (true) {
    auto open = text.find("```", pos);
    if (open == std::string_view::npos) break;
    auto body_start = text.find('\n', open + 3);
    if (body_start == std::string_view::npos) break;
    ++body_start;
    auto close = text.find("```", body_start);
    if (close == std::string_view::npos) break;
    bodies.push_back(text.substr(body_start, close - body_start));
    pos = close + 3;
  }
  return bodies;
}

}  // namespace detail

/// First JSON object found in raw model output. Fenced blocks are searched
/// before the bare text.
inline std::optional<json> extract_document(std::string_view raw) {
  std::vector<std::string> candidates;
  for (auto body : detail::fenced_bodies(raw)) {
    for (auto& b : detail::brace_blocks(body)) candidates.push_back(std::move(b));
  }
  for (auto& b : detail::brace_blocks(raw)) candidates.push_back(std::move(b));
  for (const auto& c : candidates) {
    auto doc = json::parse(c, nullptr, /*allow_exceptions=*/false);
    if (!doc.is_discarded() && doc.is_object()) return doc;
  }
  return std::nullopt;
}

inline CotResponse parse_response(std::string_view raw) {
  auto doc = extract_document(raw);
  if (!doc) fail(ErrorClass::NoDocumentFound, "no JSON object in model output");
  return response_from_json(*doc);
}

}  // namespace llm_bisect
