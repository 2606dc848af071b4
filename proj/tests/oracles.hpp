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

// Independent reference implementations used as test oracles. None of this
// code calls into the library under test.

#pragma once

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace oracles {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Response schema: a small draft-07 interpreter driven by the reference
// schema document, with the behaviour_change vocabulary added as an enum.

inline const json& response_schema() {
  static const json schema = json::parse(R"({
  "$schema": "http://json-schema.org/draft-07/schema#",
  "title": "Bisect Sample",
  "type": "object",
  "properties": {
    "target_behaviour": { "type": "string" },
    "has_compile_error": { "type": "boolean" },
    "behaviour_change": { "type": "string", "enum": ["intro", "del", "mod", "no-effect"] },
    "behaviour_confidence": { "type": "integer", "minimum": 0, "maximum": 100 },
    "sem_edits": {
      "type": "array",
      "items": {
        "type": "object",
        "properties": {
          "id": { "type": "string" },
          "kind": { "type": "string" },
          "semantic": { "type": "boolean" },
          "behaviour": { "type": "string" },
          "likelihood": { "type": "integer" },
          "dependency": { "type": "string" },
          "precedent": { "type": "string" }
        },
        "required": ["id","kind","semantic","behaviour","likelihood","dependency","precedent"],
        "additionalProperties": false
      }
    },
    "counterfactual_fix": { "type": "string" },
    "reasoning_chain": { "type": "array", "items": { "type": "string" } },
    "reflection": { "type": "string" },
    "bisect_mark": { "type": "string", "enum": ["good", "bad"] }
  },
  "required": ["target_behaviour","has_compile_error","behaviour_change","behaviour_confidence",
               "sem_edits","counterfactual_fix","reasoning_chain","reflection","bisect_mark"],
  "additionalProperties": false
})");
  return schema;
}

inline bool schema_type_ok(const json& v, const std::string& type) {
  if (type == "object") return v.is_object();
  if (type == "array") return v.is_array();
  if (type == "string") return v.is_string();
  if (type == "boolean") return v.is_boolean();
  if (type == "integer") {
    // Integers must also fit a signed 64-bit value.
    if (v.is_number_unsigned()) return v.get<std::uint64_t>() <= 9223372036854775807ULL;
    if (v.is_number_integer()) return true;
    if (!v.is_number_float()) return false;
    double d = v.get<double>();
    return std::isfinite(d) && std::trunc(d) == d && std::fabs(d) < 9.2e18;
  }
  if (type == "number") return v.is_number();
  return false;
}

inline bool schema_valid(const json& v, const json& s) {
  if (s.contains("type") && !schema_type_ok(v, s["type"].get<std::string>())) return false;
  if (s.contains("enum")) {
    bool hit = false;
    for (const auto& e : s["enum"]) hit = hit || e == v;
    if (!hit) return false;
  }
  if (v.is_number()) {
    double d = v.get<double>();
    if (s.contains("minimum") && d < s["minimum"].get<double>()) return false;
    if (s.contains("maximum") && d > s["maximum"].get<double>()) return false;
  }
  if (v.is_object()) {
    if (s.contains("required"))
      for (const auto& r : s["required"])
        if (!v.contains(r.get<std::string>())) return false;
    const json props = s.value("properties", json::object());
    for (auto it = v.begin(); it != v.end(); ++it) {
      if (props.contains(it.key())) {
        if (!schema_valid(it.value(), props[it.key()])) return false;
      } else if (s.contains("additionalProperties") && s["additionalProperties"] == false) {
        return false;
      }
    }
  }
  if (v.is_array() && s.contains("items"))
    for (const auto& item : v)
      if (!schema_valid(item, s["items"])) return false;
  return true;
}

inline bool response_document_valid(const json& doc) { return schema_valid(doc, response_schema()); }

// ---------------------------------------------------------------------------
// Wilcoxon signed-rank: enumerate all 2^m sign assignments.

struct BruteWilcoxon {
  double w_plus = 0.0;
  double w_minus = 0.0;
  double p_one = 1.0;
  double p_two = 1.0;
};

inline BruteWilcoxon brute_wilcoxon(const std::vector<double>& diffs) {
  std::vector<double> d;
  for (double x : diffs)
    if (x != 0.0) d.push_back(x);
  const std::size_t m = d.size();
  std::vector<double> rank(m);
  for (std::size_t i = 0; i < m; ++i) {
    double below = 0, equal = 0;
    for (std::size_t j = 0; j < m; ++j) {
      if (std::fabs(d[j]) < std::fabs(d[i])) below += 1;
      if (std::fabs(d[j]) == std::fabs(d[i])) equal += 1;
    }
    rank[i] = below + (equal + 1.0) / 2.0;
  }
  BruteWilcoxon out;
  for (std::size_t i = 0; i < m; ++i) (d[i] > 0 ? out.w_plus : out.w_minus) += rank[i];
  const double observed = std::min(out.w_plus, out.w_minus);
  std::uint64_t hits = 0;
  const std::uint64_t total = std::uint64_t{1} << m;
  for (std::uint64_t mask = 0; mask < total; ++mask) {
    double s = 0;
    for (std::size_t i = 0; i < m; ++i)
      if (mask >> i & 1U) s += rank[i];
    if (s <= observed + 1e-9) ++hits;
  }
  out.p_one = static_cast<double>(hits) / static_cast<double>(total);
  out.p_two = std::min(1.0, 2.0 * out.p_one);
  return out;
}

// ---------------------------------------------------------------------------
// Relocation for all-distinct lines: present in both files at different
// positions. Returns (old_index, new_index) pairs.

inline std::set<std::pair<std::size_t, std::size_t>> brute_relocations(
    const std::vector<std::string>& old_lines, const std::vector<std::string>& new_lines) {
  std::set<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < old_lines.size(); ++i)
    for (std::size_t j = 0; j < new_lines.size(); ++j)
      if (old_lines[i] == new_lines[j] && i != j) out.emplace(i, j);
  return out;
}

// ---------------------------------------------------------------------------
// Success percentage to one decimal, rounded half up from the remainder.

inline std::string percent_one_decimal(std::size_t successes, std::size_t total) {
  if (total == 0) return "0.0";
  std::uint64_t tenths = 1000ULL * successes / total;
  std::uint64_t rest = 1000ULL * successes % total;
  if (2 * rest >= total) ++tenths;
  return std::to_string(tenths / 10) + "." + std::to_string(tenths % 10);
}

}  // namespace oracles
