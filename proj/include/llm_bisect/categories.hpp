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

#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace llm_bisect {

/// Feature categories used to tag bisect targets, exemplars and evaluation
/// rows. Order is the reporting order.
struct Category {
  std::string_view id;
  std::string_view display_name;
  std::array<std::string_view, 4> sample_targets;
};

inline constexpr std::array<Category, 9> kCategories = {{
    {"display-output",
     "Display / Output Introduction",
     {"Change welcome banner text", "Add ASCII logo above intro",
      "Adjust line spacing in header", "Remove trailing newline in greeting"}},
    {"input-handling",
     "Input Handling Introduction",
     {"Trim whitespace from name field", "Reject empty-string input",
      "Permit multi-word names", "Add \"Enter your name:\" prompt"}},
    {"state-transition",
     "State-Transition Logic",
     {"Split INIT -> READY transition", "Merge READY and PAUSED states",
      "Change timeout from 5 s to 10 s", "Introduce intermediate LOADING state"}},
    {"decision-rules",
     "Decision-Making Rules",
     {"Update priority rule from A -> B", "Add fallback when X fails",
      "Swap rule order in decide()", "Enforce strict type check in decision"}},
    {"structural-refactor",
     "Structural Refactor",
     {"Extract helper into utils.py", "Rename main.py -> app.py",
      "Move constants to config/", "Inline small module into caller"}},
    {"robustness-error-handling",
     "Robustness / Error Handling",
     {"Add try/except around I/O", "Raise ValueError on bad input",
      "Log stack trace on failure", "Introduce retry loop for network errors"}},
    {"flow-control",
     "Flow-Control / Session Loop",
     {"Change while True -> for i in range(5)", "Add break on \"quit\" command",
      "Refactor loop into run_session()", "Insert sleep(0.1) between iterations"}},
    {"runtime-launch-safeguard",
     "Runtime-Launch Safeguard",
     {"Detect duplicate instances", "Lock PID file on start", "Abort if config missing",
      "Validate environment variables pre-launch"}},
    {"documentation-cosmetic",
     "Documentation / Cosmetic",
     {"Update docstring for greet()", "Fix typo in README", "Add example usage to docs",
      "Reformat Markdown headers"}},
}};

inline constexpr std::optional<Category> find_category(std::string_view id) {
  for (const auto& c : kCategories)
    if (c.id == id) return c;
  return std::nullopt;
}

/// Position in reporting order; unknown ids sort after every known one.
inline constexpr std::size_t category_rank(std::string_view id) {
  for (std::size_t i = 0; i < kCategories.size(); ++i)
    if (kCategories[i].id == id) return i;
  return kCategories.size();
}

}  // namespace llm_bisect
