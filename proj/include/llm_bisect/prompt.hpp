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

#include <cstddef>
#include <deque>
#include <string>
#include <string_view>
#include <vector>

#include "llm_bisect/annotate.hpp"
#include "llm_bisect/error.hpp"
#include "llm_bisect/response.hpp"
#include "llm_bisect/sample.hpp"
#include "llm_bisect/util.hpp"

namespace llm_bisect {

/// Bumped whenever the assembled text changes; prompt snapshots key on it.
inline constexpr int kPromptFormatVersion = 1;
inline constexpr std::size_t kDefaultPromptBudget = 24000;

struct Exemplar {
  std::string diff_text;
  CotResponse response;
  std::string category;

  /// Characters this exemplar contributes to the budget.
  std::size_t budget_size() const { return diff_text.size() + serialize(response).size(); }
};

struct PromptOptions {
  std::size_t char_budget = kDefaultPromptBudget;
  std::vector<std::string> binary_paths;
};

struct PromptTemplate {
  std::string target_behaviour;
  std::string question_block;
  std::vector<Exemplar> exemplars;  // oldest first, after eviction
  std::string diff_text;
  std::size_t evicted = 0;
  std::string text;

  std::string hash() const { return sha256_hex(text); }
};

inline constexpr std::string_view kPreamble =
    "You are reviewing one step of a git bisect session. The diff below shows\n"
    "the changes between the revision under test and its immediate predecessor\n"
    "in the bisect traversal. Each line carries a marker:\n"
    "  \"+ \" the line was added in this revision\n"
    "  \"- \" the line was deleted in this revision\n"
    "  \"~ \" the line was relocated: its text is unchanged (ignoring whitespace)\n"
    "         but its position in the file moved\n"
    "  \"  \" the line is unchanged\n"
    "Decide whether this revision still exhibits the target behaviour (good)\n"
    "or has lost or broken it (bad). Work through the questions in order before\n"
    "giving the final mark.\n";

// Authored from the response field descriptions; one question per field.
inline constexpr std::string_view kQuestionBlock =
    "1. Restate the behaviour being tracked in one sentence.\n"
    "2. Would this revision fail to compile or fail to start? If so, the\n"
    "   revision cannot be judged and should be flagged as such.\n"
    "3. Does the diff introduce, delete or modify the target behaviour, or\n"
    "   have no effect on it?\n"
    "4. How confident are you in that classification, from 0 to 100?\n"
    "5. List each semantic edit hypothesis: an identifier, the kind of edit,\n"
    "   whether it changes semantics, the behaviour after the edit, how likely\n"
    "   it is to matter, what it depends on and the code that precedes it.\n"
    "6. What minimal change would have prevented a failing behaviour?\n"
    "7. Reason step by step from the edits to a conclusion.\n"
    "8. Reflect briefly on the limits of this judgement.\n"
    "9. Give the final mark: good or bad.\n";

inline constexpr std::string_view kResponseSkeleton =
    "{\n"
    "  \"target_behaviour\": \"<string>\",\n"
    "  \"has_compile_error\": <bool>,\n"
    "  \"behaviour_change\": \"intro | del | mod | no-effect\",\n"
    "  \"behaviour_confidence\": <integer 0-100>,\n"
    "  \"sem_edits\": [\n"
    "    {\n"
    "      \"id\": \"<string>\",\n"
    "      \"kind\": \"<string>\",\n"
    "      \"semantic\": <bool>,\n"
    "      \"behaviour\": \"<string>\",\n"
    "      \"likelihood\": <integer>,\n"
    "      \"dependency\": \"<string>\",\n"
    "      \"precedent\": \"<string>\"\n"
    "    }\n"
    "  ],\n"
    "  \"counterfactual_fix\": \"<string>\",\n"
    "  \"reasoning_chain\": [\"<step 1>\", \"<step 2>\", \"<step 3>\"],\n"
    "  \"reflection\": \"<string>\",\n"
    "  \"bisect_mark\": \"good | bad\"\n"
    "}\n";

inline constexpr std::string_view kNoChanges = "(no changes)\n";

/// Assembles the prompt: preamble, target, questions, response format,
/// exemplars (oldest first), diff, closing instruction. Oldest exemplars are
/// evicted until diff plus exemplars fit the character budget.
inline PromptTemplate build_prompt(std::string_view target, std::string_view diff_text,
                                   std::vector<Exemplar> exemplars,
                                   const PromptOptions& options = {}) {
  if (target.empty()) fail(ErrorClass::Usage, "target behaviour must not be empty");
  for (const auto& ex : exemplars) validate(ex.response);

  std::deque<Exemplar> kept(std::make_move_iterator(exemplars.begin()),
                            std::make_move_iterator(exemplars.end()));
  std::size_t total = diff_text.size();
  for (const auto& ex : kept) total += ex.budget_size();
  PromptTemplate p;
  while (total > options.char_budget && !kept.empty()) {
    total -= kept.front().budget_size();
    kept.pop_front();
    ++p.evicted;
  }
  if (total > options.char_budget) {
    fail(ErrorClass::BudgetExceeded, "diff of " + std::to_string(diff_text.size()) +
                                         " characters exceeds the prompt budget of " +
                                         std::to_string(options.char_budget));
  }

  p.target_behaviour = std::string(target);
  p.question_block = std::string(kQuestionBlock);
  p.exemplars.assign(std::make_move_iterator(kept.begin()), std::make_move_iterator(kept.end()));
  p.diff_text = std::string(diff_text);

  std::string& t = p.text;
  t += "prompt-format: " + std::to_string(kPromptFormatVersion) + "\n\n";
  t += kPreamble;
  t += "\n## Target behaviour\n";
  t += target;
  t += "\n\n## Questions\n";
  t += kQuestionBlock;
  t += "\n## Response format\nAnswer with one JSON object of exactly this shape:\n";
  t += kResponseSkeleton;
  if (!p.exemplars.empty()) {
    t += "\n## Worked examples\n";
    for (std::size_t i = 0; i < p.exemplars.size(); ++i) {
      const auto& ex = p.exemplars[i];
      t += "\n### Example " + std::to_string(i + 1) + "\nDiff:\n";
      t += ex.diff_text.empty() ? std::string(kNoChanges) : ex.diff_text;
      t += "Response:\n";
      t += serialize(ex.response);
      t += '\n';
    }
  }
  t += "\n## Diff under review\n";
  t += diff_text.empty() ? std::string_view(kNoChanges) : diff_text;
  if (!options.binary_paths.empty()) {
    t += "Binary files changed (content omitted):";
    for (const auto& b : options.binary_paths) t += " " + b;
    t += '\n';
  }
  t += "\nRespond with the JSON object only, with no text before or after it.\n";
  return p;
}

inline PromptTemplate build_prompt(std::string_view target, const AnnotatedDiff& diff,
                                   std::vector<Exemplar> exemplars, PromptOptions options = {}) {
  if (options.binary_paths.empty()) options.binary_paths = diff.binary_paths;
  return build_prompt(target, render(diff), std::move(exemplars), options);
}

/// Usable as a few-shot exemplar: reviewed by a human and schema-valid.
inline bool validate_exemplar(const LabeledSample& sample) {
  if (sample.review_state != ReviewState::Accepted &&
      sample.review_state != ReviewState::Corrected) {
    return false;
  }
  if (sample.review_state == ReviewState::Corrected && !sample.corrected_response) return false;
  const CotResponse* r = sample.effective_response();
  if (r == nullptr) return false;
  try {
    parse_response(serialize(*r));
    return true;
  } catch (const Error&) {
    return false;
  }
}

inline Exemplar to_exemplar(const LabeledSample& sample) {
  return {sample.diff_text, *sample.effective_response(), sample.category};
}

}  // namespace llm_bisect
