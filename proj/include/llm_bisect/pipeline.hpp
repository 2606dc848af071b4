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

#include <map>
#include <string>
#include <vector>

#include "llm_bisect/annotate.hpp"
#include "llm_bisect/bisect.hpp"
#include "llm_bisect/label.hpp"
#include "llm_bisect/oracle.hpp"
#include "llm_bisect/prompt.hpp"
#include "llm_bisect/repo.hpp"

namespace llm_bisect {

struct PipelineOptions {
  OracleConfig oracle;
  BisectMode mode = BisectMode::Robust;
  RobustPolicy policy;
  std::size_t char_budget = kDefaultPromptBudget;
  std::size_t exemplar_limit = kDefaultExemplarCapacity;
  std::string category;  // steers exemplar selection; may be empty
};

/// Judges one commit: diff against its predecessor in the sequence,
/// annotate, assemble the prompt, sample the model and vote.
class RepositoryOracle {
 public:
  RepositoryOracle(const Repository& repo, const CommitSequence& seq, std::string target,
                   CompletionBackend& backend, const PipelineOptions& options,
                   std::vector<Exemplar> exemplars = {})
      : repo_(repo),
        seq_(seq),
        target_(std::move(target)),
        backend_(backend),
        options_(options),
        exemplars_(std::move(exemplars)) {}

  Verdict operator()(std::size_t index) {
    const PromptTemplate& prompt = prompt_for(index);
    return classify(options_.oracle, backend_, prompt);
  }

  const PromptTemplate& prompt_for(std::size_t index) {
    if (auto it = prompts_.find(index); it != prompts_.end()) return it->second;
    AnnotatedDiff diff = annotate(repo_.snapshot_diff(seq_, index));
    PromptOptions po{options_.char_budget, {}};
    return prompts_.emplace(index, build_prompt(target_, diff, exemplars_, po)).first->second;
  }

 private:
  const Repository& repo_;
  const CommitSequence& seq_;
  std::string target_;
  CompletionBackend& backend_;
  const PipelineOptions& options_;
  std::vector<Exemplar> exemplars_;
  std::map<std::size_t, PromptTemplate> prompts_;
};

/// Full session over a repository range.
inline BisectSession run_repository_session(const Repository& repo, const std::string& good,
                                            const std::string& bad, const std::string& target,
                                            CompletionBackend& backend,
                                            const PipelineOptions& options,
                                            const ExemplarPool* pool = nullptr) {
  if (target.empty()) fail(ErrorClass::Usage, "target behaviour must not be empty");
  CommitSequence seq = repo.linearize(good, bad);
  std::vector<Exemplar> exemplars;
  if (pool) exemplars = pool->select(options.category, options.exemplar_limit);
  RepositoryOracle oracle(repo, seq, target, backend, options, std::move(exemplars));
  return run_bisect(options.mode, seq, oracle, target, options.policy);
}

/// Rendered annotated diffs for adjacent first-parent pairs, ready for
/// auto-labeling.
inline std::vector<LabelInput> label_inputs(const std::vector<CandidatePair>& pairs,
                                            const std::string& category) {
  std::vector<LabelInput> out;
  std::map<std::string, Repository> repos;
  for (const auto& p : pairs) {
    auto key = p.path.string();
    auto it = repos.find(key);
    if (it == repos.end()) it = repos.emplace(key, Repository::open(p.path)).first;
    AnnotatedDiff diff = annotate(it->second.diff_commits(p.parent, p.commit));
    out.push_back({render(diff), Provenance{p.repo, p.commit.str(), p.parent.str()}, category,
                   diff.binary_paths});
  }
  return out;
}

}  // namespace llm_bisect
