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

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <concepts>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "llm_bisect/error.hpp"
#include "llm_bisect/oracle.hpp"
#include "llm_bisect/repo.hpp"

namespace llm_bisect {

/// Anything that judges the commit at a sequence index.
template <typename F>
concept CommitOracle = requires(F f, std::size_t i) {
  { f(i) } -> std::convertible_to<Verdict>;
};

enum class BisectMode { Classic, Robust };
enum class StepKind { Probe, Requery };

inline std::string_view to_string(BisectMode m) {
  return m == BisectMode::Classic ? "classic" : "robust";
}
inline std::string_view to_string(StepKind k) { return k == StepKind::Probe ? "probe" : "requery"; }

inline BisectMode bisect_mode_from_string(std::string_view s) {
  if (s == "classic") return BisectMode::Classic;
  if (s == "robust") return BisectMode::Robust;
  fail(ErrorClass::Usage, "mode must be classic or robust, got '" + std::string(s) + "'");
}

inline StepKind step_kind_from_string(std::string_view s) {
  if (s == "probe") return StepKind::Probe;
  if (s == "requery") return StepKind::Requery;
  fail(ErrorClass::StorageFailure, "unknown step kind '" + std::string(s) + "'");
}

struct BisectStep {
  std::size_t step_number = 0;
  std::size_t commit_index = 0;
  Verdict verdict;
  double elapsed = 0.0;
  StepKind kind = StepKind::Probe;

  friend bool operator==(const BisectStep&, const BisectStep&) = default;
};

struct BisectResult {
  enum class Kind { Localized, Range, Aborted };
  Kind kind = Kind::Aborted;
  std::size_t lo = 0;  // Localized: the first-bad index (lo == hi)
  std::size_t hi = 0;
  std::string reason;  // Aborted only

  static BisectResult localized(std::size_t i) { return {Kind::Localized, i, i, {}}; }
  static BisectResult range(std::size_t lo, std::size_t hi) { return {Kind::Range, lo, hi, {}}; }
  static BisectResult aborted(std::string why) { return {Kind::Aborted, 0, 0, std::move(why)}; }

  bool is_localized() const noexcept { return kind == Kind::Localized; }
  bool is_range() const noexcept { return kind == Kind::Range; }
  bool is_aborted() const noexcept { return kind == Kind::Aborted; }

  friend bool operator==(const BisectResult&, const BisectResult&) = default;
};

inline std::string_view to_string(BisectResult::Kind k) {
  switch (k) {
    case BisectResult::Kind::Localized: return "localized";
    case BisectResult::Kind::Range: return "range";
    case BisectResult::Kind::Aborted: return "aborted";
  }
  return "aborted";
}

struct BisectSession {
  CommitSequence sequence;
  std::string target_behaviour;
  std::vector<BisectStep> steps;
  BisectResult result;
  BisectMode mode = BisectMode::Classic;
  std::string error_message;  // set when an oracle error aborted the session

  std::size_t probe_count() const {
    return static_cast<std::size_t>(std::count_if(
        steps.begin(), steps.end(), [](const BisectStep& s) { return s.kind == StepKind::Probe; }));
  }
  std::size_t requery_count() const { return steps.size() - probe_count(); }
  double wall_time() const {
    double t = 0.0;
    for (const auto& s : steps) t += s.elapsed;
    return t;
  }

  friend bool operator==(const BisectSession&, const BisectSession&) = default;
};

struct RobustPolicy {
  int requery_limit = 2;
  bool confirm_boundary = true;
};

namespace detail {

/// Errors that abort a session as an oracle failure rather than propagate.
inline bool is_oracle_error(ErrorClass c) {
  switch (c) {
    case ErrorClass::Timeout:
    case ErrorClass::TransportError:
    case ErrorClass::MalformedResponse:
    case ErrorClass::ScriptExhausted:
    case ErrorClass::BackendFailure:
    case ErrorClass::OracleFailure:
      return true;
    default:
      return false;
  }
}

template <CommitOracle O>
class StepRecorder {
 public:
  StepRecorder(BisectSession& session, O& oracle) : session_(session), oracle_(oracle) {}

  /// Returns nullopt when the oracle failed; the session is then aborted.
  std::optional<Verdict> query(std::size_t index, StepKind kind) {
    auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = oracle_(index);
    } catch (const Error& e) {
      if (!is_oracle_error(e.error_class())) throw;
      session_.error_message = e.what();
      session_.result = BisectResult::aborted("oracle-failure");
      return std::nullopt;
    }
    double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    session_.steps.push_back({session_.steps.size() + 1, index, v, elapsed, kind});
    if (v.mark == Mark::Skip && v.reason == VerdictReason::BackendFailure) {
      session_.result = BisectResult::aborted("oracle-failure");
      return std::nullopt;
    }
    return v;
  }

 private:
  BisectSession& session_;
  O& oracle_;
};

}  // namespace detail

/// Binary search assuming a monotone oracle. Endpoints are trusted and never
/// queried; the lower midpoint is probed on even intervals.
template <CommitOracle O>
BisectSession run_classic(const CommitSequence& seq, O&& oracle, std::string target) {
  BisectSession session{seq, std::move(target), {}, {}, BisectMode::Classic, {}};
  detail::StepRecorder<std::remove_reference_t<O>> rec(session, oracle);
  std::size_t lo = seq.known_good();
  std::size_t hi = seq.known_bad();
  while (hi - lo > 1) {
    const std::size_t mid = lo + (hi - lo) / 2;
    auto v = rec.query(mid, StepKind::Probe);
    if (!v) return session;
    if (v->mark == Mark::Skip) {
      session.result = BisectResult::aborted("skip-in-classic");
      return session;
    }
    (v->mark == Mark::Good ? lo : hi) = mid;
  }
  session.result = BisectResult::localized(hi);
  return session;
}

/// Binary search that tolerates Skip verdicts and non-monotone noise.
///
/// Each commit's verdict is the majority of all its Good/Bad samples. The
/// bracket is (highest commit judged good, lowest commit judged bad); it is
/// recomputed after every query, so a commit whose majority dissolves into a
/// tie reopens the bracket around it.
///
///  - Skipped commits are set aside; the untested commit nearest the
///    midpoint is probed instead (lower index on ties).
///  - A commit that has drawn both Good and Bad samples is contradicted. It
///    is re-queried up to `requery_limit` times, stopping early once further
///    samples could not change its majority.
///  - Before a point answer, both boundary commits are re-queried once. A
///    confirmation does not consume the re-query budget.
///  - If only contradicted-and-tied or skipped commits remain between the
///    bracket ends, the answer is the flaky range (lo + 1, hi); if every
///    commit in there was skipped, the session aborts.
///
/// The bracket invariant means the recorded majorities always admit a
/// single change point.
template <CommitOracle O>
BisectSession run_robust(const CommitSequence& seq, O&& oracle, std::string target,
                         RobustPolicy policy = {}) {
  BisectSession session{seq, std::move(target), {}, {}, BisectMode::Robust, {}};
  detail::StepRecorder<std::remove_reference_t<O>> rec(session, oracle);
  const std::size_t kg = seq.known_good();
  const std::size_t kb = seq.known_bad();

  struct Tally {
    int good = 0, bad = 0, skip = 0, requeries = 0;
    bool confirmed = false;
    int queries() const { return good + bad + skip; }
    std::optional<Mark> majority() const {
      if (good > bad) return Mark::Good;
      if (bad > good) return Mark::Bad;
      return std::nullopt;
    }
  };
  std::vector<Tally> t(seq.size());
  auto majority = [&](std::size_t i) -> std::optional<Mark> {
    if (i == kg) return Mark::Good;
    if (i == kb) return Mark::Bad;
    return t[i].majority();
  };
  auto needs_requery = [&](const Tally& x) {
    if (x.good == 0 || x.bad == 0 || x.requeries >= policy.requery_limit) return false;
    return std::abs(x.good - x.bad) <= policy.requery_limit - x.requeries;
  };
  auto ask = [&](std::size_t i, StepKind kind, bool budgeted) -> bool {
    auto v = rec.query(i, kind);
    if (!v) return false;
    if (budgeted) ++t[i].requeries;
    switch (v->mark) {
      case Mark::Good: ++t[i].good; break;
      case Mark::Bad: ++t[i].bad; break;
      case Mark::Skip: ++t[i].skip; break;
    }
    return true;
  };

  for (;;) {
    std::optional<std::size_t> contradicted;
    for (std::size_t i = kg + 1; i < kb; ++i) {
      if (needs_requery(t[i]) && (!contradicted || t[i].requeries < t[*contradicted].requeries))
        contradicted = i;
    }
    if (contradicted) {
      if (!ask(*contradicted, StepKind::Requery, true)) return session;
      continue;
    }

    std::size_t lo = kg, hi = kb;
    for (std::size_t i = kg; i <= kb; ++i) {
      auto m = majority(i);
      if (m == Mark::Good) lo = i;
      if (m == Mark::Bad && i < hi) hi = i;
    }
    if (lo > hi) {
      // Unreachable while the bracket invariant holds; never report a point.
      session.result = BisectResult::aborted("inconsistent-verdicts");
      return session;
    }

    if (hi - lo > 1) {
      const std::size_t mid = lo + (hi - lo) / 2;
      std::optional<std::size_t> next;
      for (std::size_t d = 0; d <= hi - lo && !next; ++d) {
        if (mid >= d && mid - d > lo && t[mid - d].queries() == 0) next = mid - d;
        else if (mid + d < hi && t[mid + d].queries() == 0) next = mid + d;
      }
      if (next) {
        if (!ask(*next, StepKind::Probe, false)) return session;
        continue;
      }
      bool all_skipped = true;
      for (std::size_t i = lo + 1; i < hi; ++i)
        if (t[i].good + t[i].bad > 0) all_skipped = false;
      session.result =
          all_skipped ? BisectResult::aborted("exhausted-skips") : BisectResult::range(lo + 1, hi);
      return session;
    }

    if (policy.confirm_boundary) {
      if (hi != kb && !t[hi].confirmed) {
        t[hi].confirmed = true;
        if (!ask(hi, StepKind::Requery, false)) return session;
        continue;
      }
      if (lo != kg && !t[lo].confirmed) {
        t[lo].confirmed = true;
        if (!ask(lo, StepKind::Requery, false)) return session;
        continue;
      }
    }
    session.result = BisectResult::localized(hi);
    return session;
  }
}

template <CommitOracle O>
BisectSession run_bisect(BisectMode mode, const CommitSequence& seq, O&& oracle,
                         std::string target, RobustPolicy policy = {}) {
  if (mode == BisectMode::Classic) return run_classic(seq, std::forward<O>(oracle), std::move(target));
  return run_robust(seq, std::forward<O>(oracle), std::move(target), policy);
}

/// True when the Good/Bad verdicts, reduced per commit by majority, admit a
/// single change point between the endpoints.
inline bool verdicts_consistent(const BisectSession& s) {
  std::vector<int> score(s.sequence.size(), 0);
  for (const auto& st : s.steps) {
    if (st.verdict.mark == Mark::Good) --score[st.commit_index];
    if (st.verdict.mark == Mark::Bad) ++score[st.commit_index];
  }
  std::size_t max_good = s.sequence.known_good(), min_bad = s.sequence.known_bad();
  for (std::size_t i = 0; i < score.size(); ++i) {
    if (score[i] < 0) max_good = std::max(max_good, i);
    if (score[i] > 0) min_bad = std::min(min_bad, i);
  }
  return max_good < min_bad;
}

}  // namespace llm_bisect
