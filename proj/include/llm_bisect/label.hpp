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
#include <cstdint>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "llm_bisect/categories.hpp"
#include "llm_bisect/error.hpp"
#include "llm_bisect/oracle.hpp"
#include "llm_bisect/prompt.hpp"
#include "llm_bisect/repo.hpp"
#include "llm_bisect/sample.hpp"
#include "llm_bisect/util.hpp"

namespace llm_bisect {

// ---------------------------------------------------------------------------
// Sample store

struct AuditEntry {
  std::uint64_t seq = 0;
  std::string sample_id;
  std::string action;  // create | accept | correct | discard
  std::string from_state;
  std::string to_state;
  std::uint64_t version = 0;
  std::string reviewer;
};

/// Per-sample JSON records under `<dir>/samples/` plus an append-only
/// `<dir>/audit.log`. Writers serialize on a mutex and an advisory file lock;
/// records are replaced atomically so readers never see partial writes.
class SampleStore {
 public:
  explicit SampleStore(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_ / "samples", ec);
    if (ec) fail(ErrorClass::StorageFailure, "cannot create sample store " + dir_.string());
  }

  const std::filesystem::path& dir() const noexcept { return dir_; }

  void insert(const LabeledSample& s) {
    check_id(s.sample_id);
    std::lock_guard lock(mu_);
    FileLock flock(dir_ / ".lock");
    if (std::filesystem::exists(path_for(s.sample_id)))
      fail(ErrorClass::DuplicateSample, "sample '" + s.sample_id + "' already exists");
    write(s);
    audit(s.sample_id, "create", "", std::string(to_string(s.review_state)), s.version, "");
  }

  bool contains(const std::string& id) const {
    return valid_id(id) && std::filesystem::exists(path_for(id));
  }

  LabeledSample get(const std::string& id) const {
    if (!contains(id)) fail(ErrorClass::UnknownSample, "no sample '" + id + "'");
    auto doc = json::parse(read_file(path_for(id)), nullptr, false);
    if (doc.is_discarded()) fail(ErrorClass::StorageFailure, "corrupt sample record '" + id + "'");
    return sample_from_json(doc);
  }

  /// All samples ordered by id.
  std::vector<LabeledSample> all() const {
    std::vector<std::string> ids;
    for (const auto& e : std::filesystem::directory_iterator(dir_ / "samples")) {
      if (e.path().extension() == ".json") ids.push_back(e.path().stem().string());
    }
    std::sort(ids.begin(), ids.end());
    std::vector<LabeledSample> out;
    out.reserve(ids.size());
    for (const auto& id : ids) out.push_back(get(id));
    return out;
  }

  std::vector<AuditEntry> audit_log() const {
    std::vector<AuditEntry> out;
    auto path = dir_ / "audit.log";
    if (!std::filesystem::exists(path)) return out;
    for (const auto& line : split_lines(read_file(path))) {
      if (line.empty()) continue;
      auto j = json::parse(line, nullptr, false);
      if (j.is_discarded()) fail(ErrorClass::StorageFailure, "corrupt audit log line");
      out.push_back({j.at("seq").get<std::uint64_t>(), j.at("sample_id").get<std::string>(),
                     j.at("action").get<std::string>(), j.at("from").get<std::string>(),
                     j.at("to").get<std::string>(), j.at("version").get<std::uint64_t>(),
                     j.at("reviewer").get<std::string>()});
    }
    return out;
  }

  /// Compare-and-swap on the version counter. `mutate` may throw to leave the
  /// stored record untouched.
  LabeledSample update(const std::string& id, std::uint64_t expected_version,
                       const std::function<std::string(LabeledSample&)>& mutate,
                       const std::string& reviewer) {
    std::lock_guard lock(mu_);
    FileLock flock(dir_ / ".lock");
    LabeledSample s = get(id);
    if (s.version != expected_version) {
      fail(ErrorClass::StaleVersion, "sample '" + id + "' is at version " +
                                         std::to_string(s.version) + ", request carried " +
                                         std::to_string(expected_version));
    }
    const std::string from(to_string(s.review_state));
    LabeledSample next = s;
    const std::string action = mutate(next);
    next.version = s.version + 1;
    write(next);
    audit(id, action, from, std::string(to_string(next.review_state)), next.version, reviewer);
    return next;
  }

  static bool valid_id(std::string_view id) {
    return !id.empty() && id.size() <= 128 &&
           std::all_of(id.begin(), id.end(), [](char c) {
             return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-' || c == '_';
           });
  }

 private:
  static void check_id(const std::string& id) {
    if (!valid_id(id)) fail(ErrorClass::Usage, "invalid sample id '" + id + "'");
  }

  std::filesystem::path path_for(const std::string& id) const {
    return dir_ / "samples" / (id + ".json");
  }

  void write(const LabeledSample& s) { atomic_write_file(path_for(s.sample_id), to_json(s).dump(2) + "\n"); }

  void audit(const std::string& id, const std::string& action, const std::string& from,
             const std::string& to, std::uint64_t version, const std::string& reviewer) {
    auto path = dir_ / "audit.log";
    std::uint64_t seq = 1;
    if (std::filesystem::exists(path)) {
      for (const auto& line : split_lines(read_file(path)))
        if (!line.empty()) ++seq;
    }
    ordered_json j{{"seq", seq},     {"sample_id", id},  {"action", action},    {"from", from},
                   {"to", to},       {"version", version}, {"reviewer", reviewer}};
    append_line(path, j.dump());
  }

  std::filesystem::path dir_;
  mutable std::mutex mu_;
};

// ---------------------------------------------------------------------------
// Review state machine

enum class ReviewAction { Accept, Correct, Discard };

inline std::string_view to_string(ReviewAction a) {
  switch (a) {
    case ReviewAction::Accept: return "accept";
    case ReviewAction::Correct: return "correct";
    case ReviewAction::Discard: return "discard";
  }
  return "accept";
}

inline ReviewAction review_action_from_string(std::string_view s) {
  for (auto a : {ReviewAction::Accept, ReviewAction::Correct, ReviewAction::Discard})
    if (to_string(a) == s) return a;
  fail(ErrorClass::Usage, "action must be accept, correct or discard");
}

/// Target state of a review, or nullopt when the edge does not exist.
/// Only pending and auto-accepted samples are reviewable.
inline std::optional<ReviewState> review_transition(ReviewState from, ReviewAction action) {
  if (from != ReviewState::Pending && from != ReviewState::AutoAccepted) return std::nullopt;
  switch (action) {
    case ReviewAction::Accept: return ReviewState::Accepted;
    case ReviewAction::Correct: return ReviewState::Corrected;
    case ReviewAction::Discard: return ReviewState::Discarded;
  }
  return std::nullopt;
}

namespace detail {

/// `correction` is invoked only once the sample, version and transition
/// have been checked, so schema errors never mask a conflict.
inline LabeledSample review_impl(SampleStore& store, const std::string& sample_id,
                                 ReviewAction action, const std::string& reviewer,
                                 std::uint64_t expected_version,
                                 const std::function<std::optional<CotResponse>()>& correction) {
  return store.update(
      sample_id, expected_version,
      [&](LabeledSample& s) -> std::string {
        auto to = review_transition(s.review_state, action);
        if (!to) {
          fail(ErrorClass::InvalidTransition, "cannot " + std::string(to_string(action)) + " a " +
                                                  std::string(to_string(s.review_state)) +
                                                  " sample");
        }
        if (action == ReviewAction::Accept && !s.machine_response) {
          fail(ErrorClass::InvalidTransition,
               "sample has no machine response to accept; correct it instead");
        }
        if (action == ReviewAction::Correct) {
          auto r = correction();
          if (!r) throw SchemaViolation("corrected_response", "missing");
          validate(*r);
          s.corrected_response = std::move(r);
        }
        s.review_state = *to;
        s.reviewer = reviewer;
        return std::string(to_string(action));
      },
      reviewer);
}

}  // namespace detail

/// Applies a review. Checks, in order: sample exists, version matches,
/// transition exists, correction is schema-valid. Any failure leaves the
/// stored sample unchanged.
inline LabeledSample review(SampleStore& store, const std::string& sample_id, ReviewAction action,
                            const std::string& reviewer, std::uint64_t expected_version,
                            const std::optional<CotResponse>& correction = std::nullopt) {
  return detail::review_impl(store, sample_id, action, reviewer, expected_version,
                             [&] { return correction; });
}

/// As `review`, with the correction given as an unvalidated JSON document.
inline LabeledSample review_document(SampleStore& store, const std::string& sample_id,
                                     ReviewAction action, const std::string& reviewer,
                                     std::uint64_t expected_version, const json* correction) {
  return detail::review_impl(store, sample_id, action, reviewer, expected_version,
                             [&]() -> std::optional<CotResponse> {
                               if (correction == nullptr || correction->is_null()) return std::nullopt;
                               return response_from_json(*correction);
                             });
}

// ---------------------------------------------------------------------------
// Exemplar pool

inline constexpr std::size_t kDefaultExemplarCapacity = 4;

/// Human-reviewed samples kept per category with recency eviction.
class ExemplarPool {
 public:
  explicit ExemplarPool(std::size_t capacity = kDefaultExemplarCapacity) : capacity_(capacity) {}

  /// Adds a sample if it qualifies; returns false otherwise. Re-adding an id
  /// refreshes its recency.
  bool add(const LabeledSample& s) {
    if (!validate_exemplar(s) || capacity_ == 0) return false;
    auto& q = by_category_[s.category];
    std::erase_if(q, [&](const Entry& e) { return e.sample.sample_id == s.sample_id; });
    q.push_back({s, ++clock_});
    while (q.size() > capacity_) q.pop_front();
    return true;
  }

  /// Replays the store's review history so recency follows review order.
  static ExemplarPool rebuild(const SampleStore& store,
                              std::size_t capacity = kDefaultExemplarCapacity) {
    ExemplarPool pool(capacity);
    for (const auto& e : store.audit_log()) {
      if (e.action != "accept" && e.action != "correct") continue;
      if (!store.contains(e.sample_id)) continue;
      pool.add(store.get(e.sample_id));
    }
    return pool;
  }

  /// Up to `limit` exemplars, preferring the requested category and more
  /// recent reviews; returned oldest first so prompt eviction drops the
  /// least relevant ones.
  std::vector<Exemplar> select(std::string_view category, std::size_t limit) const {
    std::vector<const Entry*> same, other;
    for (const auto& [cat, q] : by_category_)
      for (const auto& e : q) (cat == category ? same : other).push_back(&e);
    auto newest_first = [](const Entry* a, const Entry* b) { return a->tick > b->tick; };
    std::sort(same.begin(), same.end(), newest_first);
    std::sort(other.begin(), other.end(), newest_first);
    std::vector<const Entry*> picked;
    for (auto* e : same)
      if (picked.size() < limit) picked.push_back(e);
    for (auto* e : other)
      if (picked.size() < limit) picked.push_back(e);
    std::reverse(picked.begin(), picked.end());
    std::vector<Exemplar> out;
    for (auto* e : picked) out.push_back(to_exemplar(e->sample));
    return out;
  }

  std::vector<LabeledSample> members(std::string_view category) const {
    std::vector<LabeledSample> out;
    if (auto it = by_category_.find(std::string(category)); it != by_category_.end())
      for (const auto& e : it->second) out.push_back(e.sample);
    return out;
  }

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& [_, q] : by_category_) n += q.size();
    return n;
  }
  std::size_t capacity() const noexcept { return capacity_; }

 private:
  struct Entry {
    LabeledSample sample;
    std::uint64_t tick;
  };
  std::size_t capacity_;
  std::uint64_t clock_ = 0;
  std::map<std::string, std::deque<Entry>, std::less<>> by_category_;
};

// ---------------------------------------------------------------------------
// Auto-labeling

struct LabelInput {
  std::string diff_text;
  Provenance provenance;
  std::string category;
  std::vector<std::string> binary_paths;
};

struct LabelOptions {
  double confidence_threshold = 0.8;
  std::size_t exemplar_limit = kDefaultExemplarCapacity;
  std::size_t char_budget = kDefaultPromptBudget;
};

inline std::string make_sample_id(std::string_view target, const LabelInput& in) {
  std::string key;
  key += target;
  key += '\n';
  key += in.provenance.repo + '\n' + in.provenance.commit + '\n' + in.provenance.parent + '\n';
  key += in.diff_text;
  return "s-" + sha256_hex(key).substr(0, 16);
}

/// One sample per input. Verdicts at or above the threshold are
/// auto-accepted; everything else, including oracle failures, is pending.
template <typename Oracle>
  requires std::invocable<Oracle&, const PromptTemplate&>
std::vector<LabeledSample> auto_label(const std::vector<LabelInput>& inputs,
                                      std::string_view target, Oracle&& oracle,
                                      const ExemplarPool& pool, const LabelOptions& options = {}) {
  std::vector<LabeledSample> out;
  out.reserve(inputs.size());
  for (const auto& in : inputs) {
    LabeledSample s;
    s.sample_id = make_sample_id(target, in);
    s.diff_text = in.diff_text;
    s.target_behaviour = std::string(target);
    s.category = in.category;
    s.provenance = in.provenance;
    s.review_state = ReviewState::Pending;
    try {
      PromptOptions po{options.char_budget, in.binary_paths};
      auto prompt =
          build_prompt(target, in.diff_text, pool.select(in.category, options.exemplar_limit), po);
      Verdict v = oracle(prompt);
      s.machine_confidence = std::clamp(v.confidence, 0.0, 1.0);
      if (!v.samples.empty()) {
        auto it = std::find_if(v.samples.begin(), v.samples.end(), [&](const CotResponse& r) {
          return v.mark == Mark::Skip || r.marks_bad() == (v.mark == Mark::Bad);
        });
        s.machine_response = it != v.samples.end() ? *it : v.samples.front();
      }
      if (v.mark != Mark::Skip && s.machine_confidence >= options.confidence_threshold) {
        s.review_state = ReviewState::AutoAccepted;
      } else {
        s.note = "verdict " + std::string(to_string(v.mark)) + " (" +
                 std::string(to_string(v.reason)) + ")";
        if (!s.machine_response) s.machine_confidence = 0.0;
      }
    } catch (const Error& e) {
      s.machine_response.reset();
      s.machine_confidence = 0.0;
      s.note = std::string("oracle failure: ") + std::string(error_class_name(e.error_class())) +
               ": " + e.what();
    }
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset export

inline constexpr int kDatasetFormatVersion = 1;

inline bool is_exportable(ReviewState s) {
  return s == ReviewState::Accepted || s == ReviewState::Corrected ||
         s == ReviewState::AutoAccepted;
}

/// Newline-delimited prompt/completion records, ordered by sample id.
/// The completion is the canonical serialization of the effective response.
inline std::string export_dataset(const SampleStore& store, std::string_view format = "jsonl") {
  if (format != "jsonl")
    fail(ErrorClass::UnsupportedFormat, "unsupported export format '" + std::string(format) + "'");
  std::string out;
  for (const auto& s : store.all()) {
    if (!is_exportable(s.review_state)) continue;
    const CotResponse* r = s.effective_response();
    if (r == nullptr) continue;
    PromptOptions po{std::numeric_limits<std::size_t>::max(), {}};
    ordered_json rec{{"format_version", kDatasetFormatVersion},
                     {"sample_id", s.sample_id},
                     {"prompt", build_prompt(s.target_behaviour, s.diff_text, {}, po).text},
                     {"completion", serialize(*r)},
                     {"category", s.category},
                     {"provenance",
                      {{"repo", s.provenance.repo},
                       {"commit", s.provenance.commit},
                       {"parent", s.provenance.parent}}},
                     {"review_state", to_string(s.review_state)}};
    out += rec.dump();
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Repository harvesting

struct RepoDescriptor {
  std::string name;
  std::filesystem::path path;  // local clone; may be empty for selection only
  std::int64_t stars = 0;
  std::string last_activity;  // YYYY-MM-DD
  std::string licence;        // SPDX id
};

struct HarvestCriteria {
  std::int64_t min_stars = 1000;
  int activity_window_days = 365;
  std::string today;  // YYYY-MM-DD; the reference date for the activity window
  std::vector<std::string> licence_allow_list{"MIT", "Apache-2.0", "BSD-2-Clause",
                                              "BSD-3-Clause", "ISC"};
  std::size_t pairs_per_repo = 50;
  std::string revision = "HEAD";
};

inline std::chrono::sys_days parse_date(std::string_view text) {
  int y = 0;
  unsigned m = 0, d = 0;
  char tail = 0;
  std::string s(text);
  if (std::sscanf(s.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3 || s.size() != 10)
    fail(ErrorClass::ConfigError, "expected a YYYY-MM-DD date, got '" + s + "'");
  std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) fail(ErrorClass::ConfigError, "invalid date '" + s + "'");
  return std::chrono::sys_days{ymd};
}

inline bool repository_eligible(const RepoDescriptor& r, const HarvestCriteria& c) {
  if (r.stars < c.min_stars) return false;
  if (std::find(c.licence_allow_list.begin(), c.licence_allow_list.end(), r.licence) ==
      c.licence_allow_list.end()) {
    return false;
  }
  auto age = parse_date(c.today) - parse_date(r.last_activity);
  return age.count() >= 0 && age.count() <= c.activity_window_days;
}

inline std::vector<RepoDescriptor> select_repositories(const std::vector<RepoDescriptor>& repos,
                                                       const HarvestCriteria& c) {
  std::vector<RepoDescriptor> out;
  for (const auto& r : repos)
    if (repository_eligible(r, c)) out.push_back(r);
  return out;
}

struct CandidatePair {
  std::string repo;
  std::filesystem::path path;
  CommitId parent;
  CommitId commit;
};

/// Adjacent first-parent commit pairs from every eligible repository.
inline std::vector<CandidatePair> harvest_candidates(const std::vector<RepoDescriptor>& repos,
                                                     const HarvestCriteria& c) {
  std::vector<CandidatePair> out;
  for (const auto& r : select_repositories(repos, c)) {
    auto repo = Repository::open(r.path);
    for (auto& [parent, commit] : repo.adjacent_pairs(c.revision, c.pairs_per_repo))
      out.push_back({r.name, r.path, parent, commit});
  }
  return out;
}

}  // namespace llm_bisect
