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

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "llm_bisect/bisect.hpp"
#include "llm_bisect/error.hpp"
#include "llm_bisect/util.hpp"

namespace llm_bisect {

inline constexpr std::string_view kSessionFormat = "llm-bisect-session";
inline constexpr int kSessionFormatVersion = 1;

/// A session as persisted: the engine output plus the settings needed to
/// replay it and free-form metadata (repository, category).
struct StoredSession {
  std::string id;
  BisectSession session;
  RobustPolicy policy;
  std::map<std::string, std::string> metadata;

  friend bool operator==(const StoredSession& a, const StoredSession& b) {
    return a.id == b.id && a.session == b.session && a.policy.requery_limit == b.policy.requery_limit &&
           a.policy.confirm_boundary == b.policy.confirm_boundary && a.metadata == b.metadata;
  }
};

inline ordered_json to_json(const BisectResult& r) {
  ordered_json j{{"kind", to_string(r.kind)}};
  if (r.is_aborted()) {
    j["reason"] = r.reason;
  } else {
    j["lo"] = r.lo;
    j["hi"] = r.hi;
  }
  return j;
}

inline BisectResult bisect_result_from_json(const json& j) {
  auto kind = j.at("kind").get<std::string>();
  if (kind == "localized") return BisectResult::localized(j.at("hi").get<std::size_t>());
  if (kind == "range")
    return BisectResult::range(j.at("lo").get<std::size_t>(), j.at("hi").get<std::size_t>());
  if (kind == "aborted") return BisectResult::aborted(j.at("reason").get<std::string>());
  fail(ErrorClass::StorageFailure, "unknown result kind '" + kind + "'");
}

/// Session file: a header record, one record per step, and a closing result
/// record, one JSON document per line.
inline std::string encode_session(const StoredSession& s) {
  const auto& b = s.session;
  ordered_json commits = ordered_json::array();
  for (const auto& c : b.sequence.commits()) commits.push_back(c.str());
  ordered_json header{{"type", "header"},
                      {"format", kSessionFormat},
                      {"version", kSessionFormatVersion},
                      {"session_id", s.id},
                      {"mode", to_string(b.mode)},
                      {"target_behaviour", b.target_behaviour},
                      {"commits", std::move(commits)},
                      {"known_good", b.sequence.known_good()},
                      {"known_bad", b.sequence.known_bad()},
                      {"requery_limit", s.policy.requery_limit},
                      {"confirm_boundary", s.policy.confirm_boundary},
                      {"metadata", s.metadata}};
  std::string out = header.dump() + "\n";
  for (const auto& st : b.steps) {
    ordered_json rec{{"type", "step"},
                     {"step_number", st.step_number},
                     {"commit_index", st.commit_index},
                     {"commit", b.sequence[st.commit_index].str()},
                     {"kind", to_string(st.kind)},
                     {"elapsed", st.elapsed},
                     {"verdict", to_json(st.verdict)}};
    out += rec.dump() + "\n";
  }
  ordered_json tail{{"type", "result"}, {"result", to_json(b.result)}};
  if (!b.error_message.empty()) tail["error_message"] = b.error_message;
  out += tail.dump() + "\n";
  return out;
}

inline StoredSession decode_session(std::string_view text) {
  auto lines = split_lines(text);
  if (lines.empty()) fail(ErrorClass::StorageFailure, "empty session file");
  try {
    auto header = json::parse(lines.front());
    if (header.at("type") != "header" || header.at("format") != kSessionFormat)
      fail(ErrorClass::StorageFailure, "not a session file");
    if (header.at("version").get<int>() != kSessionFormatVersion)
      fail(ErrorClass::StorageFailure, "unsupported session format version");
    std::vector<CommitId> commits;
    for (const auto& c : header.at("commits")) commits.emplace_back(c.get<std::string>());
    StoredSession s{header.at("session_id").get<std::string>(),
                    BisectSession{CommitSequence(std::move(commits),
                                                 header.at("known_good").get<std::size_t>(),
                                                 header.at("known_bad").get<std::size_t>()),
                                  header.at("target_behaviour").get<std::string>(),
                                  {},
                                  {},
                                  bisect_mode_from_string(header.at("mode").get<std::string>()),
                                  {}},
                    RobustPolicy{header.at("requery_limit").get<int>(),
                                 header.at("confirm_boundary").get<bool>()},
                    header.at("metadata").get<std::map<std::string, std::string>>()};
    bool closed = false;
    for (std::size_t i = 1; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      if (closed) fail(ErrorClass::StorageFailure, "record after result record");
      auto rec = json::parse(lines[i]);
      auto type = rec.at("type").get<std::string>();
      if (type == "step") {
        BisectStep st{rec.at("step_number").get<std::size_t>(),
                      rec.at("commit_index").get<std::size_t>(), verdict_from_json(rec.at("verdict")),
                      rec.at("elapsed").get<double>(),
                      step_kind_from_string(rec.at("kind").get<std::string>())};
        if (st.step_number != s.session.steps.size() + 1)
          fail(ErrorClass::StorageFailure, "step numbers are not gapless");
        if (st.commit_index >= s.session.sequence.size())
          fail(ErrorClass::StorageFailure, "step commit index out of range");
        s.session.steps.push_back(std::move(st));
      } else if (type == "result") {
        s.session.result = bisect_result_from_json(rec.at("result"));
        s.session.error_message = rec.value("error_message", std::string{});
        closed = true;
      } else {
        fail(ErrorClass::StorageFailure, "unknown record type '" + type + "'");
      }
    }
    if (!closed) fail(ErrorClass::StorageFailure, "session file has no result record");
    return s;
  } catch (const json::exception& e) {
    fail(ErrorClass::StorageFailure, std::string("malformed session file: ") + e.what());
  } catch (const Error& e) {
    if (e.error_class() == ErrorClass::StorageFailure) throw;
    fail(ErrorClass::StorageFailure, std::string("invalid session file: ") + e.what());
  }
}

/// One file per session under a directory. Ids are allocated sequentially;
/// creation is exclusive so concurrent writers never share an id.
class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) fail(ErrorClass::StorageFailure, "cannot create session store " + dir_.string());
  }

  const std::filesystem::path& dir() const noexcept { return dir_; }

  std::string record(const BisectSession& session, const RobustPolicy& policy = {},
                     std::map<std::string, std::string> metadata = {}) {
    std::lock_guard lock(mu_);
    FileLock flock(dir_ / ".lock");
    std::size_t n = next_number();
    for (;; ++n) {
      char name[32];
      std::snprintf(name, sizeof name, "session-%06zu", n);
      auto path = dir_ / (std::string(name) + ".jsonl");
      int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_CLOEXEC, 0644);
      if (fd < 0) {
        if (errno == EEXIST) continue;
        fail(ErrorClass::StorageFailure, "cannot create " + path.string());
      }
      StoredSession s{name, session, policy, std::move(metadata)};
      const std::string text = encode_session(s);
      std::size_t off = 0;
      while (off < text.size()) {
        auto w = ::write(fd, text.data() + off, text.size() - off);
        if (w <= 0) {
          ::close(fd);
          fail(ErrorClass::StorageFailure, "short write " + path.string());
        }
        off += static_cast<std::size_t>(w);
      }
      ::fsync(fd);
      ::close(fd);
      return s.id;
    }
  }

  StoredSession load(const std::string& id) const {
    if (!valid_id(id)) fail(ErrorClass::StorageFailure, "no session '" + id + "'");
    auto path = dir_ / (id + ".jsonl");
    if (!std::filesystem::exists(path)) fail(ErrorClass::StorageFailure, "no session '" + id + "'");
    return decode_session(read_file(path));
  }

  bool contains(const std::string& id) const {
    return valid_id(id) && std::filesystem::exists(dir_ / (id + ".jsonl"));
  }

  std::vector<std::string> list() const {
    std::vector<std::string> ids;
    for (const auto& e : std::filesystem::directory_iterator(dir_)) {
      auto stem = e.path().stem().string();
      if (e.path().extension() == ".jsonl" && valid_id(stem)) ids.push_back(stem);
    }
    std::sort(ids.begin(), ids.end());
    return ids;
  }

  static bool valid_id(std::string_view id) {
    constexpr std::string_view prefix = "session-";
    if (id.size() <= prefix.size() || id.substr(0, prefix.size()) != prefix) return false;
    return std::all_of(id.begin() + prefix.size(), id.end(),
                       [](char c) { return c >= '0' && c <= '9'; });
  }

 private:
  std::size_t next_number() const {
    std::size_t n = 0;
    for (const auto& id : list()) n = std::max<std::size_t>(n, std::stoull(id.substr(8)));
    return n + 1;
  }

  std::filesystem::path dir_;
  std::mutex mu_;
};

/// Serves the verdicts recorded in a session, in order. Fails if the engine
/// asks about a different commit than the one recorded.
class ReplayOracle {
 public:
  explicit ReplayOracle(const BisectSession& s) : steps_(s.steps) {}

  Verdict operator()(std::size_t index) {
    if (next_ >= steps_.size()) fail(ErrorClass::ScriptExhausted, "replay ran past recorded steps");
    const auto& st = steps_[next_++];
    if (st.commit_index != index) {
      fail(ErrorClass::Internal, "replay diverged: expected commit " +
                                     std::to_string(st.commit_index) + ", engine asked for " +
                                     std::to_string(index));
    }
    return st.verdict;
  }

  std::size_t consumed() const noexcept { return next_; }

 private:
  std::vector<BisectStep> steps_;
  std::size_t next_ = 0;
};

/// Re-runs the engine against the recorded verdicts.
inline BisectSession replay(const StoredSession& s) {
  ReplayOracle oracle(s.session);
  return run_bisect(s.session.mode, s.session.sequence, oracle, s.session.target_behaviour,
                    s.policy);
}

}  // namespace llm_bisect
