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

#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "llm_bisect.hpp"

#ifndef LLM_BISECT_SOURCE_DIR
#error "LLM_BISECT_SOURCE_DIR must be defined"
#endif

namespace test_support {

namespace fs = std::filesystem;
using namespace llm_bisect;

inline fs::path source_dir() { return fs::path(LLM_BISECT_SOURCE_DIR); }
inline fs::path fixture(const std::string& rel) { return source_dir() / "fixtures" / rel; }

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    auto base = fs::temp_directory_path() /
                ("llm-bisect-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(base);
    fs::create_directories(base);
    path_ = base;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const noexcept { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

inline ProcessResult must_run(const std::vector<std::string>& argv) {
  auto r = run_process(argv);
  if (!r.ok()) {
    std::string cmd;
    for (const auto& a : argv) cmd += a + " ";
    throw std::runtime_error("command failed: " + cmd + "\n" + r.err);
  }
  return r;
}

/// Commit ids of the bundled eight-commit greeter repository.
inline constexpr const char* kFixtureCommits[8] = {
    "b85d3337f6cc106d358a35db269721d849d72fe9", "782aac7df9f9af262beabad4842fb77bc2ffedd6",
    "50737aea9c980e8a496de6f63d86bbfbd4a853c9", "9c9e846057541b92707f7a313c50f9a18ce2387b",
    "600e1ad19e392b2d410d6e88b3ec2f08a93a2231", "45986c4ec43c4ef33c4a59e23c426a10029bb4d7",
    "c8dabc7cb9cf4f688443a864c2407895422ad89f", "a9a7bd9271e947a9cf93280bce061bc943f46ba0"};
inline constexpr const char* kFixtureTarget = "Prints the welcome banner on start";

inline fs::path make_fixture_repo(const fs::path& dir) {
  must_run({"sh", (source_dir() / "tools" / "make-fixture-repo.sh").string(), dir.string()});
  return dir;
}

/// Builds small repositories with fixed identities and dates.
class GitBuilder {
 public:
  explicit GitBuilder(fs::path dir) : dir_(std::move(dir)) {
    fs::create_directories(dir_);
    git({"init", "-q", "."});
    git({"symbolic-ref", "HEAD", "refs/heads/main"});
  }

  const fs::path& path() const noexcept { return dir_; }

  void write(const std::string& rel, const std::string& content) {
    fs::create_directories((dir_ / rel).parent_path());
    atomic_write_file(dir_ / rel, content);
  }
  void remove(const std::string& rel) { fs::remove(dir_ / rel); }

  std::string commit(const std::string& message) {
    git({"add", "-A"});
    git({"commit", "-q", "--allow-empty", "-m", message});
    return head();
  }

  std::string head() {
    auto out = git({"rev-parse", "HEAD"}).out;
    while (!out.empty() && out.back() == '\n') out.pop_back();
    return out;
  }

  ProcessResult git(std::vector<std::string> args) {
    ++tick_;
    std::string date = "2024-02-01T00:00:" + std::string(tick_ < 10 ? "0" : "") +
                       std::to_string(tick_ % 60) + "Z";
    std::vector<std::string> argv{"env",
                                  "GIT_AUTHOR_NAME=Test",
                                  "GIT_AUTHOR_EMAIL=test@example.invalid",
                                  "GIT_COMMITTER_NAME=Test",
                                  "GIT_COMMITTER_EMAIL=test@example.invalid",
                                  "GIT_AUTHOR_DATE=" + date,
                                  "GIT_COMMITTER_DATE=" + date,
                                  "GIT_CONFIG_NOSYSTEM=1",
                                  "git",
                                  "-C",
                                  dir_.string(),
                                  "-c",
                                  "commit.gpgsign=false"};
    argv.insert(argv.end(), args.begin(), args.end());
    return must_run(argv);
  }

 private:
  fs::path dir_;
  int tick_ = 0;
};

inline CotResponse make_response(const std::string& mark, std::int64_t confidence = 90,
                                 const std::string& target = kFixtureTarget) {
  CotResponse r;
  r.target_behaviour = target;
  r.has_compile_error = false;
  r.behaviour_change = mark == "bad" ? "del" : "no-effect";
  r.behaviour_confidence = confidence;
  r.sem_edits.push_back({"e1", "refactor", mark == "bad", "banner print", 70, "main", "none"});
  r.counterfactual_fix = mark == "bad" ? "restore the banner" : "none needed";
  r.reasoning_chain = {"read the diff", "check the banner"};
  r.reflection = "fixture response";
  r.bisect_mark = mark;
  return r;
}

inline std::string response_text(const std::string& mark, std::int64_t confidence = 90) {
  return serialize(make_response(mark, confidence));
}

inline Verdict verdict_of(Mark m, double confidence = 0.9) {
  if (m == Mark::Good) return Verdict::good(confidence);
  if (m == Mark::Bad) return Verdict::bad(confidence);
  return Verdict::skip(VerdictReason::Tie);
}

/// Monotone predicate: every index at or past `fault` is bad.
struct MonotoneOracle {
  std::size_t fault;
  std::vector<std::size_t>* calls = nullptr;
  Verdict operator()(std::size_t i) {
    if (calls) calls->push_back(i);
    return i >= fault ? Verdict::bad(0.95) : Verdict::good(0.95);
  }
};

/// Replays a fixed list of verdicts per commit, in query order.
struct ScriptedOracle {
  std::map<std::size_t, std::vector<Mark>> script;
  std::map<std::size_t, std::size_t> used;
  std::vector<std::size_t> calls;
  Verdict operator()(std::size_t i) {
    calls.push_back(i);
    auto& seq = script.at(i);
    auto k = used[i]++;
    return verdict_of(seq.at(std::min(k, seq.size() - 1)));
  }
};

}  // namespace test_support
