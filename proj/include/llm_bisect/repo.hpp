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
#include <compare>
#include <cstddef>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "llm_bisect/error.hpp"
#include "llm_bisect/process.hpp"
#include "llm_bisect/util.hpp"

namespace llm_bisect {

/// Hex object name of a commit. Abbreviations are accepted as long as they
/// carry at least seven digits.
class CommitId {
 public:
  CommitId() = default;
  explicit CommitId(std::string value) : value_(std::move(value)) {
    if (value_.size() < 7 ||
        !std::all_of(value_.begin(), value_.end(), [](char c) {
          return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
        })) {
      fail(ErrorClass::Internal, "invalid commit id '" + value_ + "'");
    }
  }

  const std::string& str() const noexcept { return value_; }
  std::string abbrev(std::size_t n = 12) const { return value_.substr(0, n); }

  friend auto operator<=>(const CommitId&, const CommitId&) = default;

 private:
  std::string value_;
};

/// Totally ordered commits, oldest first, with the user-asserted good and
/// bad endpoints.
class CommitSequence {
 public:
  CommitSequence(std::vector<CommitId> commits, std::size_t known_good,
                 std::size_t known_bad)
      : commits_(std::move(commits)), known_good_(known_good), known_bad_(known_bad) {
    if (commits_.empty()) fail(ErrorClass::EmptyRange, "empty commit sequence");
    if (known_good_ >= known_bad_ || known_bad_ >= commits_.size()) {
      fail(ErrorClass::IndexOutOfRange, "endpoints must satisfy good < bad < size");
    }
    std::set<CommitId> seen(commits_.begin(), commits_.end());
    if (seen.size() != commits_.size()) {
      fail(ErrorClass::Internal, "commit sequence contains duplicates");
    }
  }

  /// Synthetic sequence of `size` commits for simulation and tests.
  static CommitSequence synthetic(std::size_t size) {
    std::vector<CommitId> ids;
    ids.reserve(size);
    for (std::size_t i = 0; i < size; ++i) {
      ids.emplace_back(sha256_hex("synthetic-commit-" + std::to_string(i)).substr(0, 40));
    }
    return CommitSequence(std::move(ids), 0, size - 1);
  }

  const std::vector<CommitId>& commits() const noexcept { return commits_; }
  std::size_t known_good() const noexcept { return known_good_; }
  std::size_t known_bad() const noexcept { return known_bad_; }
  std::size_t size() const noexcept { return commits_.size(); }
  const CommitId& operator[](std::size_t i) const { return commits_.at(i); }

  friend bool operator==(const CommitSequence&, const CommitSequence&) = default;

 private:
  std::vector<CommitId> commits_;
  std::size_t known_good_;
  std::size_t known_bad_;
};

struct FileDiff {
  std::string path;
  std::vector<std::string> old_lines;
  std::vector<std::string> new_lines;

  friend bool operator==(const FileDiff&, const FileDiff&) = default;
};

/// Text-file changes between two trees. Binary files are listed by path only.
struct RawDiff {
  std::vector<FileDiff> files;
  std::vector<std::string> binary_paths;

  bool empty() const noexcept { return files.empty(); }
  friend bool operator==(const RawDiff&, const RawDiff&) = default;
};

/// Read-only view of a git repository through the `git` executable. Blobs are
/// read straight from the object store, so the user's worktree is never
/// touched and concurrent callers need no checkout isolation.
class Repository {
 public:
  static Repository open(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::is_directory(path, ec)) {
      fail(ErrorClass::RepoNotFound, "no such directory: " + path.string());
    }
    Repository repo(path);
    auto r = repo.git({"rev-parse", "--git-dir"});
    if (!r.ok()) fail(ErrorClass::RepoNotFound, "not a git repository: " + path.string());
    return repo;
  }

  const std::filesystem::path& path() const noexcept { return path_; }

  /// Full or abbreviated ids and symbolic names. Ambiguity is an error.
  CommitId resolve(std::string_view rev) const {
    auto r = git({"rev-parse", "--verify", "--quiet", "--end-of-options",
                  std::string(rev) + "^{commit}"});
    if (!r.ok()) {
      fail(ErrorClass::RevisionNotFound, "cannot resolve revision '" + std::string(rev) + "'");
    }
    return CommitId(trim(r.out));
  }

  bool is_ancestor(const CommitId& ancestor, const CommitId& descendant) const {
    auto r = git({"merge-base", "--is-ancestor", ancestor.str(), descendant.str()});
    if (r.exit_code == 0) return true;
    if (r.exit_code == 1) return false;
    fail(ErrorClass::Internal, "git merge-base failed: " + r.err);
  }

  /// First-parent path from good to bad inclusive, oldest first.
  CommitSequence linearize(std::string_view good_rev, std::string_view bad_rev) const {
    CommitId good = resolve(good_rev);
    CommitId bad = resolve(bad_rev);
    if (good == bad) fail(ErrorClass::EmptyRange, "good and bad name the same commit");
    if (!is_ancestor(good, bad)) {
      fail(ErrorClass::NotAnAncestor, good.abbrev() + " is not an ancestor of " + bad.abbrev());
    }

    auto r = git({"rev-list", "--first-parent", bad.str(), "^" + good.str()});
    if (!r.ok()) fail(ErrorClass::Internal, "git rev-list failed: " + r.err);
    std::vector<std::string> newest_first = split_lines(r.out);
    if (newest_first.empty()) fail(ErrorClass::NotAnAncestor, "empty first-parent walk");

    // The walk stops at the first commit reachable from good; good must be
    // that commit's first parent, or good is only reachable through a merge.
    auto p = git({"rev-parse", "--verify", "--quiet", newest_first.back() + "^1"});
    if (!p.ok() || trim(p.out) != good.str()) {
      fail(ErrorClass::NotAnAncestor,
           good.abbrev() + " is not on the first-parent path of " + bad.abbrev());
    }

    std::vector<CommitId> commits;
    commits.reserve(newest_first.size() + 1);
    commits.push_back(good);
    for (auto it = newest_first.rbegin(); it != newest_first.rend(); ++it) {
      commits.emplace_back(*it);
    }
    std::size_t last = commits.size() - 1;
    return CommitSequence(std::move(commits), 0, last);
  }

  /// Changes between commits[index-1] and commits[index].
  RawDiff snapshot_diff(const CommitSequence& seq, std::size_t index) const {
    if (index == 0 || index >= seq.size()) {
      fail(ErrorClass::IndexOutOfRange,
           "snapshot index " + std::to_string(index) + " has no predecessor in range");
    }
    return diff_commits(seq[index - 1], seq[index]);
  }

  RawDiff diff_commits(const CommitId& from, const CommitId& to) const {
    std::set<std::string> binary;
    {
      auto r = git({"diff-tree", "-r", "-z", "--no-renames", "--numstat", from.str(), to.str()});
      if (!r.ok()) fail(ErrorClass::CheckoutFailure, "git diff-tree failed: " + r.err);
      for (const auto& rec : split_nul(r.out)) {
        if (rec.rfind("-\t-\t", 0) == 0) binary.insert(rec.substr(4));
      }
    }

    auto r = git({"diff-tree", "-r", "-z", "--no-renames", "--raw", from.str(), to.str()});
    if (!r.ok()) fail(ErrorClass::CheckoutFailure, "git diff-tree failed: " + r.err);
    auto fields = split_nul(r.out);

    RawDiff diff;
    // Records come in pairs: ":oldmode newmode oldsha newsha status" then path.
    for (std::size_t i = 0; i + 1 < fields.size(); i += 2) {
      const std::string& meta = fields[i];
      const std::string& path = fields[i + 1];
      auto parts = split_spaces(meta);
      if (parts.size() < 5) fail(ErrorClass::Internal, "unexpected diff-tree record: " + meta);
      const std::string& old_mode = parts[0];
      const std::string& new_mode = parts[1];
      if (old_mode == ":160000" || new_mode == "160000") continue;  // submodule
      if (binary.count(path)) {
        diff.binary_paths.push_back(path);
        continue;
      }
      std::string old_text = read_blob(parts[2]);
      std::string new_text = read_blob(parts[3]);
      if (old_text == new_text) continue;  // mode-only change
      diff.files.push_back({path, split_lines(old_text), split_lines(new_text)});
    }
    return diff;
  }

  /// Adjacent (parent, child) pairs along the first-parent history of `rev`,
  /// newest first, at most `limit` of them.
  std::vector<std::pair<CommitId, CommitId>> adjacent_pairs(std::string_view rev,
                                                            std::size_t limit) const {
    CommitId head = resolve(rev);
    auto r = git({"rev-list", "--first-parent", "--max-count=" + std::to_string(limit + 1),
                  head.str()});
    if (!r.ok()) fail(ErrorClass::Internal, "git rev-list failed: " + r.err);
    auto ids = split_lines(r.out);
    std::vector<std::pair<CommitId, CommitId>> pairs;
    for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
      pairs.emplace_back(CommitId(ids[i + 1]), CommitId(ids[i]));
    }
    return pairs;
  }

  ProcessResult git(std::vector<std::string> args) const {
    std::vector<std::string> argv{"git", "-C", path_.string()};
    argv.insert(argv.end(), std::make_move_iterator(args.begin()),
                std::make_move_iterator(args.end()));
    return run_process(argv);
  }

 private:
  explicit Repository(std::filesystem::path path) : path_(std::move(path)) {}

  std::string read_blob(const std::string& sha) const {
    if (sha.find_first_not_of('0') == std::string::npos) return {};  // absent side
    auto r = git({"cat-file", "blob", sha});
    if (!r.ok()) fail(ErrorClass::CheckoutFailure, "cannot read blob " + sha);
    return r.out;
  }

  static std::string trim(std::string s) {
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r' || s.back() == ' ')) s.pop_back();
    return s;
  }

  static std::vector<std::string> split_nul(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start < s.size()) {
      auto z = s.find('\0', start);
      if (z == std::string::npos) z = s.size();
      out.push_back(s.substr(start, z - start));
      start = z + 1;
    }
    return out;
  }

  static std::vector<std::string> split_spaces(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start < s.size()) {
      auto sp = s.find(' ', start);
      if (sp == std::string::npos) sp = s.size();
      if (sp > start) out.push_back(s.substr(start, sp - start));
      start = sp + 1;
    }
    return out;
  }

  std::filesystem::path path_;
};

inline CommitSequence linearize(const std::filesystem::path& repo_path,
                                std::string_view good_rev, std::string_view bad_rev) {
  return Repository::open(repo_path).linearize(good_rev, bad_rev);
}

}  // namespace llm_bisect
