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

#include <doctest.h>

#include "support.hpp"

using namespace llm_bisect;
using namespace test_support;

namespace {

template <typename F>
ErrorClass error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.error_class();
  }
  return ErrorClass::Internal;
}

}  // namespace

TEST_SUITE("repository") {
  TEST_CASE("fixture repository has stable commit ids") {
    TempDir tmp;
    auto repo = Repository::open(make_fixture_repo(tmp / "repo"));
    auto seq = repo.linearize(kFixtureCommits[0], kFixtureCommits[7]);
    REQUIRE(seq.size() == 8);
    CHECK(seq.known_good() == 0);
    CHECK(seq.known_bad() == 7);
    for (std::size_t i = 0; i < 8; ++i) CHECK(seq[i].str() == kFixtureCommits[i]);
    CHECK(repo.resolve("main").str() == kFixtureCommits[7]);
    CHECK(repo.resolve("45986c4").str() == kFixtureCommits[5]);
  }

  TEST_CASE("snapshot diff shows the commit's own change") {
    TempDir tmp;
    auto repo = Repository::open(make_fixture_repo(tmp / "repo"));
    auto seq = repo.linearize(kFixtureCommits[0], kFixtureCommits[7]);
    auto raw = repo.snapshot_diff(seq, 5);
    REQUIRE(raw.files.size() == 1);
    CHECK(raw.files[0].path == "app.py");
    auto a = annotate(raw);
    bool banner_deleted = false;
    for (const auto& l : a.files[0].lines)
      if (l.tag == LineTag::Deleted && l.text == "    print(BANNER)") banner_deleted = true;
    CHECK(banner_deleted);

    auto docs = repo.snapshot_diff(seq, 1);
    REQUIRE(docs.files.size() == 1);
    CHECK(docs.files[0].path == "README.md");
    CHECK(docs.files[0].old_lines.empty());

    CHECK(error_of([&] { repo.snapshot_diff(seq, 0); }) == ErrorClass::IndexOutOfRange);
    CHECK(error_of([&] { repo.snapshot_diff(seq, 8); }) == ErrorClass::IndexOutOfRange);
  }

  TEST_CASE("revision and repository errors") {
    TempDir tmp;
    auto path = make_fixture_repo(tmp / "repo");
    auto repo = Repository::open(path);
    CHECK(error_of([&] { Repository::open(tmp / "missing"); }) == ErrorClass::RepoNotFound);
    std::filesystem::create_directories(tmp / "plain");
    CHECK(error_of([&] { Repository::open(tmp / "plain"); }) == ErrorClass::RepoNotFound);
    CHECK(error_of([&] { repo.resolve("no-such-branch"); }) == ErrorClass::RevisionNotFound);
    CHECK(error_of([&] { repo.linearize("main", "main"); }) == ErrorClass::EmptyRange);
    CHECK(error_of([&] { repo.linearize(kFixtureCommits[5], kFixtureCommits[1]); }) ==
          ErrorClass::NotAnAncestor);
  }

  TEST_CASE("linearize follows first parents and rejects merge-only ancestry") {
    TempDir tmp;
    GitBuilder b(tmp / "merge");
    b.write("f.txt", "base\n");
    auto a = b.commit("A");
    b.git({"checkout", "-q", "-b", "side"});
    b.write("side.txt", "side\n");
    auto s = b.commit("S");
    b.git({"checkout", "-q", "main"});
    b.write("f.txt", "base\nmain\n");
    auto c = b.commit("B");
    b.git({"merge", "-q", "--no-ff", "-m", "M", "side"});
    auto m = b.head();

    auto repo = Repository::open(b.path());
    auto seq = repo.linearize(a, m);
    REQUIRE(seq.size() == 3);
    CHECK(seq[0].str() == a);
    CHECK(seq[1].str() == c);
    CHECK(seq[2].str() == m);
    CHECK(error_of([&] { repo.linearize(s, m); }) == ErrorClass::NotAnAncestor);
  }

  TEST_CASE("binary files are listed by path only") {
    TempDir tmp;
    GitBuilder b(tmp / "bin");
    b.write("a.txt", "one\n");
    auto first = b.commit("first");
    b.write("logo.bin", std::string("\x89PNG\0\0\x01", 7));
    b.write("a.txt", "one\ntwo\n");
    auto second = b.commit("second");
    auto repo = Repository::open(b.path());
    auto raw = repo.diff_commits(CommitId(first), CommitId(second));
    CHECK(raw.binary_paths == std::vector<std::string>{"logo.bin"});
    REQUIRE(raw.files.size() == 1);
    CHECK(raw.files[0].new_lines == std::vector<std::string>{"one", "two"});
  }

  TEST_CASE("adjacent pairs walk first-parent history newest first") {
    TempDir tmp;
    auto repo = Repository::open(make_fixture_repo(tmp / "repo"));
    auto pairs = repo.adjacent_pairs("main", 3);
    REQUIRE(pairs.size() == 3);
    CHECK(pairs[0].first.str() == kFixtureCommits[6]);
    CHECK(pairs[0].second.str() == kFixtureCommits[7]);
    CHECK(pairs[2].second.str() == kFixtureCommits[5]);
    CHECK(repo.adjacent_pairs("main", 50).size() == 7);
  }

  TEST_CASE("commit sequence invariants") {
    auto seq = CommitSequence::synthetic(5);
    CHECK(seq.size() == 5);
    CHECK(seq.known_good() == 0);
    CHECK(seq.known_bad() == 4);
    CHECK(error_of([] { CommitSequence({}, 0, 0); }) == ErrorClass::EmptyRange);
    auto ids = seq.commits();
    CHECK(error_of([&] { CommitSequence(ids, 3, 2); }) == ErrorClass::IndexOutOfRange);
    CHECK(error_of([&] { CommitSequence(ids, 0, 5); }) == ErrorClass::IndexOutOfRange);
    CHECK(error_of([] { CommitId("xyz"); }) == ErrorClass::Internal);
  }
}
