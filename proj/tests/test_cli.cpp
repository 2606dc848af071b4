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

#ifndef LLM_BISECT_CLI
#error "LLM_BISECT_CLI must be defined"
#endif

using namespace llm_bisect;
using namespace test_support;

namespace {

struct CliFixture {
  TempDir tmp;
  fs::path repo = make_fixture_repo(tmp / "repo");

  fs::path config(const std::string& script, const std::string& mode, int k = 3) {
    json doc{{"oracle",
              {{"backend", "mock"},
               {"mock_script", fixture("mock/" + script).string()},
               {"samples_k", k},
               {"backoff_seconds", 0}}},
             {"bisect", {{"mode", mode}, {"requery_limit", 2}}},
             {"stores", {{"sessions", "sessions"}, {"samples", "samples"}}}};
    auto path = tmp / (script + "." + mode + ".json");
    atomic_write_file(path, doc.dump(2));
    return path;
  }

  ProcessResult cli(std::vector<std::string> args) {
    args.insert(args.begin(), LLM_BISECT_CLI);
    return run_process(args);
  }

  ProcessResult run(const fs::path& cfg, const std::string& good = kFixtureCommits[0],
                    const std::string& bad = kFixtureCommits[7]) {
    return cli({"--config", cfg.string(), "run", "--repo", repo.string(), "--good", good, "--bad", bad,
                "--target", kFixtureTarget, "--category", "display-output"});
  }
};

json stderr_json(const ProcessResult& r) {
  auto line = r.err.substr(r.err.rfind('{'));
  return json::parse(line);
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("classic run localizes the fault and persists a replayable session") {
    CliFixture f;
    auto r = f.run(f.config("classic-fault5.json", "classic"));
    INFO(r.err);
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find("session session-000001\n") == 0);
    CHECK(r.out.find("mode classic, 3 probes, 0 re-queries") != std::string::npos);
    CHECK(r.out.find(std::string("localized ") + kFixtureCommits[5]) != std::string::npos);

    SessionStore store(f.tmp / "sessions");
    REQUIRE(store.list().size() == 1);
    auto stored = store.load("session-000001");
    CHECK(stored.metadata.at("category") == "display-output");
    CHECK(stored.session.sequence.size() == 8);
    auto again = replay(stored);
    CHECK(again.result == stored.session.result);
  }

  TEST_CASE("robust runs re-query and report ranges") {
    CliFixture f;
    auto r = f.run(f.config("robust-fault5.json", "robust"));
    INFO(r.err);
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find("3 probes, 2 re-queries") != std::string::npos);
    CHECK(r.out.find(std::string("localized ") + kFixtureCommits[5]) != std::string::npos);

    auto c = f.run(f.config("contradiction.json", "robust", 1));
    INFO(c.err);
    REQUIRE(c.exit_code == 0);
    CHECK(c.out.find(std::string("range ") + kFixtureCommits[5] + " " + kFixtureCommits[6]) !=
          std::string::npos);
  }

  TEST_CASE("eval scores stored sessions against ground truth") {
    CliFixture f;
    REQUIRE(f.run(f.config("classic-fault5.json", "classic")).exit_code == 0);
    auto truth = f.tmp / "truth.json";
    atomic_write_file(truth, json{{"format", "llm-bisect-truth"},
                                  {"entries",
                                   {{{"target", kFixtureTarget},
                                     {"first_bad", std::string(kFixtureCommits[5]).substr(0, 7)},
                                     {"category", "display-output"}}}}}
                                 .dump());
    auto out = f.tmp / "report";
    auto r = f.cli({"eval", "--sessions", (f.tmp / "sessions").string(), "--truth", truth.string(),
                    "--out", out.string()});
    INFO(r.err);
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find("runs: sessions=1") == 0);
    CHECK(r.out.find("|    1    1   100.0") != std::string::npos);
    CHECK(read_file(out / "categories.csv").find("total,sessions,1,1,100.0") != std::string::npos);
    auto rec = json::parse(read_file(out / "report.json"));
    CHECK(rec["systems"][0]["table"]["totals"]["successes"] == 1);
    CHECK(f.cli({"eval", "--sessions", (f.tmp / "sessions").string()}).exit_code == 2);
  }

  TEST_CASE("eval compares two outcome logs") {
    CliFixture f;
    auto r = f.cli({"eval", fixture("outcomes/category-baseline.jsonl").string(),
                    fixture("outcomes/category-finetuned.jsonl").string()});
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find("p=0.125 (exact)") != std::string::npos);
    auto t = f.cli({"eval", fixture("outcomes/synthetic-baseline.jsonl").string(),
                    fixture("outcomes/synthetic-candidate.jsonl").string(), "--metric", "time-per-step"});
    REQUIRE(t.exit_code == 0);
    CHECK(t.out.find("pairs=32 m=32") != std::string::npos);
    CHECK(f.cli({"eval", "--metric", "speed", fixture("outcomes/category-baseline.jsonl").string()})
              .exit_code == 2);
    CHECK(f.cli({"eval", (f.tmp / "missing.jsonl").string()}).exit_code ==
          static_cast<int>(ErrorClass::StorageFailure));
  }

  TEST_CASE("label and export") {
    CliFixture f;
    auto cfg = f.config("classic-fault5.json", "classic");
    auto r = f.cli({"--config", cfg.string(), "label", "--repo", f.repo.string(), "--target",
                    kFixtureTarget, "--max-pairs", "3", "--category", "display-output"});
    INFO(r.err);
    REQUIRE(r.exit_code == 0);
    CHECK(r.out == "labeled 3 diffs: 3 auto-accepted, 0 pending review\n");
    auto e1 = f.cli({"--config", cfg.string(), "export"});
    auto e2 = f.cli({"--config", cfg.string(), "export", "--out", (f.tmp / "data.jsonl").string()});
    REQUIRE(e1.exit_code == 0);
    REQUIRE(e2.exit_code == 0);
    CHECK(e1.out == read_file(f.tmp / "data.jsonl"));
    CHECK(std::count(e1.out.begin(), e1.out.end(), '\n') == 3);
    auto csv = f.cli({"--config", cfg.string(), "export", "--format", "csv"});
    CHECK(csv.exit_code == static_cast<int>(ErrorClass::UnsupportedFormat));
    CHECK(stderr_json(csv)["error"] == "UnsupportedFormat");
  }

  TEST_CASE("simulate is reproducible") {
    CliFixture f;
    auto a = f.cli({"simulate", "--seed", "11", "--sessions", "200"});
    auto b = f.cli({"simulate", "--seed", "11", "--sessions", "200"});
    REQUIRE(a.exit_code == 0);
    CHECK(a.out == b.out);
    CHECK(a.out.find("simulation seed=11 sessions=200") == 0);
  }

  TEST_CASE("errors map to exit codes with a JSON message") {
    CliFixture f;
    auto cfg = f.config("classic-fault5.json", "classic");
    auto r = f.run(cfg, kFixtureCommits[5], kFixtureCommits[1]);
    CHECK(r.exit_code == 12);
    CHECK(stderr_json(r)["error"] == "NotAnAncestor");
    CHECK(f.run(cfg, "no-such-rev").exit_code == static_cast<int>(ErrorClass::RevisionNotFound));
    CHECK(f.cli({"--config", cfg.string(), "run", "--repo", (f.tmp / "nope").string(), "--good", "a",
                 "--bad", "b", "--target", "t"})
              .exit_code == static_cast<int>(ErrorClass::RepoNotFound));
    auto none = f.cli({});
    CHECK(none.exit_code == 2);
    CHECK(stderr_json(none)["error"] == "Usage");
    CHECK(f.cli({"run"}).exit_code == 2);
    CHECK(f.cli({"--config", (f.tmp / "missing.json").string(), "run"}).exit_code ==
          static_cast<int>(ErrorClass::ConfigError));
    CHECK(f.cli({"simulate", "--sessions", "0"}).exit_code == 2);
  }

  TEST_CASE("an exhausted mock script aborts the session") {
    CliFixture f;
    TempDir scripts;
    auto path = scripts / "short.json";
    atomic_write_file(path, json{{"format", "llm-bisect-mock"},
                                 {"version", 1},
                                 {"outputs", {response_text("good")}}}
                                .dump());
    json doc{{"oracle", {{"backend", "mock"}, {"mock_script", path.string()}, {"samples_k", 3}, {"retries", 0}}},
             {"bisect", {{"mode", "classic"}}},
             {"stores", {{"sessions", "sessions"}}}};
    atomic_write_file(f.tmp / "short.json", doc.dump());
    auto r = f.run(f.tmp / "short.json");
    CHECK(r.exit_code == static_cast<int>(ErrorClass::OracleFailure));
    CHECK(r.out.find("aborted oracle-failure") != std::string::npos);
    CHECK(SessionStore(f.tmp / "sessions").list().size() == 1);
  }
}
