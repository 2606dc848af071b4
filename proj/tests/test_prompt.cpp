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

std::size_t occurrences(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

AnnotatedDiff refactor_diff() {
  RawDiff d;
  d.files.push_back({"sum.cpp",
                     {"    int sum = 0;", "    for (int x : args) {", "        sum += x;", "    }",
                      "    cout << \"Result: \" << sum << endl;"},
                     {"int logic(const vector<int>& args) {", "    int sum = 0;",
                      "    for (int x : args) {", "        sum += x;", "    }", "    return sum;",
                      "}"}});
  return annotate(d);
}

Exemplar sized_exemplar(const std::string& tag, std::size_t total) {
  Exemplar e{"", make_response("good"), "display-output"};
  e.response.reflection = tag;
  const std::size_t fixed = serialize(e.response).size();
  e.diff_text = std::string(total - fixed, 'x');
  return e;
}

LabeledSample reviewed_sample(ReviewState state) {
  LabeledSample s;
  s.sample_id = "s-1";
  s.diff_text = "+ x\n";
  s.target_behaviour = kFixtureTarget;
  s.machine_response = make_response("bad");
  s.review_state = state;
  return s;
}

}  // namespace

TEST_SUITE("prompt") {
  TEST_CASE("skeleton names each response field exactly once") {
    auto p = build_prompt("greeting output", refactor_diff(), {});
    const std::string skeleton_start = "## Response format";
    auto section = p.text.substr(p.text.find(skeleton_start));
    section = section.substr(0, section.find("## Diff under review"));
    for (auto f : kResponseFields) CHECK(occurrences(section, "\"" + std::string(f) + "\"") == 1);
    for (auto f : kSemEditFields) CHECK(occurrences(section, "\"" + std::string(f) + "\"") == 1);
    CHECK(p.text.find("~     int sum = 0;") != std::string::npos);
  }

  TEST_CASE("sections appear in the documented order") {
    std::vector<Exemplar> ex{sized_exemplar("first", 1000)};
    auto p = build_prompt("greeting output", refactor_diff(), ex);
    auto pos = [&](const std::string& s) { return p.text.find(s); };
    CHECK(pos("You are reviewing") < pos("## Target behaviour"));
    CHECK(pos("## Target behaviour") < pos("## Questions"));
    CHECK(pos("## Questions") < pos("## Response format"));
    CHECK(pos("## Response format") < pos("## Worked examples"));
    CHECK(pos("## Worked examples") < pos("## Diff under review"));
    CHECK(pos("## Diff under review") < pos("Respond with the JSON object only"));
  }

  TEST_CASE("empty diff reads as no changes") {
    auto p = build_prompt("greeting output", AnnotatedDiff{}, {});
    CHECK(p.text.find("## Diff under review\n(no changes)\n") != std::string::npos);
  }

  TEST_CASE("oldest exemplars are evicted to fit the budget") {
    std::vector<Exemplar> ex{sized_exemplar("oldest", 10000), sized_exemplar("middle", 10000),
                             sized_exemplar("newest", 10000)};
    const std::string diff(100, 'd');
    // 3 * 10000 + 100 > 25000; dropping one leaves 20100.
    auto p = build_prompt("greeting output", diff, ex, PromptOptions{25000, {}});
    REQUIRE(p.exemplars.size() == 2);
    CHECK(p.evicted == 1);
    CHECK(p.exemplars[0].response.reflection == "middle");
    CHECK(p.exemplars[1].response.reflection == "newest");
    CHECK(p.text.find("oldest") == std::string::npos);
  }

  TEST_CASE("a diff larger than the budget is rejected") {
    try {
      build_prompt("t", std::string(50, 'd'), {}, PromptOptions{10, {}});
      FAIL("accepted");
    } catch (const Error& e) {
      CHECK(e.error_class() == ErrorClass::BudgetExceeded);
    }
  }

  TEST_CASE("prompt assembly is deterministic") {
    std::vector<Exemplar> ex{sized_exemplar("a", 500), sized_exemplar("b", 600)};
    auto p1 = build_prompt("greeting output", refactor_diff(), ex);
    auto p2 = build_prompt("greeting output", refactor_diff(), ex);
    CHECK(p1.text == p2.text);
    CHECK(p1.hash() == p2.hash());
    CHECK(p1.hash().size() == 64);
    auto p3 = build_prompt("other output", refactor_diff(), ex);
    CHECK(p3.hash() != p1.hash());
  }

  TEST_CASE("binary paths are listed without content") {
    AnnotatedDiff d;
    d.binary_paths = {"img/logo.png"};
    auto p = build_prompt("t", d, {});
    CHECK(p.text.find("Binary files changed (content omitted): img/logo.png") != std::string::npos);
  }

  TEST_CASE("target must be non-empty and exemplars schema-valid") {
    CHECK_THROWS_AS(build_prompt("", std::string{}, {}), Error);
    Exemplar bad = sized_exemplar("x", 500);
    bad.response.bisect_mark = "maybe";
    CHECK_THROWS_AS(build_prompt("t", std::string{}, {bad}), SchemaViolation);
  }

  TEST_CASE("exemplar eligibility") {
    CHECK(validate_exemplar(reviewed_sample(ReviewState::Accepted)));
    CHECK_FALSE(validate_exemplar(reviewed_sample(ReviewState::Discarded)));
    CHECK_FALSE(validate_exemplar(reviewed_sample(ReviewState::Pending)));
    CHECK_FALSE(validate_exemplar(reviewed_sample(ReviewState::AutoAccepted)));
    auto corrected = reviewed_sample(ReviewState::Corrected);
    corrected.corrected_response = make_response("good");
    CHECK(validate_exemplar(corrected));
    corrected.corrected_response->behaviour_change = "removed";
    CHECK_FALSE(validate_exemplar(corrected));
    auto no_correction = reviewed_sample(ReviewState::Corrected);
    CHECK_FALSE(validate_exemplar(no_correction));
    auto ex = to_exemplar(reviewed_sample(ReviewState::Accepted));
    CHECK(ex.response.bisect_mark == "bad");
  }
}
