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

#include <random>

#include "oracles.hpp"
#include "support.hpp"

using namespace llm_bisect;
using namespace test_support;

namespace {

struct ReferenceRow {
  const char* category;
  std::size_t total, baseline, finetuned;
};

// Per-category counts of the reference comparison.
constexpr ReferenceRow kReference[] = {
    {"display-output", 3, 3, 3},          {"input-handling", 3, 3, 3},
    {"state-transition", 3, 3, 3},        {"decision-rules", 4, 4, 4},
    {"structural-refactor", 4, 4, 4},     {"robustness-error-handling", 4, 0, 2},
    {"flow-control", 3, 3, 3},            {"runtime-launch-safeguard", 4, 0, 1},
    {"documentation-cosmetic", 3, 3, 3}};

OutcomeLog load_log(const std::string& name) {
  return parse_outcome_log(read_file(fixture("outcomes/" + name)));
}

SessionOutcome outcome(const std::string& id, std::vector<bool> steps, double time,
                       const std::string& category = "display-output") {
  SessionOutcome o{id, category, std::move(steps), time, 0};
  o.steps = o.step_verdict_correct.size();
  return o;
}

template <typename F>
ErrorClass error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.error_class();
  }
  return ErrorClass::Internal;
}

StoredSession timed_session(std::size_t fault, double step_time) {
  auto seq = CommitSequence::synthetic(16);
  StoredSession s{"session-000001", run_classic(seq, MonotoneOracle{fault}, kFixtureTarget), {}, {}};
  for (auto& st : s.session.steps) st.elapsed = step_time;
  return s;
}

}  // namespace

TEST_SUITE("evaluation") {
  TEST_CASE("scoring is all-or-nothing") {
    CHECK(score_session(outcome("a", {true, true, true}, 1)));
    CHECK_FALSE(score_session(outcome("a", {true, false, true}, 1)));
    auto empty = score_session_detailed(outcome("a", {}, 0));
    CHECK(empty.success);
    CHECK(empty.empty);
    auto t = build_table({outcome("z", {}, 0)});
    REQUIRE(t.warnings.size() == 1);
    CHECK(t.warnings[0] == "session z has no steps");
  }

  TEST_CASE("percent rounding matches the remainder oracle") {
    for (std::size_t t = 1; t <= 300; ++t)
      for (std::size_t s = 0; s <= t; ++s) {
        CAPTURE(s);
        CAPTURE(t);
        CHECK(format_tenths(percent_tenths(s, t)) == oracles::percent_one_decimal(s, t));
      }
    CHECK(format_tenths(percent_tenths(23, 31)) == "74.2");
    CHECK(format_tenths(percent_tenths(25, 31)) == "80.6");
    CHECK(format_tenths(percent_tenths(26, 31)) == "83.9");
    CHECK(format_tenths(percent_tenths(1, 8)) == "12.5");
    CHECK(percent_tenths(0, 0) == 0);
  }

  TEST_CASE("category fixtures reproduce the reference rows") {
    auto base = build_table(load_log("category-baseline.jsonl").outcomes);
    auto tuned = build_table(load_log("category-finetuned.jsonl").outcomes);
    REQUIRE(base.rows.size() == 9);
    REQUIRE(tuned.rows.size() == 9);
    std::size_t base_sum = 0, tuned_sum = 0;
    for (std::size_t i = 0; i < 9; ++i) {
      const auto& p = kReference[i];
      CAPTURE(p.category);
      CHECK(base.rows[i].category == p.category);
      CHECK(base.rows[i].display_name == kCategories[i].display_name);
      CHECK(base.rows[i].total == p.total);
      CHECK(base.rows[i].successes == p.baseline);
      CHECK(tuned.rows[i].successes == p.finetuned);
      CHECK(base.rows[i].percent_tenths == percent_tenths(p.baseline, p.total));
      base_sum += p.baseline;
      tuned_sum += p.finetuned;
    }
    CHECK(tuned.rows[5].percent() == 50.0);
    CHECK(tuned.rows[7].percent() == 25.0);
    CHECK(base.totals.total == 31);
    CHECK(base.totals.successes == 23);
    CHECK(format_tenths(base.totals.percent_tenths) == "74.2");
    // The fine-tuned rows sum to 26, one more than the reference total.
    CHECK(tuned_sum == 26);
    CHECK(tuned.totals.successes == tuned_sum);
    CHECK(format_tenths(tuned.totals.percent_tenths) == "83.9");
    CHECK(base_sum == base.totals.successes);
  }

  TEST_CASE("wilcoxon agrees with brute-force enumeration") {
    std::mt19937_64 g(424242);
    for (int iter = 0; iter < 200; ++iter) {
      std::size_t n = 1 + g() % 14;
      std::vector<double> d;
      for (std::size_t i = 0; i < n; ++i) d.push_back(static_cast<double>(static_cast<int>(g() % 9) - 4));
      if (std::all_of(d.begin(), d.end(), [](double x) { return x == 0.0; })) d[0] = 1.0;
      auto nonzero = std::count_if(d.begin(), d.end(), [](double x) { return x != 0.0; });
      if (nonzero > 12) d.resize(d.size() - static_cast<std::size_t>(nonzero - 12));
      if (std::all_of(d.begin(), d.end(), [](double x) { return x == 0.0; })) d[0] = 2.0;
      auto brute = oracles::brute_wilcoxon(d);
      auto one = wilcoxon_signed_rank(d, Sidedness::One);
      auto two = wilcoxon_signed_rank(d, Sidedness::Two);
      CAPTURE(iter);
      CHECK(one.exact);
      CHECK(one.w_plus == brute.w_plus);
      CHECK(one.w_minus == brute.w_minus);
      CHECK(std::fabs(one.p_value - brute.p_one) <= 1e-12);
      CHECK(std::fabs(two.p_value - brute.p_two) <= 1e-12);
    }
  }

  TEST_CASE("wilcoxon reference values") {
    auto all_up = wilcoxon_signed_rank({1, 2, 3, 4, 5}, Sidedness::One);
    CHECK(all_up.p_value == doctest::Approx(0.03125).epsilon(1e-12));
    CHECK(all_up.statistic == 0.0);
    CHECK(all_up.w_plus == 15.0);
    CHECK(wilcoxon_signed_rank({1, 2, 3, 4, 5}, Sidedness::Two).p_value ==
          doctest::Approx(0.0625).epsilon(1e-12));
    // three tied improvements and zeros: only m counts
    auto tied = wilcoxon_signed_rank({1, 1, 1, 0, 0, 0, 0}, Sidedness::One);
    CHECK(tied.m == 3);
    CHECK(tied.p_value == doctest::Approx(0.125).epsilon(1e-12));
    CHECK(error_of([] { wilcoxon_signed_rank({0, 0, 0}, Sidedness::One); }) ==
          ErrorClass::AllZeroDifferences);
    CHECK(error_of([] { wilcoxon_signed_rank({}, Sidedness::Two); }) == ErrorClass::AllZeroDifferences);
    CHECK(error_of([] { wilcoxon_signed_rank({1.0, NAN}, Sidedness::One); }) == ErrorClass::Usage);
  }

  TEST_CASE("normal approximation is close to exact beyond the limit") {
    std::mt19937_64 g(99);
    for (int iter = 0; iter < 20; ++iter) {
      std::vector<double> d;
      for (int i = 0; i < 16; ++i) d.push_back(static_cast<double>(1 + g() % 40) * (g() % 3 == 0 ? -1 : 1));
      auto w = wilcoxon_signed_rank(d, Sidedness::One);
      CHECK_FALSE(w.exact);
      CHECK(std::fabs(w.p_value - oracles::brute_wilcoxon(d).p_one) < 0.01);
    }
  }

  TEST_CASE("synthetic timing fixtures show a significant improvement") {
    auto base = load_log("synthetic-baseline.jsonl");
    auto cand = load_log("synthetic-candidate.jsonl");
    CHECK(base.synthetic);
    CHECK(cand.synthetic);
    auto d = paired_differences(base.outcomes, cand.outcomes, PairMetric::TimePerStep);
    REQUIRE(d.size() == 32);
    auto w = wilcoxon_signed_rank(d, Sidedness::One);
    CHECK(w.m == 32);
    CHECK(w.p_value < 0.01);
    CHECK(avg_time_per_step(cand.outcomes) < avg_time_per_step(base.outcomes));
  }

  TEST_CASE("pooled time per step") {
    std::vector<SessionOutcome> v{outcome("a", {true, true}, 3.0), outcome("b", {true, true, true, true}, 3.0)};
    CHECK(avg_time_per_step(v) == doctest::Approx(1.0));
    CHECK(error_of([] { avg_time_per_step({}); }) == ErrorClass::NoSteps);
    CHECK(error_of([] { avg_time_per_step({outcome("a", {}, 1.0)}); }) == ErrorClass::NoSteps);
  }

  TEST_CASE("paired differences match on id and orient improvements positive") {
    std::vector<SessionOutcome> base{outcome("a", {true}, 4.0), outcome("b", {false}, 4.0),
                                     outcome("only-base", {true}, 1.0)};
    std::vector<SessionOutcome> cand{outcome("b", {true}, 2.0), outcome("a", {false}, 8.0),
                                     outcome("only-cand", {true}, 1.0)};
    std::size_t unpaired = 0;
    auto s = paired_differences(base, cand, PairMetric::Success, &unpaired);
    CHECK(s == std::vector<double>{1.0, -1.0});
    CHECK(unpaired == 2);
    auto t = paired_differences(base, cand, PairMetric::TimePerStep);
    CHECK(t == std::vector<double>{2.0, -4.0});
    CHECK(pair_metric_from_string("time-per-step") == PairMetric::TimePerStep);
    CHECK(error_of([] { pair_metric_from_string("speed"); }) == ErrorClass::Usage);
  }

  TEST_CASE("outcome logs round trip and reject malformed input") {
    OutcomeLog log{"sys", true, "placeholder", {outcome("a", {true, false}, 1.5), outcome("b", {}, 0.0)}};
    auto back = parse_outcome_log(encode_outcome_log(log));
    CHECK(back.system == "sys");
    CHECK(back.synthetic);
    CHECK(back.note == "placeholder");
    CHECK(back.outcomes == log.outcomes);
    CHECK(error_of([] { parse_outcome_log(""); }) == ErrorClass::StorageFailure);
    CHECK(error_of([] { parse_outcome_log("{\"type\":\"header\",\"format\":\"x\",\"version\":1}"); }) ==
          ErrorClass::StorageFailure);
    auto header = encode_outcome_log({"s", false, "", {}});
    CHECK(error_of([&] {
            parse_outcome_log(header + R"({"type":"outcome","session_id":"a","category":"c",)"
                                       R"("step_verdict_correct":[true],"wall_time":1,"steps":2})");
          }) == ErrorClass::StorageFailure);
    CHECK(error_of([&] { parse_outcome_log(header + "{\"type\":\"other\"}"); }) ==
          ErrorClass::StorageFailure);
    CHECK(error_of([&] { parse_outcome_log(header + "not json"); }) == ErrorClass::StorageFailure);
  }

  TEST_CASE("stored sessions are graded against ground truth") {
    auto s = timed_session(9, 0.5);
    const auto& seq = s.session.sequence;
    TruthEntry truth{std::nullopt, std::string(kFixtureTarget), seq[9].str().substr(0, 12), "flow-control"};
    auto o = outcome_from_session(s, truth);
    CHECK(o.session_id == "session-000001");
    CHECK(o.category == "flow-control");
    CHECK(o.steps == s.session.steps.size());
    CHECK(o.wall_time == doctest::Approx(0.5 * static_cast<double>(o.steps)));
    CHECK(score_session(o));

    // the same verdicts graded against a different fault
    truth.first_bad = seq[4].str();
    auto wrong = outcome_from_session(s, truth);
    CHECK_FALSE(score_session(wrong));
    std::size_t expected_wrong = 0;
    for (const auto& st : s.session.steps)
      if (st.commit_index >= 4 && st.commit_index < 9) ++expected_wrong;
    CHECK(std::count(wrong.step_verdict_correct.begin(), wrong.step_verdict_correct.end(), false) ==
          static_cast<long>(expected_wrong));

    truth.first_bad = "";
    CHECK(error_of([&] { outcome_from_session(s, truth); }) == ErrorClass::Usage);
    truth.first_bad = "zzzz";
    CHECK(error_of([&] { outcome_from_session(s, truth); }) == ErrorClass::Usage);
  }

  TEST_CASE("a skipped step is never correct") {
    auto seq = CommitSequence::synthetic(8);
    ScriptedOracle o{{{3, {Mark::Skip}}, {2, {Mark::Good}}, {4, {Mark::Bad}}}, {}, {}};
    StoredSession s{"session-000002", run_robust(seq, o, "t"), {}, {}};
    REQUIRE(s.session.steps.front().verdict.mark == Mark::Skip);
    auto graded = outcome_from_session(s, {std::nullopt, std::nullopt, seq[4].str(), "flow-control"});
    CHECK_FALSE(graded.step_verdict_correct.front());
    CHECK_FALSE(score_session(graded));
  }

  TEST_CASE("truth lookup prefers session id over target") {
    auto s = timed_session(3, 1.0);
    auto truth = parse_truth(R"({"format":"llm-bisect-truth","entries":[
      {"target":"Prints the welcome banner on start","first_bad":"aa","category":"display-output"},
      {"session_id":"session-000001","first_bad":"bb","category":"flow-control"}]})");
    REQUIRE(truth.size() == 2);
    const auto* hit = find_truth(truth, s);
    REQUIRE(hit != nullptr);
    CHECK(hit->first_bad == "bb");
    s.id = "session-000002";
    CHECK(find_truth(truth, s)->first_bad == "aa");
    s.session.target_behaviour = "other";
    CHECK(find_truth(truth, s) == nullptr);
    CHECK(error_of([] { parse_truth("{}"); }) == ErrorClass::StorageFailure);
    CHECK(error_of([] { parse_truth(R"({"format":"llm-bisect-truth","entries":[{}]})"); }) ==
          ErrorClass::StorageFailure);
  }

  TEST_CASE("report renders both systems and the paired test") {
    auto base = load_log("category-baseline.jsonl");
    auto tuned = load_log("category-finetuned.jsonl");
    auto rep = build_report({base, tuned});
    CHECK(rep.text.find("runs: baseline=31 fine-tuned=31") == 0);
    CHECK(rep.text.find("note: baseline log is SYNTHETIC") != std::string::npos);
    CHECK(rep.text.find("Robustness / Error Handling") != std::string::npos);
    CHECK(rep.text.find("|   31   23    74.2 |   31   26    83.9") != std::string::npos);
    CHECK(rep.text.find("m=3 W=0.0 p=0.125 (exact)") != std::string::npos);
    CHECK(rep.records["wilcoxon"]["m"] == 3);
    CHECK(rep.records["systems"][0]["table"]["totals"]["percent"] == "74.2");
    CHECK(rep.csv.find("robustness-error-handling,fine-tuned,4,2,50.0\n") != std::string::npos);
    CHECK(rep.csv.find("total,baseline,31,23,74.2\n") != std::string::npos);
    CHECK(build_report({base, tuned}).text == rep.text);

    auto timing = build_report({load_log("synthetic-baseline.jsonl"), load_log("synthetic-candidate.jsonl")},
                               PairMetric::TimePerStep);
    CHECK(timing.records["wilcoxon"]["p_value"].get<double>() < 0.01);
    CHECK(timing.records["wilcoxon"]["exact"] == false);

    OutcomeLog a{"a", false, "", {outcome("x", {true}, 1.0)}};
    OutcomeLog b{"b", false, "", {outcome("x", {true}, 1.0), outcome("y", {true}, 1.0)}};
    auto diff = build_report({a, b});
    CHECK(diff.text.find("warning: run counts differ between systems") != std::string::npos);
    CHECK(diff.records["wilcoxon"]["error"] == "AllZeroDifferences");
    CHECK(build_report({a}).records.contains("wilcoxon") == false);
    CHECK(error_of([] { build_report({}); }) == ErrorClass::Usage);
  }
}
