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
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "llm_bisect/categories.hpp"
#include "llm_bisect/error.hpp"
#include "llm_bisect/session_store.hpp"
#include "llm_bisect/util.hpp"

namespace llm_bisect {

struct SessionOutcome {
  std::string session_id;
  std::string category;
  std::vector<bool> step_verdict_correct;
  double wall_time = 0.0;
  std::size_t steps = 0;

  friend bool operator==(const SessionOutcome&, const SessionOutcome&) = default;
};

struct ScoreResult {
  bool success = true;
  bool empty = false;  // no steps: vacuously successful, reported as a warning
};

/// All-or-nothing: one wrong step fails the whole session.
inline ScoreResult score_session_detailed(const SessionOutcome& o) {
  ScoreResult r;
  r.empty = o.step_verdict_correct.empty();
  r.success = std::all_of(o.step_verdict_correct.begin(), o.step_verdict_correct.end(),
                          [](bool b) { return b; });
  return r;
}

inline bool score_session(const SessionOutcome& o) { return score_session_detailed(o).success; }

// ---------------------------------------------------------------------------
// Category table

struct CategoryRow {
  std::string category;
  std::string display_name;
  std::size_t total = 0;
  std::size_t successes = 0;
  std::int64_t percent_tenths = 0;  // percent times ten, rounded half-up

  double percent() const { return static_cast<double>(percent_tenths) / 10.0; }
  friend bool operator==(const CategoryRow&, const CategoryRow&) = default;
};

struct CategoryTable {
  std::vector<CategoryRow> rows;
  CategoryRow totals;
  std::vector<std::string> warnings;
};

/// round_half_up(1000 * s / t) in exact integer arithmetic.
inline std::int64_t percent_tenths(std::size_t successes, std::size_t total) {
  if (total == 0) return 0;
  auto s = static_cast<std::int64_t>(successes), t = static_cast<std::int64_t>(total);
  return (2000 * s + t) / (2 * t);
}

inline std::string format_tenths(std::int64_t tenths) {
  return std::to_string(tenths / 10) + "." + std::to_string(tenths % 10);
}

inline CategoryTable build_table(const std::vector<SessionOutcome>& outcomes) {
  std::map<std::string, CategoryRow> by_cat;
  CategoryTable table;
  for (const auto& o : outcomes) {
    auto& row = by_cat[o.category];
    row.category = o.category;
    ++row.total;
    auto sc = score_session_detailed(o);
    if (sc.success) ++row.successes;
    if (sc.empty) table.warnings.push_back("session " + o.session_id + " has no steps");
  }
  for (auto& [id, row] : by_cat) {
    auto c = find_category(id);
    row.display_name = c ? std::string(c->display_name) : id;
    row.percent_tenths = percent_tenths(row.successes, row.total);
    table.rows.push_back(row);
  }
  std::stable_sort(table.rows.begin(), table.rows.end(), [](const auto& a, const auto& b) {
    return category_rank(a.category) < category_rank(b.category);
  });
  table.totals.category = "total";
  table.totals.display_name = "Total";
  for (const auto& r : table.rows) {
    table.totals.total += r.total;
    table.totals.successes += r.successes;
  }
  table.totals.percent_tenths = percent_tenths(table.totals.successes, table.totals.total);
  return table;
}

/// Pooled: total wall time over total steps.
inline double avg_time_per_step(const std::vector<SessionOutcome>& outcomes) {
  double time = 0.0;
  std::size_t steps = 0;
  for (const auto& o : outcomes) {
    time += o.wall_time;
    steps += o.steps;
  }
  if (steps == 0) fail(ErrorClass::NoSteps, "no steps across the given sessions");
  return time / static_cast<double>(steps);
}

// ---------------------------------------------------------------------------
// Wilcoxon signed-rank test

enum class Sidedness { One, Two };

struct WilcoxonResult {
  double statistic = 0.0;  // min(W+, W-)
  double w_plus = 0.0;
  double w_minus = 0.0;
  std::size_t m = 0;  // nonzero differences
  double p_value = 1.0;
  bool exact = false;
};

inline constexpr std::size_t kExactWilcoxonLimit = 12;

namespace detail {

/// Doubled mid-ranks of |d| (integers even under ties), in input order.
inline std::vector<std::int64_t> doubled_ranks(const std::vector<double>& d) {
  std::vector<std::size_t> order(d.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return std::fabs(d[a]) < std::fabs(d[b]); });
  std::vector<std::int64_t> ranks(d.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && std::fabs(d[order[j + 1]]) == std::fabs(d[order[i]])) ++j;
    // positions i..j (0-based) share rank ((i+1)+(j+1))/2
    auto doubled = static_cast<std::int64_t>(i + j + 2);
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = doubled;
    i = j + 1;
  }
  return ranks;
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace detail

/// Zero differences are dropped. One-sided p is P(T <= W) for the observed
/// direction; two-sided is min(1, 2p). Exact enumeration for m <= 12,
/// otherwise a normal approximation with continuity and tie corrections.
inline WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& paired_diffs,
                                           Sidedness sidedness) {
  std::vector<double> d;
  for (double x : paired_diffs) {
    if (!std::isfinite(x)) fail(ErrorClass::Usage, "differences must be finite");
    if (x != 0.0) d.push_back(x);
  }
  if (d.empty()) fail(ErrorClass::AllZeroDifferences, "all paired differences are zero");

  auto ranks = detail::doubled_ranks(d);
  std::int64_t plus2 = 0, minus2 = 0;
  for (std::size_t i = 0; i < d.size(); ++i) (d[i] > 0 ? plus2 : minus2) += ranks[i];
  const std::int64_t w2 = std::min(plus2, minus2);

  WilcoxonResult r;
  r.m = d.size();
  r.w_plus = static_cast<double>(plus2) / 2.0;
  r.w_minus = static_cast<double>(minus2) / 2.0;
  r.statistic = static_cast<double>(w2) / 2.0;

  double one_sided = 0.0;
  if (r.m <= kExactWilcoxonLimit) {
    r.exact = true;
    // count[s]: sign assignments whose doubled positive-rank sum is s
    std::int64_t max_sum = plus2 + minus2;
    std::vector<double> count(static_cast<std::size_t>(max_sum + 1), 0.0);
    count[0] = 1.0;
    for (auto rk : ranks) {
      for (std::int64_t s = max_sum; s >= rk; --s)
        count[static_cast<std::size_t>(s)] += count[static_cast<std::size_t>(s - rk)];
    }
    double hits = 0.0;
    for (std::int64_t s = 0; s <= w2; ++s) hits += count[static_cast<std::size_t>(s)];
    one_sided = std::ldexp(hits, -static_cast<int>(r.m));
  } else {
    const double m = static_cast<double>(r.m);
    double tie_term = 0.0;
    std::map<std::int64_t, std::size_t> groups;
    for (auto rk : ranks) ++groups[rk];
    for (const auto& [_, t] : groups) {
      double tt = static_cast<double>(t);
      tie_term += tt * tt * tt - tt;
    }
    const double mean = m * (m + 1.0) / 4.0;
    const double var = m * (m + 1.0) * (2.0 * m + 1.0) / 24.0 - tie_term / 48.0;
    const double z = (r.statistic - mean + 0.5) / std::sqrt(var);
    one_sided = std::min(1.0, detail::normal_cdf(z));
  }
  double p = sidedness == Sidedness::One ? one_sided : std::min(1.0, 2.0 * one_sided);
  r.p_value = std::max(p, std::numeric_limits<double>::min());
  return r;
}

// ---------------------------------------------------------------------------
// Outcome logs

inline constexpr std::string_view kOutcomeFormat = "llm-bisect-outcomes";

struct OutcomeLog {
  std::string system;
  bool synthetic = false;
  std::string note;
  std::vector<SessionOutcome> outcomes;
};

inline ordered_json to_json(const SessionOutcome& o) {
  return ordered_json{{"type", "outcome"},
                      {"session_id", o.session_id},
                      {"category", o.category},
                      {"step_verdict_correct", o.step_verdict_correct},
                      {"wall_time", o.wall_time},
                      {"steps", o.steps}};
}

inline SessionOutcome outcome_from_json(const json& j) {
  SessionOutcome o{j.at("session_id").get<std::string>(), j.at("category").get<std::string>(),
                   j.at("step_verdict_correct").get<std::vector<bool>>(),
                   j.at("wall_time").get<double>(), j.at("steps").get<std::size_t>()};
  if (o.steps != o.step_verdict_correct.size())
    fail(ErrorClass::StorageFailure, "session " + o.session_id + ": steps disagrees with step list");
  if (!(o.wall_time >= 0.0))
    fail(ErrorClass::StorageFailure, "session " + o.session_id + ": negative wall time");
  return o;
}

/// Header line {"type":"header","format":...,"system":...,"synthetic":...}
/// followed by one outcome per line.
inline OutcomeLog parse_outcome_log(std::string_view text) {
  OutcomeLog log;
  bool header = false;
  try {
    for (const auto& line : split_lines(text)) {
      if (line.empty()) continue;
      auto j = json::parse(line);
      auto type = j.at("type").get<std::string>();
      if (type == "header") {
        if (j.at("format") != kOutcomeFormat || j.at("version").get<int>() != 1)
          fail(ErrorClass::StorageFailure, "unsupported outcome log format");
        log.system = j.value("system", std::string{});
        log.synthetic = j.value("synthetic", false);
        log.note = j.value("note", std::string{});
        header = true;
      } else if (type == "outcome") {
        log.outcomes.push_back(outcome_from_json(j));
      } else {
        fail(ErrorClass::StorageFailure, "unknown outcome record type '" + type + "'");
      }
    }
  } catch (const json::exception& e) {
    fail(ErrorClass::StorageFailure, std::string("malformed outcome log: ") + e.what());
  }
  if (!header) fail(ErrorClass::StorageFailure, "outcome log has no header record");
  return log;
}

inline std::string encode_outcome_log(const OutcomeLog& log) {
  ordered_json h{{"type", "header"},      {"format", kOutcomeFormat}, {"version", 1},
                 {"system", log.system}, {"synthetic", log.synthetic}};
  if (!log.note.empty()) h["note"] = log.note;
  std::string out = h.dump() + "\n";
  for (const auto& o : log.outcomes) out += to_json(o).dump() + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Ground truth for stored sessions

struct TruthEntry {
  std::optional<std::string> session_id;
  std::optional<std::string> target;
  std::string first_bad;  // commit id or unambiguous prefix
  std::string category;
};

inline std::vector<TruthEntry> parse_truth(std::string_view text) {
  auto j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object() || j.value("format", "") != "llm-bisect-truth")
    fail(ErrorClass::StorageFailure, "not a ground-truth document");
  std::vector<TruthEntry> out;
  try {
    for (const auto& e : j.at("entries")) {
      TruthEntry t;
      if (e.contains("session_id")) t.session_id = e["session_id"].get<std::string>();
      if (e.contains("target")) t.target = e["target"].get<std::string>();
      t.first_bad = e.at("first_bad").get<std::string>();
      t.category = e.at("category").get<std::string>();
      out.push_back(std::move(t));
    }
  } catch (const json::exception& ex) {
    fail(ErrorClass::StorageFailure, std::string("malformed ground truth: ") + ex.what());
  }
  return out;
}

/// Grades each step against the known first-bad commit. A Skip is never
/// correct: it does not advance an automated session.
inline SessionOutcome outcome_from_session(const StoredSession& s, const TruthEntry& truth) {
  const auto& seq = s.session.sequence;
  std::optional<std::size_t> first_bad;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (seq[i].str().rfind(truth.first_bad, 0) == 0) {
      if (first_bad) fail(ErrorClass::Usage, "ambiguous first_bad '" + truth.first_bad + "'");
      first_bad = i;
    }
  }
  if (!first_bad)
    fail(ErrorClass::Usage, "first_bad '" + truth.first_bad + "' is not in session " + s.id);
  SessionOutcome o;
  o.session_id = s.id;
  o.category = truth.category;
  for (const auto& st : s.session.steps) {
    Mark expected = st.commit_index >= *first_bad ? Mark::Bad : Mark::Good;
    o.step_verdict_correct.push_back(st.verdict.mark == expected);
  }
  o.steps = o.step_verdict_correct.size();
  o.wall_time = s.session.wall_time();
  return o;
}

/// Truth lookup: session id first, then target text.
inline const TruthEntry* find_truth(const std::vector<TruthEntry>& truth, const StoredSession& s) {
  for (const auto& t : truth)
    if (t.session_id && *t.session_id == s.id) return &t;
  for (const auto& t : truth)
    if (!t.session_id && t.target && *t.target == s.session.target_behaviour) return &t;
  return nullptr;
}

// ---------------------------------------------------------------------------
// Reports

enum class PairMetric { Success, TimePerStep };

inline PairMetric pair_metric_from_string(std::string_view s) {
  if (s == "success") return PairMetric::Success;
  if (s == "time-per-step") return PairMetric::TimePerStep;
  fail(ErrorClass::Usage, "metric must be success or time-per-step");
}

/// Paired differences candidate minus baseline, matched on session id. For
/// time per step the sign is flipped so positive always means improvement.
inline std::vector<double> paired_differences(const std::vector<SessionOutcome>& baseline,
                                              const std::vector<SessionOutcome>& candidate,
                                              PairMetric metric, std::size_t* unpaired = nullptr) {
  std::map<std::string, const SessionOutcome*> base;
  for (const auto& o : baseline) base[o.session_id] = &o;
  std::vector<double> d;
  std::size_t missing = 0;
  auto per_step = [](const SessionOutcome& o) {
    return o.steps == 0 ? 0.0 : o.wall_time / static_cast<double>(o.steps);
  };
  for (const auto& c : candidate) {
    auto it = base.find(c.session_id);
    if (it == base.end()) {
      ++missing;
      continue;
    }
    const auto& b = *it->second;
    if (metric == PairMetric::Success) {
      d.push_back((score_session(c) ? 1.0 : 0.0) - (score_session(b) ? 1.0 : 0.0));
    } else {
      d.push_back(per_step(b) - per_step(c));
    }
  }
  if (unpaired) *unpaired = missing + (baseline.size() - d.size());
  return d;
}

inline std::string format_double(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

inline std::string format_p(double p) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", p);
  return buf;
}

struct EvalReport {
  std::string text;
  ordered_json records;
  std::string csv;  // category,system,total,successes,percent
};

inline ordered_json to_json(const CategoryTable& t) {
  auto row = [](const CategoryRow& r) {
    return ordered_json{{"category", r.category}, {"display_name", r.display_name},
                        {"total", r.total},       {"successes", r.successes},
                        {"percent", format_tenths(r.percent_tenths)}};
  };
  ordered_json rows = ordered_json::array();
  for (const auto& r : t.rows) rows.push_back(row(r));
  return ordered_json{{"rows", rows}, {"totals", row(t.totals)}, {"warnings", t.warnings}};
}

/// Aligned text table, JSON records and per-category CSV for one or two
/// systems, plus the paired test when two are given.
inline EvalReport build_report(const std::vector<OutcomeLog>& logs,
                               PairMetric metric = PairMetric::Success,
                               Sidedness sidedness = Sidedness::One) {
  if (logs.empty()) fail(ErrorClass::Usage, "no outcome logs given");
  EvalReport rep;
  std::vector<CategoryTable> tables;
  for (const auto& l : logs) tables.push_back(build_table(l.outcomes));

  std::string& t = rep.text;
  t += "runs:";
  for (const auto& l : logs) t += " " + (l.system.empty() ? "system" : l.system) + "=" + std::to_string(l.outcomes.size());
  t += "\n";
  bool counts_differ = false;
  for (const auto& l : logs) counts_differ |= l.outcomes.size() != logs.front().outcomes.size();
  if (counts_differ) t += "warning: run counts differ between systems\n";
  for (const auto& l : logs)
    if (l.synthetic)
      t += "note: " + (l.system.empty() ? "system" : l.system) + " log is SYNTHETIC" +
           (l.note.empty() ? "" : " (" + l.note + ")") + "\n";
  for (const auto& tb : tables)
    for (const auto& w : tb.warnings) t += "warning: " + w + "\n";
  t += "\n";

  // Category order: union of rows, reporting order.
  std::vector<std::pair<std::string, std::string>> cats;
  for (const auto& tb : tables)
    for (const auto& r : tb.rows)
      if (std::none_of(cats.begin(), cats.end(), [&](const auto& c) { return c.first == r.category; }))
        cats.emplace_back(r.category, r.display_name);
  std::stable_sort(cats.begin(), cats.end(), [](const auto& a, const auto& b) {
    return category_rank(a.first) < category_rank(b.first);
  });

  std::size_t width = std::string("Category").size();
  for (const auto& c : cats) width = std::max(width, c.second.size());
  auto pad = [](std::string s, std::size_t w, bool right) {
    if (s.size() >= w) return s;
    return right ? std::string(w - s.size(), ' ') + s : s + std::string(w - s.size(), ' ');
  };
  t += pad("Category", width, false);
  for (const auto& l : logs) {
    auto name = l.system.empty() ? std::string("system") : l.system;
    t += " | " + pad(name, 17, false);
  }
  t += "\n" + pad("", width, false);
  for (std::size_t i = 0; i < logs.size(); ++i) t += " | " + pad("Tt.", 4, true) + " " + pad("Sc.", 4, true) + " " + pad("%", 7, true);
  t += "\n";
  auto cells = [&](const CategoryRow* r) {
    if (!r) return " | " + pad("-", 4, true) + " " + pad("-", 4, true) + " " + pad("-", 7, true);
    return " | " + pad(std::to_string(r->total), 4, true) + " " +
           pad(std::to_string(r->successes), 4, true) + " " +
           pad(format_tenths(r->percent_tenths), 7, true);
  };
  for (const auto& [id, name] : cats) {
    t += pad(name, width, false);
    for (const auto& tb : tables) {
      const CategoryRow* r = nullptr;
      for (const auto& row : tb.rows)
        if (row.category == id) r = &row;
      t += cells(r);
    }
    t += "\n";
  }
  t += pad("Total", width, false);
  for (const auto& tb : tables) t += cells(&tb.totals);
  t += "\n";

  rep.csv = "category,system,total,successes,percent\n";
  ordered_json systems = ordered_json::array();
  for (std::size_t i = 0; i < logs.size(); ++i) {
    auto name = logs[i].system.empty() ? std::string("system") : logs[i].system;
    ordered_json sj{{"system", name}, {"synthetic", logs[i].synthetic}, {"runs", logs[i].outcomes.size()},
                    {"table", to_json(tables[i])}};
    try {
      double a = avg_time_per_step(logs[i].outcomes);
      sj["avg_time_per_step"] = a;
      t += "avg time/step " + name + ": " + format_double(a, 3) + " s\n";
    } catch (const Error&) {
      sj["avg_time_per_step"] = nullptr;
      t += "avg time/step " + name + ": n/a (no steps)\n";
    }
    systems.push_back(std::move(sj));
    for (const auto& r : tables[i].rows)
      rep.csv += r.category + "," + name + "," + std::to_string(r.total) + "," +
                 std::to_string(r.successes) + "," + format_tenths(r.percent_tenths) + "\n";
    rep.csv += "total," + name + "," + std::to_string(tables[i].totals.total) + "," +
               std::to_string(tables[i].totals.successes) + "," +
               format_tenths(tables[i].totals.percent_tenths) + "\n";
  }
  rep.records = ordered_json{{"format", "llm-bisect-eval"}, {"version", 1}, {"systems", systems}};

  if (logs.size() == 2) {
    std::size_t unpaired = 0;
    auto diffs = paired_differences(logs[0].outcomes, logs[1].outcomes, metric, &unpaired);
    const char* metric_name = metric == PairMetric::Success ? "success" : "time-per-step";
    ordered_json wj{{"metric", metric_name},
                    {"sidedness", sidedness == Sidedness::One ? "one" : "two"},
                    {"pairs", diffs.size()},
                    {"unpaired", unpaired}};
    t += "\nwilcoxon signed-rank (" + std::string(metric_name) + ", " +
         (sidedness == Sidedness::One ? "one" : "two") + "-sided): pairs=" +
         std::to_string(diffs.size());
    if (unpaired) t += " unpaired=" + std::to_string(unpaired);
    try {
      auto w = wilcoxon_signed_rank(diffs, sidedness);
      t += " m=" + std::to_string(w.m) + " W=" + format_double(w.statistic, 1) +
           " p=" + format_p(w.p_value) + (w.exact ? " (exact)" : " (normal approx.)") + "\n";
      wj["m"] = w.m;
      wj["W"] = w.statistic;
      wj["W_plus"] = w.w_plus;
      wj["W_minus"] = w.w_minus;
      wj["p_value"] = w.p_value;
      wj["exact"] = w.exact;
    } catch (const Error& e) {
      t += " -> " + std::string(error_class_name(e.error_class())) + "\n";
      wj["error"] = error_class_name(e.error_class());
    }
    rep.records["wilcoxon"] = std::move(wj);
  }
  return rep;
}

}  // namespace llm_bisect
