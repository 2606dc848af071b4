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

// llm-bisect: command-line entry point.
//
// Exit status is 0 on success and otherwise the numeric error class, so
// scripts can branch on it. Failures also print one JSON object to stderr:
//   {"error": "<ErrorClass>", "message": "..."}

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "llm_bisect.hpp"
#include "llm_bisect/http_backend.hpp"
#include "llm_bisect/service.hpp"

namespace lb = llm_bisect;

namespace {

struct Options {
  std::string config;
  std::string repo;
  std::string good;
  std::string bad;
  std::string target;
  std::string mode;
  std::string category;
  std::string out;
  std::uint64_t seed = 1;

  // label
  std::size_t max_pairs = 0;
  // export
  std::string format = "jsonl";
  // eval
  std::vector<std::string> logs;
  std::string sessions_dir;
  std::string truth;
  std::string metric = "success";
  std::string sided = "one";
  // simulate
  std::size_t sessions = 1000;
  std::size_t interior = 31;
  double flip = 0.1;
  std::size_t region = 5;
  int requery_limit = 2;
  // serve
  std::string host = "127.0.0.1";
  int port = 8080;
};

lb::Config require_config(const Options& o) {
  if (o.config.empty()) lb::fail(lb::ErrorClass::Usage, "--config is required");
  return lb::load_config(o.config);
}

std::unique_ptr<lb::CompletionBackend> make_backend(const lb::Config& c) {
  if (c.backend == "mock") return std::make_unique<lb::MockBackend>(lb::MockBackend::from_file(c.mock_script));
  return std::make_unique<lb::HttpBackend>(c.oracle);
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    lb::atomic_write_file(path, text);
  }
}

int cmd_run(const Options& o) {
  lb::Config cfg = require_config(o);
  if (o.repo.empty() || o.good.empty() || o.bad.empty() || o.target.empty())
    lb::fail(lb::ErrorClass::Usage, "run needs --repo, --good, --bad and --target");
  lb::PipelineOptions po;
  po.oracle = cfg.oracle;
  po.mode = o.mode.empty() ? cfg.mode : lb::bisect_mode_from_string(o.mode);
  po.policy = cfg.policy;
  po.char_budget = cfg.char_budget;
  po.exemplar_limit = cfg.exemplar_limit;
  po.category = o.category;

  auto repo = lb::Repository::open(o.repo);
  auto backend = make_backend(cfg);
  std::optional<lb::ExemplarPool> pool;
  if (std::filesystem::exists(cfg.sample_dir)) {
    lb::SampleStore samples(cfg.sample_dir);
    pool = lb::ExemplarPool::rebuild(samples, cfg.exemplar_capacity);
  }
  auto session = lb::run_repository_session(repo, o.good, o.bad, o.target, *backend, po,
                                            pool ? &*pool : nullptr);

  lb::SessionStore store(o.out.empty() ? cfg.session_dir : std::filesystem::path(o.out));
  std::map<std::string, std::string> meta{{"repo", std::filesystem::absolute(o.repo).string()}};
  if (!o.category.empty()) meta["category"] = o.category;
  auto id = store.record(session, po.policy, meta);

  const auto& seq = session.sequence;
  const auto& r = session.result;
  std::cout << "session " << id << "\n";
  std::cout << "mode " << lb::to_string(session.mode) << ", " << session.probe_count()
            << " probes, " << session.requery_count() << " re-queries\n";
  if (r.is_localized()) {
    std::cout << "localized " << seq[r.hi].str() << "\n";
    return 0;
  }
  if (r.is_range()) {
    std::cout << "range " << seq[r.lo].str() << " " << seq[r.hi].str() << "\n";
    return 0;
  }
  std::cout << "aborted " << r.reason << "\n";
  auto cls = r.reason == "oracle-failure" ? lb::ErrorClass::OracleFailure : lb::ErrorClass::SessionAborted;
  lb::fail(cls, "session " + id + " aborted: " + r.reason +
                    (session.error_message.empty() ? "" : " (" + session.error_message + ")"));
}

int cmd_label(const Options& o) {
  lb::Config cfg = require_config(o);
  if (o.target.empty()) lb::fail(lb::ErrorClass::Usage, "label needs --target");
  std::vector<lb::CandidatePair> pairs;
  if (!o.repo.empty()) {
    auto repo = lb::Repository::open(o.repo);
    std::size_t limit = o.max_pairs ? o.max_pairs : cfg.harvest.pairs_per_repo;
    auto name = std::filesystem::absolute(o.repo).filename().string();
    for (auto& [parent, commit] : repo.adjacent_pairs(cfg.harvest.revision, limit))
      pairs.push_back({name, o.repo, parent, commit});
  } else {
    if (cfg.harvest.today.empty())
      lb::fail(lb::ErrorClass::ConfigError, "label.harvest.today is required to harvest repositories");
    pairs = lb::harvest_candidates(cfg.repos, cfg.harvest);
    if (o.max_pairs && pairs.size() > o.max_pairs) pairs.resize(o.max_pairs);
  }
  auto inputs = lb::label_inputs(pairs, o.category);

  lb::SampleStore store(o.out.empty() ? cfg.sample_dir : std::filesystem::path(o.out));
  auto pool = lb::ExemplarPool::rebuild(store, cfg.exemplar_capacity);
  auto backend = make_backend(cfg);
  lb::LabelOptions lo{cfg.label_threshold, cfg.exemplar_limit, cfg.char_budget};
  auto samples = lb::auto_label(
      inputs, o.target, [&](const lb::PromptTemplate& p) { return lb::classify(cfg.oracle, *backend, p); },
      pool, lo);

  std::size_t accepted = 0, pending = 0, duplicates = 0;
  for (const auto& s : samples) {
    try {
      store.insert(s);
    } catch (const lb::Error& e) {
      if (e.error_class() != lb::ErrorClass::DuplicateSample) throw;
      ++duplicates;
      continue;
    }
    (s.review_state == lb::ReviewState::AutoAccepted ? accepted : pending) += 1;
  }
  std::cout << "labeled " << samples.size() << " diffs: " << accepted << " auto-accepted, " << pending
            << " pending review";
  if (duplicates) std::cout << ", " << duplicates << " already in store";
  std::cout << "\n";
  return 0;
}

int cmd_export(const Options& o) {
  std::filesystem::path dir;
  if (!o.config.empty()) dir = lb::load_config(o.config).sample_dir;
  if (dir.empty()) lb::fail(lb::ErrorClass::Usage, "export needs --config");
  if (!std::filesystem::exists(dir)) lb::fail(lb::ErrorClass::StorageFailure, "no sample store at " + dir.string());
  lb::SampleStore store(dir);
  write_output(o.out, lb::export_dataset(store, o.format));
  return 0;
}

int cmd_eval(const Options& o) {
  std::vector<lb::OutcomeLog> logs;
  for (const auto& path : o.logs) {
    if (!std::filesystem::exists(path)) lb::fail(lb::ErrorClass::StorageFailure, "no such log: " + path);
    logs.push_back(lb::parse_outcome_log(lb::read_file(path)));
    if (logs.back().system.empty()) logs.back().system = std::filesystem::path(path).stem().string();
  }
  if (!o.sessions_dir.empty()) {
    if (o.truth.empty()) lb::fail(lb::ErrorClass::Usage, "--sessions needs --truth");
    auto truth = lb::parse_truth(lb::read_file(o.truth));
    lb::SessionStore store(o.sessions_dir);
    lb::OutcomeLog log;
    log.system = "sessions";
    for (const auto& id : store.list()) {
      auto s = store.load(id);
      const auto* t = lb::find_truth(truth, s);
      if (t == nullptr) {
        std::cerr << "warning: no ground truth for " << id << ", skipped\n";
        continue;
      }
      log.outcomes.push_back(lb::outcome_from_session(s, *t));
    }
    logs.push_back(std::move(log));
  }
  if (logs.empty()) lb::fail(lb::ErrorClass::Usage, "eval needs outcome logs or --sessions with --truth");
  if (logs.size() > 2) lb::fail(lb::ErrorClass::Usage, "eval compares at most two systems");
  auto sided = o.sided == "two" ? lb::Sidedness::Two : lb::Sidedness::One;
  if (o.sided != "one" && o.sided != "two") lb::fail(lb::ErrorClass::Usage, "--sided must be one or two");
  auto rep = lb::build_report(logs, lb::pair_metric_from_string(o.metric), sided);
  std::cout << rep.text;
  if (!o.out.empty()) {
    std::filesystem::create_directories(o.out);
    std::filesystem::path out(o.out);
    lb::atomic_write_file(out / "report.txt", rep.text);
    lb::atomic_write_file(out / "report.json", rep.records.dump(2) + "\n");
    lb::atomic_write_file(out / "categories.csv", rep.csv);
  }
  return 0;
}

int cmd_simulate(const Options& o) {
  lb::SimulationConfig c;
  c.seed = o.seed;
  c.sessions = o.sessions;
  c.interior = o.interior;
  c.flip_probability = o.flip;
  c.region_width = o.region;
  c.policy.requery_limit = o.requery_limit;
  auto text = lb::simulate(c).text();
  write_output(o.out, text);
  if (!o.out.empty() && o.out != "-") std::cout << text;
  return 0;
}

httplib::Server* g_server = nullptr;
void on_signal(int) {
  if (g_server) g_server->stop();
}

int cmd_serve(const Options& o) {
  lb::Config cfg = require_config(o);
  lb::SessionStore sessions(cfg.session_dir);
  lb::SampleStore samples(cfg.sample_dir);
  lb::ApiService api(sessions, samples);
  httplib::Server server;
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cerr << "serving on http://" << o.host << ":" << o.port << "/api\n";
  if (!lb::serve(server, api, o.host, o.port))
    lb::fail(lb::ErrorClass::Usage, "cannot bind " + o.host + ":" + std::to_string(o.port));
  return 0;
}

void print_error(std::string_view cls, std::string_view message) {
  std::cerr << lb::ordered_json{{"error", cls}, {"message", message}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"LLM-assisted git bisect: localize behavioural regressions with a language-model oracle"};
  app.require_subcommand(1);
  app.add_option("--config", o.config, "Configuration file (JSON)");

  auto* run = app.add_subcommand("run", "Bisect a repository range");
  run->add_option("--repo", o.repo, "Repository path");
  run->add_option("--good", o.good, "Known good revision");
  run->add_option("--bad", o.bad, "Known bad revision");
  run->add_option("--target", o.target, "Target behaviour description");
  run->add_option("--mode", o.mode, "classic or robust (default from config)")
      ->check(CLI::IsMember({"classic", "robust"}));
  run->add_option("--category", o.category, "Feature category id");
  run->add_option("--out", o.out, "Session store directory (default from config)");

  auto* label = app.add_subcommand("label", "Auto-label adjacent commit pairs");
  label->add_option("--repo", o.repo, "Label this repository instead of harvesting the config list");
  label->add_option("--target", o.target, "Target behaviour description");
  label->add_option("--category", o.category, "Feature category id");
  label->add_option("--max-pairs", o.max_pairs, "Upper bound on pairs");
  label->add_option("--out", o.out, "Sample store directory (default from config)");

  auto* exp = app.add_subcommand("export", "Export the reviewed dataset");
  exp->add_option("--format", o.format, "Export format");
  exp->add_option("--out", o.out, "Output file (default stdout)");

  auto* eval = app.add_subcommand("eval", "Score sessions and compare systems");
  eval->add_option("logs", o.logs, "Outcome logs (one or two systems)");
  eval->add_option("--sessions", o.sessions_dir, "Session store to score");
  eval->add_option("--truth", o.truth, "Ground truth for --sessions");
  eval->add_option("--metric", o.metric, "Paired metric: success or time-per-step");
  eval->add_option("--sided", o.sided, "Wilcoxon sidedness: one or two");
  eval->add_option("--out", o.out, "Directory for report.txt, report.json and categories.csv");

  auto* sim = app.add_subcommand("simulate", "Seeded noisy-oracle experiment, classic vs robust");
  sim->add_option("--seed", o.seed, "Random seed");
  sim->add_option("--sessions", o.sessions, "Number of sessions");
  sim->add_option("--interior", o.interior, "Commits between the endpoints");
  sim->add_option("--flip", o.flip, "Verdict flip probability inside the flaky region");
  sim->add_option("--region", o.region, "Flaky region width");
  sim->add_option("--requery-limit", o.requery_limit, "Robust re-query budget per commit");
  sim->add_option("--out", o.out, "Report file (default stdout)");

  auto* srv = app.add_subcommand("serve", "Serve the review and session API");
  srv->add_option("--host", o.host, "Bind address");
  srv->add_option("--port", o.port, "Port");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("Usage", e.what());
    return static_cast<int>(lb::ErrorClass::Usage);
  }

  try {
    if (*run) return cmd_run(o);
    if (*label) return cmd_label(o);
    if (*exp) return cmd_export(o);
    if (*eval) return cmd_eval(o);
    if (*sim) return cmd_simulate(o);
    if (*srv) return cmd_serve(o);
  } catch (const lb::Error& e) {
    print_error(lb::error_class_name(e.error_class()), e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    print_error("Internal", e.what());
    return static_cast<int>(lb::ErrorClass::Internal);
  }
  return static_cast<int>(lb::ErrorClass::Usage);
}
