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

#include <cstdlib>
#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

#include "llm_bisect/bisect.hpp"
#include "llm_bisect/error.hpp"
#include "llm_bisect/label.hpp"
#include "llm_bisect/oracle.hpp"
#include "llm_bisect/prompt.hpp"
#include "llm_bisect/util.hpp"

namespace llm_bisect {

inline constexpr const char* kApiKeyEnv = "LLM_BISECT_API_KEY";

/// Single configuration document with one section per module. Relative
/// paths resolve against the directory holding the file. Only the API key
/// may come from the environment.
struct Config {
  std::string backend = "mock";  // mock | http
  std::filesystem::path mock_script;
  OracleConfig oracle;

  std::size_t char_budget = kDefaultPromptBudget;
  std::size_t exemplar_limit = kDefaultExemplarCapacity;

  BisectMode mode = BisectMode::Robust;
  RobustPolicy policy;

  double label_threshold = 0.8;
  std::size_t exemplar_capacity = kDefaultExemplarCapacity;
  HarvestCriteria harvest;
  std::vector<RepoDescriptor> repos;

  std::filesystem::path session_dir = "sessions";
  std::filesystem::path sample_dir = "samples";
};

namespace detail {

inline void check_keys(const json& obj, std::string_view section,
                       std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) fail(ErrorClass::ConfigError, "section '" + std::string(section) + "' must be an object");
  for (const auto& [k, _] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok |= (k == a);
    if (!ok) fail(ErrorClass::ConfigError, "unknown key '" + k + "' in section '" + std::string(section) + "'");
  }
}

template <typename T>
void read_opt(const json& obj, const char* key, T& out, std::string_view section) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorClass::ConfigError, "bad value for '" + std::string(section) + "." + key + "'");
  }
}

inline std::filesystem::path resolve_path(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace detail

inline Config parse_config(const json& doc, const std::filesystem::path& base_dir = {}) {
  using detail::read_opt;
  Config c;
  detail::check_keys(doc, "root", {"oracle", "prompt", "bisect", "label", "stores"});

  if (doc.contains("oracle")) {
    const auto& o = doc["oracle"];
    detail::check_keys(o, "oracle",
                       {"backend", "mock_script", "endpoint", "model", "samples_k", "temperature",
                        "confidence_threshold", "timeout_seconds", "retries", "backoff_seconds",
                        "api_key"});
    read_opt(o, "backend", c.backend, "oracle");
    std::string script;
    read_opt(o, "mock_script", script, "oracle");
    if (!script.empty()) c.mock_script = detail::resolve_path(base_dir, script);
    read_opt(o, "endpoint", c.oracle.endpoint, "oracle");
    read_opt(o, "model", c.oracle.model_name, "oracle");
    read_opt(o, "samples_k", c.oracle.samples_k, "oracle");
    if (o.contains("temperature") && !o["temperature"].is_null()) {
      double t = 0.0;
      read_opt(o, "temperature", t, "oracle");
      c.oracle.temperature = t;
    }
    read_opt(o, "confidence_threshold", c.oracle.confidence_threshold, "oracle");
    read_opt(o, "timeout_seconds", c.oracle.timeout_seconds, "oracle");
    read_opt(o, "retries", c.oracle.retries, "oracle");
    read_opt(o, "backoff_seconds", c.oracle.backoff_seconds, "oracle");
    read_opt(o, "api_key", c.oracle.api_key, "oracle");
  }
  if (c.backend != "mock" && c.backend != "http")
    fail(ErrorClass::ConfigError, "oracle.backend must be mock or http");

  if (doc.contains("prompt")) {
    const auto& p = doc["prompt"];
    detail::check_keys(p, "prompt", {"char_budget", "exemplar_limit"});
    read_opt(p, "char_budget", c.char_budget, "prompt");
    read_opt(p, "exemplar_limit", c.exemplar_limit, "prompt");
  }

  if (doc.contains("bisect")) {
    const auto& b = doc["bisect"];
    detail::check_keys(b, "bisect", {"mode", "requery_limit", "confirm_boundary"});
    std::string mode(to_string(c.mode));
    read_opt(b, "mode", mode, "bisect");
    if (mode != "classic" && mode != "robust")
      fail(ErrorClass::ConfigError, "bisect.mode must be classic or robust");
    c.mode = bisect_mode_from_string(mode);
    read_opt(b, "requery_limit", c.policy.requery_limit, "bisect");
    read_opt(b, "confirm_boundary", c.policy.confirm_boundary, "bisect");
    if (c.policy.requery_limit < 0) fail(ErrorClass::ConfigError, "bisect.requery_limit must be >= 0");
  }

  if (doc.contains("label")) {
    const auto& l = doc["label"];
    detail::check_keys(l, "label", {"confidence_threshold", "exemplar_capacity", "harvest", "repos"});
    read_opt(l, "confidence_threshold", c.label_threshold, "label");
    read_opt(l, "exemplar_capacity", c.exemplar_capacity, "label");
    if (l.contains("harvest")) {
      const auto& h = l["harvest"];
      detail::check_keys(h, "label.harvest",
                         {"min_stars", "activity_window_days", "today", "licences",
                          "pairs_per_repo", "revision"});
      read_opt(h, "min_stars", c.harvest.min_stars, "label.harvest");
      read_opt(h, "activity_window_days", c.harvest.activity_window_days, "label.harvest");
      read_opt(h, "today", c.harvest.today, "label.harvest");
      read_opt(h, "licences", c.harvest.licence_allow_list, "label.harvest");
      read_opt(h, "pairs_per_repo", c.harvest.pairs_per_repo, "label.harvest");
      read_opt(h, "revision", c.harvest.revision, "label.harvest");
    }
    if (l.contains("repos")) {
      if (!l["repos"].is_array()) fail(ErrorClass::ConfigError, "label.repos must be an array");
      for (const auto& r : l["repos"]) {
        detail::check_keys(r, "label.repos[]", {"name", "path", "stars", "last_activity", "licence"});
        RepoDescriptor d;
        std::string path;
        read_opt(r, "name", d.name, "label.repos[]");
        read_opt(r, "path", path, "label.repos[]");
        if (!path.empty()) d.path = detail::resolve_path(base_dir, path);
        read_opt(r, "stars", d.stars, "label.repos[]");
        read_opt(r, "last_activity", d.last_activity, "label.repos[]");
        read_opt(r, "licence", d.licence, "label.repos[]");
        c.repos.push_back(std::move(d));
      }
    }
  }

  if (doc.contains("stores")) {
    const auto& s = doc["stores"];
    detail::check_keys(s, "stores", {"sessions", "samples"});
    std::string sessions, samples;
    read_opt(s, "sessions", sessions, "stores");
    read_opt(s, "samples", samples, "stores");
    if (!sessions.empty()) c.session_dir = sessions;
    if (!samples.empty()) c.sample_dir = samples;
  }
  c.session_dir = detail::resolve_path(base_dir, c.session_dir.string());
  c.sample_dir = detail::resolve_path(base_dir, c.sample_dir.string());

  if (const char* key = std::getenv(kApiKeyEnv); key != nullptr && *key != '\0') c.oracle.api_key = key;
  try {
    c.oracle.validate();
  } catch (const Error& e) {
    fail(ErrorClass::ConfigError, e.what());
  }
  if (c.backend == "http" && c.oracle.endpoint.empty())
    fail(ErrorClass::ConfigError, "oracle.endpoint is required for the http backend");
  if (c.backend == "mock" && c.mock_script.empty())
    fail(ErrorClass::ConfigError, "oracle.mock_script is required for the mock backend");
  return c;
}

inline Config load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorClass::ConfigError, "config not found: " + path.string());
  auto doc = json::parse(read_file(path), nullptr, false);
  if (doc.is_discarded()) fail(ErrorClass::ConfigError, "config is not valid JSON: " + path.string());
  return parse_config(doc, path.parent_path());
}

}  // namespace llm_bisect
