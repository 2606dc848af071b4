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
#include <chrono>
#include <cmath>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "llm_bisect/error.hpp"
#include "llm_bisect/prompt.hpp"
#include "llm_bisect/response.hpp"
#include "llm_bisect/util.hpp"

namespace llm_bisect {

struct OracleConfig {
  std::string endpoint;
  std::string model_name;
  int samples_k = 3;
  std::optional<double> temperature;  // unset: 0.7 when sampling k > 1, else 0
  double confidence_threshold = 0.8;
  double timeout_seconds = 60.0;
  int retries = 2;
  double backoff_seconds = 0.5;  // doubled after each failed attempt
  std::string api_key;

  void validate() const {
    if (samples_k <= 0 || samples_k % 2 == 0)
      fail(ErrorClass::ConfigError, "samples_k must be an odd positive integer");
    if (!(confidence_threshold >= 0.0 && confidence_threshold <= 1.0))
      fail(ErrorClass::ConfigError, "confidence_threshold must lie in [0, 1]");
    if (!(timeout_seconds > 0.0)) fail(ErrorClass::ConfigError, "timeout must be positive");
    if (retries < 0) fail(ErrorClass::ConfigError, "retries must be non-negative");
    if (backoff_seconds < 0.0) fail(ErrorClass::ConfigError, "backoff must be non-negative");
  }

  double effective_temperature() const {
    if (temperature) return *temperature;
    return samples_k > 1 ? 0.7 : 0.0;
  }
};

enum class Mark { Good, Bad, Skip };
enum class VerdictReason { Consensus, BelowThreshold, CompileError, Tie, BackendFailure };

inline std::string_view to_string(Mark m) {
  switch (m) {
    case Mark::Good: return "good";
    case Mark::Bad: return "bad";
    case Mark::Skip: return "skip";
  }
  return "skip";
}

inline std::string_view to_string(VerdictReason r) {
  switch (r) {
    case VerdictReason::Consensus: return "consensus";
    case VerdictReason::BelowThreshold: return "below-threshold";
    case VerdictReason::CompileError: return "compile-error";
    case VerdictReason::Tie: return "tie";
    case VerdictReason::BackendFailure: return "backend-failure";
  }
  return "backend-failure";
}

inline Mark mark_from_string(std::string_view s) {
  for (auto m : {Mark::Good, Mark::Bad, Mark::Skip})
    if (to_string(m) == s) return m;
  fail(ErrorClass::StorageFailure, "unknown mark '" + std::string(s) + "'");
}

inline VerdictReason verdict_reason_from_string(std::string_view s) {
  for (auto r : {VerdictReason::Consensus, VerdictReason::BelowThreshold,
                 VerdictReason::CompileError, VerdictReason::Tie, VerdictReason::BackendFailure})
    if (to_string(r) == s) return r;
  fail(ErrorClass::StorageFailure, "unknown verdict reason '" + std::string(s) + "'");
}

struct Verdict {
  Mark mark = Mark::Skip;
  double confidence = 0.0;
  std::vector<CotResponse> samples;
  double latency = 0.0;
  VerdictReason reason = VerdictReason::BackendFailure;
  std::string prompt_hash;

  static Verdict good(double confidence = 1.0) {
    return {Mark::Good, confidence, {}, 0.0, VerdictReason::Consensus, {}};
  }
  static Verdict bad(double confidence = 1.0) {
    return {Mark::Bad, confidence, {}, 0.0, VerdictReason::Consensus, {}};
  }
  static Verdict skip(VerdictReason why) { return {Mark::Skip, 0.0, {}, 0.0, why, {}}; }

  friend bool operator==(const Verdict&, const Verdict&) = default;
};

/// Self-consistency vote over the collected samples. Samples are sorted into
/// canonical order first, so the result depends only on the multiset.
inline Verdict aggregate(std::vector<CotResponse> samples, double confidence_threshold) {
  std::sort(samples.begin(), samples.end(), [](const CotResponse& a, const CotResponse& b) {
    return serialize(a) < serialize(b);
  });
  Verdict v;
  const auto n = samples.size();
  v.samples = std::move(samples);
  if (n == 0) return Verdict::skip(VerdictReason::BackendFailure);

  const auto& s = v.samples;
  auto compile_errors = static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [](const CotResponse& r) { return r.has_compile_error; }));
  if (compile_errors * 2 > n) {
    v.mark = Mark::Skip;
    v.reason = VerdictReason::CompileError;
    v.confidence = static_cast<double>(compile_errors) / static_cast<double>(n);
    return v;
  }

  auto bad = static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [](const CotResponse& r) { return r.marks_bad(); }));
  auto good = n - bad;
  if (good == bad) {
    v.mark = Mark::Skip;
    v.reason = VerdictReason::Tie;
    v.confidence = 0.0;
    return v;
  }
  const bool majority_bad = bad > good;
  std::int64_t sum = 0;
  for (const auto& r : s)
    if (r.marks_bad() == majority_bad) sum += r.behaviour_confidence;
  const auto votes = majority_bad ? bad : good;
  v.confidence = static_cast<double>(sum) / (static_cast<double>(votes) * 100.0);
  if (v.confidence < confidence_threshold) {
    v.mark = Mark::Skip;
    v.reason = VerdictReason::BelowThreshold;
  } else {
    v.mark = majority_bad ? Mark::Bad : Mark::Good;
    v.reason = VerdictReason::Consensus;
  }
  return v;
}

struct ChatRequest {
  std::string model;
  std::string prompt;
  double temperature = 0.0;
};

/// A chat-completion provider. Implementations throw `Error` with class
/// Timeout or TransportError on delivery failures.
class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  virtual std::string complete(const ChatRequest& request) = 0;
};

/// Replays canned outputs in order and records every prompt it receives.
class MockBackend final : public CompletionBackend {
 public:
  struct Failure {
    ErrorClass cls;
  };
  using Entry = std::variant<std::string, Failure>;

  explicit MockBackend(std::vector<Entry> script) : script_(std::move(script)) {}
  MockBackend(MockBackend&& other) noexcept
      : script_(std::move(other.script_)), next_(other.next_), received_(std::move(other.received_)) {}

  static MockBackend from_outputs(std::vector<std::string> outputs) {
    std::vector<Entry> script(outputs.begin(), outputs.end());
    return MockBackend(std::move(script));
  }

  /// Fixture layout: {"format": "llm-bisect-mock", "version": 1, "outputs": [...]}.
  /// Each output is raw model text, a response object (serialized verbatim),
  /// or {"$error": "timeout" | "transport"}.
  static MockBackend from_json(const json& doc) {
    if (!doc.is_object() || !doc.contains("outputs") || !doc["outputs"].is_array())
      fail(ErrorClass::ConfigError, "mock script needs an \"outputs\" array");
    std::vector<Entry> script;
    for (const auto& o : doc["outputs"]) {
      if (o.is_string()) {
        script.emplace_back(o.get<std::string>());
      } else if (o.is_object() && o.contains("$error")) {
        auto kind = o["$error"].get<std::string>();
        if (kind == "timeout") script.emplace_back(Failure{ErrorClass::Timeout});
        else if (kind == "transport") script.emplace_back(Failure{ErrorClass::TransportError});
        else fail(ErrorClass::ConfigError, "unknown scripted error '" + kind + "'");
      } else {
        script.emplace_back(o.dump());
      }
    }
    return MockBackend(std::move(script));
  }

  static MockBackend from_file(const std::filesystem::path& path) {
    auto doc = json::parse(read_file(path), nullptr, false);
    if (doc.is_discarded()) fail(ErrorClass::ConfigError, "mock script is not JSON: " + path.string());
    return from_json(doc);
  }

  std::string complete(const ChatRequest& request) override {
    std::lock_guard lock(mu_);
    received_.push_back(request.prompt);
    if (next_ >= script_.size()) {
      fail(ErrorClass::ScriptExhausted,
           "mock script exhausted after " + std::to_string(script_.size()) + " outputs");
    }
    const Entry& e = script_[next_++];
    if (auto* f = std::get_if<Failure>(&e)) fail(f->cls, "scripted failure");
    return std::get<std::string>(e);
  }

  std::vector<std::string> received_prompts() const {
    std::lock_guard lock(mu_);
    return received_;
  }
  std::size_t remaining() const {
    std::lock_guard lock(mu_);
    return script_.size() - next_;
  }

 private:
  mutable std::mutex mu_;
  std::vector<Entry> script_;
  std::size_t next_ = 0;
  std::vector<std::string> received_;
};

/// One request, parsed. Each retry re-requests. Transport failures back off
/// exponentially; an unparseable answer is retried immediately.
inline CotResponse query_once(const OracleConfig& config, CompletionBackend& backend,
                              const PromptTemplate& prompt) {
  config.validate();
  ChatRequest request{config.model_name, prompt.text, config.effective_temperature()};
  ErrorClass last = ErrorClass::MalformedResponse;
  std::string last_message;
  double backoff = config.backoff_seconds;
  for (int attempt = 0; attempt <= config.retries; ++attempt) {
    try {
      return parse_response(backend.complete(request));
    } catch (const Error& e) {
      switch (e.error_class()) {
        case ErrorClass::NoDocumentFound:
        case ErrorClass::SchemaViolation:
        case ErrorClass::MalformedResponse:
          last = ErrorClass::MalformedResponse;
          break;
        case ErrorClass::Timeout:
        case ErrorClass::TransportError:
          last = e.error_class();
          if (attempt < config.retries && backoff > 0.0) {
            std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
            backoff *= 2.0;
          }
          break;
        default:
          throw;
      }
      last_message = e.what();
    }
  }
  fail(last, "no usable response after " + std::to_string(config.retries + 1) +
                 " attempts: " + last_message);
}

/// Up to samples_k responses reduced to one verdict. Failed samples are
/// dropped; if every sample fails the verdict is Skip(backend-failure).
inline Verdict classify(const OracleConfig& config, CompletionBackend& backend,
                        const PromptTemplate& prompt) {
  config.validate();
  auto start = std::chrono::steady_clock::now();
  std::vector<CotResponse> samples;
  for (int i = 0; i < config.samples_k; ++i) {
    try {
      samples.push_back(query_once(config, backend, prompt));
    } catch (const Error& e) {
      switch (e.error_class()) {
        case ErrorClass::Timeout:
        case ErrorClass::TransportError:
        case ErrorClass::MalformedResponse:
        case ErrorClass::ScriptExhausted:
          break;
        default:
          throw;
      }
    }
  }
  Verdict v = aggregate(std::move(samples), config.confidence_threshold);
  v.latency = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  v.prompt_hash = prompt.hash();
  return v;
}

inline ordered_json to_json(const Verdict& v) {
  ordered_json samples = ordered_json::array();
  for (const auto& s : v.samples) samples.push_back(to_json(s));
  return ordered_json{{"mark", to_string(v.mark)},
                      {"confidence", v.confidence},
                      {"reason", to_string(v.reason)},
                      {"latency", v.latency},
                      {"prompt_hash", v.prompt_hash},
                      {"samples", std::move(samples)}};
}

inline Verdict verdict_from_json(const json& j) {
  Verdict v;
  v.mark = mark_from_string(j.at("mark").get<std::string>());
  v.confidence = j.at("confidence").get<double>();
  v.reason = verdict_reason_from_string(j.at("reason").get<std::string>());
  v.latency = j.value("latency", 0.0);
  v.prompt_hash = j.value("prompt_hash", std::string{});
  for (const auto& s : j.at("samples")) v.samples.push_back(response_from_json(s, false));
  return v;
}

}  // namespace llm_bisect
