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

#include <httplib.h>

#include <chrono>
#include <string>

#include "llm_bisect/error.hpp"
#include "llm_bisect/oracle.hpp"

namespace llm_bisect {

/// Chat-completions client speaking the common JSON wire format:
/// POST {endpoint}/chat/completions with model, messages and temperature.
class HttpBackend final : public CompletionBackend {
 public:
  explicit HttpBackend(OracleConfig config) : config_(std::move(config)) {
    split_endpoint(config_.endpoint, origin_, base_path_);
  }

  std::string complete(const ChatRequest& request) override {
    httplib::Client client(origin_);
    auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
        std::chrono::duration<double>(config_.timeout_seconds));
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

    json body{{"model", request.model},
              {"temperature", request.temperature},
              {"messages", json::array({{{"role", "user"}, {"content", request.prompt}}})}};
    auto start = std::chrono::steady_clock::now();
    auto res = client.Post(base_path_ + "/chat/completions", headers, body.dump(), "application/json");
    if (!res) {
      auto err = res.error();
      // httplib also reports a refused connection as a read failure.
      double waited = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      bool timed_out = err == httplib::Error::ConnectionTimeout ||
                       (err == httplib::Error::Read && waited >= 0.9 * config_.timeout_seconds);
      if (timed_out) fail(ErrorClass::Timeout, "request timed out: " + httplib::to_string(err));
      fail(ErrorClass::TransportError, "request failed: " + httplib::to_string(err));
    }
    if (res->status == 429 || res->status >= 500)
      fail(ErrorClass::TransportError, "backend returned HTTP " + std::to_string(res->status));
    if (res->status != 200)
      fail(ErrorClass::BackendFailure, "backend returned HTTP " + std::to_string(res->status));

    auto doc = json::parse(res->body, nullptr, false);
    if (doc.is_discarded() || !doc.is_object() || !doc.contains("choices") ||
        !doc["choices"].is_array() || doc["choices"].empty()) {
      fail(ErrorClass::MalformedResponse, "completion body has no choices");
    }
    const auto& choice = doc["choices"][0];
    if (!choice.contains("message") || !choice["message"].contains("content") ||
        !choice["message"]["content"].is_string()) {
      fail(ErrorClass::MalformedResponse, "completion choice has no message content");
    }
    return choice["message"]["content"].get<std::string>();
  }

  const std::string& origin() const noexcept { return origin_; }
  const std::string& base_path() const noexcept { return base_path_; }

  /// "https://host:port/v1/" -> ("https://host:port", "/v1").
  static void split_endpoint(const std::string& endpoint, std::string& origin, std::string& path) {
    auto scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos)
      fail(ErrorClass::ConfigError, "endpoint must include a scheme: '" + endpoint + "'");
    auto scheme = endpoint.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https")
      fail(ErrorClass::ConfigError, "endpoint scheme must be http or https");
    auto slash = endpoint.find('/', scheme_end + 3);
    origin = endpoint.substr(0, slash);
    path = slash == std::string::npos ? std::string{} : endpoint.substr(slash);
    while (!path.empty() && path.back() == '/') path.pop_back();
  }

 private:
  OracleConfig config_;
  std::string origin_;
  std::string base_path_;
};

}  // namespace llm_bisect
