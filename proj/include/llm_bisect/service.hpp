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

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "llm_bisect/error.hpp"
#include "llm_bisect/label.hpp"
#include "llm_bisect/session_store.hpp"

namespace llm_bisect {

struct ApiResponse {
  int status = 200;
  std::string body;  // JSON
};

inline int http_status_for(ErrorClass c) {
  switch (c) {
    case ErrorClass::UnknownSample: return 404;
    case ErrorClass::StaleVersion:
    case ErrorClass::InvalidTransition: return 409;
    case ErrorClass::SchemaViolation: return 422;
    case ErrorClass::Usage: return 400;
    default: return 500;
  }
}

inline ordered_json session_summary(const StoredSession& s) {
  return ordered_json{{"session_id", s.id},
                      {"mode", to_string(s.session.mode)},
                      {"target_behaviour", s.session.target_behaviour},
                      {"steps", s.session.steps.size()},
                      {"probes", s.session.probe_count()},
                      {"result", to_json(s.session.result)},
                      {"metadata", s.metadata}};
}

inline ordered_json session_detail(const StoredSession& s) {
  const auto& seq = s.session.sequence;
  ordered_json j = session_summary(s);
  ordered_json commits = ordered_json::array();
  for (const auto& c : seq.commits()) commits.push_back(c.str());
  j["commits"] = std::move(commits);
  j["known_good"] = seq.known_good();
  j["known_bad"] = seq.known_bad();
  ordered_json steps = ordered_json::array();
  for (const auto& st : s.session.steps) {
    steps.push_back(ordered_json{{"step_number", st.step_number},
                                 {"commit_index", st.commit_index},
                                 {"commit", seq[st.commit_index].str()},
                                 {"kind", to_string(st.kind)},
                                 {"elapsed", st.elapsed},
                                 {"verdict", to_json(st.verdict)}});
  }
  j["steps"] = std::move(steps);
  auto result_commit = [&](std::size_t i) { return seq[i].str(); };
  if (s.session.result.is_localized()) j["result"]["commit"] = result_commit(s.session.result.hi);
  if (s.session.result.is_range()) {
    j["result"]["lo_commit"] = result_commit(s.session.result.lo);
    j["result"]["hi_commit"] = result_commit(s.session.result.hi);
  }
  if (!s.session.error_message.empty()) j["error_message"] = s.session.error_message;
  return j;
}

/// Transport-free request handling so the API is testable without sockets.
/// The service reads both stores and mutates only through `review`.
class ApiService {
 public:
  ApiService(SessionStore& sessions, SampleStore& samples) : sessions_(sessions), samples_(samples) {}

  ApiResponse handle(std::string_view method, std::string_view path, std::string_view body = {}) {
    try {
      return route(method, split_path(path), body);
    } catch (const SchemaViolation& e) {
      ordered_json j{{"error", "SchemaViolation"}, {"message", e.what()},
                     {"field", e.field()},       {"reason", e.reason()}};
      return {422, j.dump()};
    } catch (const Error& e) {
      return error(http_status_for(e.error_class()), error_class_name(e.error_class()), e.what());
    } catch (const std::exception& e) {
      return error(500, "Internal", e.what());
    }
  }

 private:
  static std::vector<std::string> split_path(std::string_view path) {
    if (auto q = path.find('?'); q != std::string_view::npos) path = path.substr(0, q);
    std::vector<std::string> parts;
    std::size_t i = 0;
    while (i < path.size()) {
      auto j = path.find('/', i);
      if (j == std::string_view::npos) j = path.size();
      if (j > i) parts.emplace_back(path.substr(i, j - i));
      i = j + 1;
    }
    return parts;
  }

  static ApiResponse error(int status, std::string_view cls, std::string_view msg) {
    return {status, ordered_json{{"error", cls}, {"message", msg}}.dump()};
  }
  static ApiResponse ok(const ordered_json& j) { return {200, j.dump()}; }

  ApiResponse route(std::string_view method, const std::vector<std::string>& p,
                    std::string_view body) {
    if (p.size() < 2 || p[0] != "api") return error(404, "NotFound", "no such endpoint");
    const bool get = method == "GET", post = method == "POST";
    if (p[1] == "sessions" && p.size() == 2) {
      if (!get) return error(405, "MethodNotAllowed", "use GET");
      ordered_json list = ordered_json::array();
      for (const auto& id : sessions_.list()) list.push_back(session_summary(sessions_.load(id)));
      return ok(list);
    }
    if (p[1] == "sessions" && p.size() == 3) {
      if (!get) return error(405, "MethodNotAllowed", "use GET");
      if (!sessions_.contains(p[2])) return error(404, "UnknownSession", "no session '" + p[2] + "'");
      return ok(session_detail(sessions_.load(p[2])));
    }
    if (p[1] == "queue" && p.size() == 2) {
      if (!get) return error(405, "MethodNotAllowed", "use GET");
      std::vector<LabeledSample> pending;
      for (auto& s : samples_.all())
        if (s.review_state == ReviewState::Pending) pending.push_back(std::move(s));
      std::stable_sort(pending.begin(), pending.end(), [](const auto& a, const auto& b) {
        return a.machine_confidence < b.machine_confidence;
      });
      ordered_json list = ordered_json::array();
      for (const auto& s : pending) list.push_back(to_json(s));
      return ok(list);
    }
    if (p[1] == "samples" && p.size() == 3) {
      if (!get) return error(405, "MethodNotAllowed", "use GET");
      if (!SampleStore::valid_id(p[2])) return error(404, "UnknownSample", "no sample '" + p[2] + "'");
      return ok(to_json(samples_.get(p[2])));
    }
    if (p[1] == "samples" && p.size() == 4 && p[3] == "review") {
      if (!post) return error(405, "MethodNotAllowed", "use POST");
      return review_request(p[2], body);
    }
    if (p[1] == "metrics" && p.size() == 2) {
      if (!get) return error(405, "MethodNotAllowed", "use GET");
      return ok(metrics());
    }
    return error(404, "NotFound", "no such endpoint");
  }

  ApiResponse review_request(const std::string& id, std::string_view body) {
    auto j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return error(400, "Usage", "body must be a JSON object");
    if (!j.contains("action") || !j["action"].is_string())
      return error(400, "Usage", "\"action\" is required");
    if (!j.contains("version") || !j["version"].is_number_unsigned())
      return error(400, "Usage", "\"version\" must be a non-negative integer");
    auto action = review_action_from_string(j["action"].get<std::string>());
    std::string reviewer = j.value("reviewer", std::string{});
    const json* correction = j.contains("corrected_response") ? &j["corrected_response"] : nullptr;
    if (!SampleStore::valid_id(id)) return error(404, "UnknownSample", "no sample '" + id + "'");
    auto updated = review_document(samples_, id, action, reviewer,
                                   j["version"].get<std::uint64_t>(), correction);
    return ok(to_json(updated));
  }

  ordered_json metrics() const {
    std::map<std::string, std::size_t> states;
    for (auto st : {ReviewState::AutoAccepted, ReviewState::Pending, ReviewState::Accepted,
                    ReviewState::Corrected, ReviewState::Discarded})
      states[std::string(to_string(st))] = 0;
    std::size_t total = 0;
    for (const auto& s : samples_.all()) {
      ++states[std::string(to_string(s.review_state))];
      ++total;
    }
    std::map<std::string, std::size_t> results{{"localized", 0}, {"range", 0}, {"aborted", 0}};
    std::size_t steps = 0, sessions = 0;
    double wall = 0.0;
    for (const auto& id : sessions_.list()) {
      auto s = sessions_.load(id);
      ++results[std::string(to_string(s.session.result.kind))];
      steps += s.session.steps.size();
      wall += s.session.wall_time();
      ++sessions;
    }
    ordered_json j{{"samples", {{"total", total}, {"by_state", states}}},
                   {"sessions", {{"total", sessions}, {"by_result", results}, {"steps", steps}}}};
    j["sessions"]["avg_time_per_step"] = steps ? ordered_json(wall / static_cast<double>(steps))
                                               : ordered_json(nullptr);
    return j;
  }

  SessionStore& sessions_;
  SampleStore& samples_;
};

/// Routes every method under /api/ to `api`.
inline void install_routes(httplib::Server& server, ApiService& api) {
  auto handler = [&api](const httplib::Request& req, httplib::Response& res) {
    auto r = api.handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  const char* pattern = R"(/api/.*)";
  server.Get(pattern, handler);
  server.Post(pattern, handler);
  server.Put(pattern, handler);
  server.Patch(pattern, handler);
  server.Delete(pattern, handler);
}

/// Binds `host:port` and serves the API until `server.stop()` is called.
/// Returns false if the address could not be bound.
inline bool serve(httplib::Server& server, ApiService& api, const std::string& host, int port) {
  install_routes(server, api);
  return server.listen(host, port);
}

}  // namespace llm_bisect
