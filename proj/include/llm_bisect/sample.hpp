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

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "llm_bisect/error.hpp"
#include "llm_bisect/response.hpp"

namespace llm_bisect {

enum class ReviewState { AutoAccepted, Pending, Accepted, Corrected, Discarded };

inline std::string_view to_string(ReviewState s) {
  switch (s) {
    case ReviewState::AutoAccepted: return "auto-accepted";
    case ReviewState::Pending: return "pending";
    case ReviewState::Accepted: return "accepted";
    case ReviewState::Corrected: return "corrected";
    case ReviewState::Discarded: return "discarded";
  }
  return "pending";
}

inline ReviewState review_state_from_string(std::string_view s) {
  for (auto st : {ReviewState::AutoAccepted, ReviewState::Pending, ReviewState::Accepted,
                  ReviewState::Corrected, ReviewState::Discarded}) {
    if (to_string(st) == s) return st;
  }
  fail(ErrorClass::StorageFailure, "unknown review state '" + std::string(s) + "'");
}

struct Provenance {
  std::string repo;
  std::string commit;
  std::string parent;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

/// One diff with its machine label and review history.
struct LabeledSample {
  std::string sample_id;
  std::string diff_text;
  std::string target_behaviour;
  std::optional<CotResponse> machine_response;  // absent when the oracle failed
  double machine_confidence = 0.0;
  ReviewState review_state = ReviewState::Pending;
  std::optional<CotResponse> corrected_response;
  std::string category;
  Provenance provenance;
  std::uint64_t version = 1;
  std::string reviewer;
  std::string note;

  /// The label a consumer should trust: the correction if there is one.
  const CotResponse* effective_response() const noexcept {
    if (corrected_response) return &*corrected_response;
    if (machine_response) return &*machine_response;
    return nullptr;
  }

  friend bool operator==(const LabeledSample&, const LabeledSample&) = default;
};

inline constexpr int kSampleFormatVersion = 1;

inline ordered_json to_json(const LabeledSample& s) {
  ordered_json j;
  j["format_version"] = kSampleFormatVersion;
  j["sample_id"] = s.sample_id;
  j["target_behaviour"] = s.target_behaviour;
  j["category"] = s.category;
  j["provenance"] = {{"repo", s.provenance.repo},
                     {"commit", s.provenance.commit},
                     {"parent", s.provenance.parent}};
  j["review_state"] = to_string(s.review_state);
  j["version"] = s.version;
  j["machine_confidence"] = s.machine_confidence;
  j["machine_response"] = s.machine_response ? to_json(*s.machine_response) : ordered_json(nullptr);
  j["corrected_response"] =
      s.corrected_response ? to_json(*s.corrected_response) : ordered_json(nullptr);
  j["reviewer"] = s.reviewer;
  j["note"] = s.note;
  j["diff_text"] = s.diff_text;
  return j;
}

inline LabeledSample sample_from_json(const json& j) {
  try {
    LabeledSample s;
    s.sample_id = j.at("sample_id").get<std::string>();
    s.target_behaviour = j.at("target_behaviour").get<std::string>();
    s.category = j.at("category").get<std::string>();
    const auto& p = j.at("provenance");
    s.provenance = {p.at("repo").get<std::string>(), p.at("commit").get<std::string>(),
                    p.value("parent", std::string{})};
    s.review_state = review_state_from_string(j.at("review_state").get<std::string>());
    s.version = j.at("version").get<std::uint64_t>();
    s.machine_confidence = j.at("machine_confidence").get<double>();
    if (!j.at("machine_response").is_null())
      s.machine_response = response_from_json(j.at("machine_response"), false);
    if (!j.at("corrected_response").is_null())
      s.corrected_response = response_from_json(j.at("corrected_response"), false);
    s.reviewer = j.value("reviewer", std::string{});
    s.note = j.value("note", std::string{});
    s.diff_text = j.at("diff_text").get<std::string>();
    return s;
  } catch (const json::exception& e) {
    fail(ErrorClass::StorageFailure, std::string("malformed sample record: ") + e.what());
  }
}

}  // namespace llm_bisect
