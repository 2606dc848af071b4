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

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace llm_bisect {

/// Every failure the library reports carries one of these classes. The
/// numeric value doubles as the CLI exit status and must stay stable.
enum class ErrorClass : int {
  Internal = 1,
  Usage = 2,

  RepoNotFound = 10,
  RevisionNotFound = 11,
  NotAnAncestor = 12,
  EmptyRange = 13,
  IndexOutOfRange = 14,
  CheckoutFailure = 15,

  BudgetExceeded = 20,
  NoDocumentFound = 21,
  SchemaViolation = 22,

  Timeout = 30,
  TransportError = 31,
  MalformedResponse = 32,
  ScriptExhausted = 33,
  BackendFailure = 34,

  SessionAborted = 40,
  OracleFailure = 41,
  StorageFailure = 42,

  UnknownSample = 50,
  InvalidTransition = 51,
  StaleVersion = 52,
  UnsupportedFormat = 53,
  DuplicateSample = 54,

  NoSteps = 60,
  AllZeroDifferences = 61,

  ConfigError = 70,
};

inline constexpr std::string_view error_class_name(ErrorClass c) noexcept {
  switch (c) {
    case ErrorClass::Internal: return "Internal";
    case ErrorClass::Usage: return "Usage";
    case ErrorClass::RepoNotFound: return "RepoNotFound";
    case ErrorClass::RevisionNotFound: return "RevisionNotFound";
    case ErrorClass::NotAnAncestor: return "NotAnAncestor";
    case ErrorClass::EmptyRange: return "EmptyRange";
    case ErrorClass::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorClass::CheckoutFailure: return "CheckoutFailure";
    case ErrorClass::BudgetExceeded: return "BudgetExceeded";
    case ErrorClass::NoDocumentFound: return "NoDocumentFound";
    case ErrorClass::SchemaViolation: return "SchemaViolation";
    case ErrorClass::Timeout: return "Timeout";
    case ErrorClass::TransportError: return "TransportError";
    case ErrorClass::MalformedResponse: return "MalformedResponse";
    case ErrorClass::ScriptExhausted: return "ScriptExhausted";
    case ErrorClass::BackendFailure: return "BackendFailure";
    case ErrorClass::SessionAborted: return "SessionAborted";
    case ErrorClass::OracleFailure: return "OracleFailure";
    case ErrorClass::StorageFailure: return "StorageFailure";
    case ErrorClass::UnknownSample: return "UnknownSample";
    case ErrorClass::InvalidTransition: return "InvalidTransition";
    case ErrorClass::StaleVersion: return "StaleVersion";
    case ErrorClass::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorClass::DuplicateSample: return "DuplicateSample";
    case ErrorClass::NoSteps: return "NoSteps";
    case ErrorClass::AllZeroDifferences: return "AllZeroDifferences";
    case ErrorClass::ConfigError: return "ConfigError";
  }
  return "Internal";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& message)
      : std::runtime_error(message), cls_(cls) {}

  ErrorClass error_class() const noexcept { return cls_; }
  int exit_code() const noexcept { return static_cast<int>(cls_); }

 private:
  ErrorClass cls_;
};

/// A response document failed validation. `field` is a path such as
/// `bisect_mark` or `sem_edits[0].likelihood`.
class SchemaViolation : public Error {
 public:
  SchemaViolation(std::string field, std::string reason)
      : Error(ErrorClass::SchemaViolation, field + ": " + reason),
        field_(std::move(field)),
        reason_(std::move(reason)) {}

  const std::string& field() const noexcept { return field_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::string field_;
  std::string reason_;
};

[[noreturn]] inline void fail(ErrorClass cls, const std::string& message) {
  throw Error(cls, message);
}

}  // namespace llm_bisect
