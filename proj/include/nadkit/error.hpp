// Copyright 2026 The nadkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace nadkit {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed block text. `line` is 1-based and relative to the parsed text.
class ParseError : public Error {
 public:
  ParseError(int line, std::string reason)
      : Error("line " + std::to_string(line) + ": " + reason),
        line_(line),
        reason_(std::move(reason)) {}

  int line() const noexcept { return line_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  int line_;
  std::string reason_;
};

class EvalError : public Error {
 public:
  enum class Kind { kInexactDivision, kDivisionByZero, kOverflow };

  EvalError(Kind kind, std::string what) : Error(std::move(what)), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

class SizeLimitExceeded : public Error {
 public:
  using Error::Error;
};

class UnknownParent : public Error {
 public:
  using Error::Error;
};

class NoTrainedNodes : public Error {
 public:
  NoTrainedNodes() : Error("tree has no trained node") {}
};

class EmptyStore : public Error {
 public:
  EmptyStore() : Error("vector store is empty") {}
};

/// The LLM broke the reply protocol (missing marker or tags) twice in a row.
class MalformedResponse : public Error {
 public:
  using Error::Error;
};

class ProviderError : public Error {
 public:
  using Error::Error;
};

/// Replay client received a request that no transcript record answers.
class ReplayMismatch : public Error {
 public:
  using Error::Error;
};

class NoBlockFound : public Error {
 public:
  NoBlockFound() : Error("reply contains no ##name## block header") {}
};

class BindingError : public Error {
 public:
  using Error::Error;
};

class Infeasible : public Error {
 public:
  using Error::Error;
};

class UnknownBackend : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace nadkit
