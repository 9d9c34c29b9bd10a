#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace llmrnn {

/// Root of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvariantViolation : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// ---- backend ----

class BackendError : public Error {
 public:
  using Error::Error;
};

/// Network failure or timeout that persisted through every retry.
class TransportError : public BackendError {
 public:
  TransportError(std::string message, int attempts)
      : BackendError(std::move(message)), attempts_(attempts) {}
  int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

/// Non-2xx answer from the endpoint.
class EndpointError : public BackendError {
 public:
  EndpointError(int status, std::string body)
      : BackendError("endpoint returned HTTP " + std::to_string(status) + ": " + body),
        status_(status),
        body_(std::move(body)) {}
  int status() const noexcept { return status_; }
  const std::string& body() const noexcept { return body_; }

 private:
  int status_;
  std::string body_;
};

/// The prompt would not fit in the configured context limit; raised before sending.
class BudgetError : public BackendError {
 public:
  BudgetError(std::size_t prompt_tokens, std::size_t limit)
      : BackendError("prompt has " + std::to_string(prompt_tokens) +
                     " tokens, context limit is " + std::to_string(limit)),
        prompt_tokens_(prompt_tokens),
        limit_(limit) {}
  std::size_t prompt_tokens() const noexcept { return prompt_tokens_; }
  std::size_t limit() const noexcept { return limit_; }

 private:
  std::size_t prompt_tokens_;
  std::size_t limit_;
};

/// Scripted backend had no rule for the prompt.
class NoMatchError : public BackendError {
 public:
  explicit NoMatchError(std::string prompt_head)
      : BackendError("no script rule matches prompt: " + prompt_head),
        prompt_head_(std::move(prompt_head)) {}
  const std::string& prompt_head() const noexcept { return prompt_head_; }

 private:
  std::string prompt_head_;
};

/// Replay cassette has no entry for the request hash.
class CassetteMiss : public BackendError {
 public:
  using BackendError::BackendError;
};

/// Missing credentials, unknown backend kind, unreadable script.
class BackendConfigError : public BackendError {
 public:
  using BackendError::BackendError;
};

class JudgeUnavailable : public Error {
 public:
  using Error::Error;
};

// ---- structured output ----

class MissingBinding : public Error {
 public:
  explicit MissingBinding(std::string name)
      : Error("missing binding for placeholder {" + name + "}"), name_(std::move(name)) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

class UnparseableOutput : public Error {
 public:
  UnparseableOutput(std::string raw, std::vector<std::string> stages)
      : Error("model output could not be parsed as JSON"),
        raw_(std::move(raw)),
        stages_(std::move(stages)) {}
  const std::string& raw() const noexcept { return raw_; }
  const std::vector<std::string>& stages_attempted() const noexcept { return stages_; }

 private:
  std::string raw_;
  std::vector<std::string> stages_;
};

class SchemaViolation : public Error {
 public:
  SchemaViolation(std::string path, std::string reason)
      : Error(path + ": " + reason), path_(std::move(path)), reason_(std::move(reason)) {}
  const std::string& path() const noexcept { return path_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::string path_;
  std::string reason_;
};

// ---- recurrence / datasets / evaluation ----

class ObservationTooLarge : public Error {
 public:
  using Error::Error;
};

class DatasetError : public Error {
 public:
  using Error::Error;
};

class EmptyVisit : public DatasetError {
 public:
  using DatasetError::DatasetError;
};

class InsufficientHistory : public DatasetError {
 public:
  using DatasetError::DatasetError;
};

class MalformedRecord : public DatasetError {
 public:
  using DatasetError::DatasetError;
};

class EmptyInput : public Error {
 public:
  using Error::Error;
};

class LengthMismatch : public Error {
 public:
  using Error::Error;
};

class NonFiniteValue : public Error {
 public:
  using Error::Error;
};

}  // namespace llmrnn
