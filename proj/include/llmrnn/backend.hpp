#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "llmrnn/domain.hpp"
#include "llmrnn/token_counter.hpp"

namespace llmrnn {

enum class ChatRole { system, user, assistant };
std::string_view to_string(ChatRole role);
ChatRole parse_chat_role(std::string_view text);

struct ChatMessage {
  ChatRole role = ChatRole::user;
  std::string content;
};

/// Decoding parameters are copied from RunConfig and never changed between
/// steps of a run.
struct ChatRequest {
  std::string model_id;
  std::vector<ChatMessage> messages;
  double temperature = 0.7;
  double top_p = 0.9;
  int max_tokens = 4096;

  /// Message contents joined by newlines; what scripts match against and
  /// what the budget guard counts.
  std::string prompt_text() const;
};

ChatRequest make_request(const RunConfig& config, std::vector<ChatMessage> messages);

enum class FinishReason { stop, length, error };
std::string_view to_string(FinishReason reason);
FinishReason parse_finish_reason(std::string_view text);

struct TokenUsage {
  std::size_t prompt_tokens = 0;
  std::size_t completion_tokens = 0;
};

struct ChatResponse {
  std::string text;
  FinishReason finish_reason = FinishReason::stop;
  TokenUsage usage;
  int retries = 0;
  std::int64_t latency_ms = 0;
  std::string backend_id;
  std::string model_id;
};

void to_json(Json& j, const ChatRequest& v);
void from_json(const Json& j, ChatRequest& v);
void to_json(Json& j, const ChatResponse& v);
void from_json(const Json& j, ChatResponse& v);

/// Local prompt budget checked before any call leaves the process.
struct BackendLimits {
  std::shared_ptr<const TokenCounter> counter;
  /// 0 disables the check.
  std::size_t context_limit = 0;
};

/// Chat-completion client. `complete` is safe to call concurrently from
/// independent sequence runs.
class ChatBackend {
 public:
  ChatBackend(std::string id, BackendLimits limits);
  virtual ~ChatBackend() = default;
  ChatBackend(const ChatBackend&) = delete;
  ChatBackend& operator=(const ChatBackend&) = delete;

  /// Throws BudgetError if the prompt exceeds the context limit, before
  /// delegating to the implementation.
  ChatResponse complete(const ChatRequest& request) const;

  const std::string& id() const noexcept { return id_; }
  /// Model name sent on the wire; defaults to the backend id.
  virtual std::string model_name() const { return id_; }
  const BackendLimits& limits() const noexcept { return limits_; }

 protected:
  std::size_t count_tokens(std::string_view text) const;

 private:
  virtual ChatResponse do_complete(const ChatRequest& request) const = 0;

  std::string id_;
  BackendLimits limits_;
};

// ---------------------------------------------------------------------------
// Scripted backend

/// One matcher -> response rule. Regex rules search the whole prompt and may
/// reference capture groups in the response as $1, $2, ...
struct ScriptRule {
  enum class Match { substring, regex };
  Match match = Match::substring;
  std::string pattern;
  std::string response;
  FinishReason finish_reason = FinishReason::stop;
  /// Simulated failure instead of a response: "transport" or an HTTP status.
  std::optional<std::string> error;
  std::shared_ptr<const std::regex> compiled;
};

class ScriptTable {
 public:
  ScriptTable() = default;

  /// Accepts {"rules": [...]} or a bare array of rule objects with keys
  /// match ("substring" | "regex"), pattern, response (string or JSON value,
  /// which is serialized), finish_reason, error.
  static ScriptTable from_json(const Json& json);
  static ScriptTable load(const std::filesystem::path& path);

  ScriptTable& add_substring(std::string pattern, std::string response,
                             FinishReason finish = FinishReason::stop);
  ScriptTable& add_regex(std::string pattern, std::string response,
                         FinishReason finish = FinishReason::stop);
  ScriptTable& add_rule(ScriptRule rule);

  const std::vector<ScriptRule>& rules() const noexcept { return rules_; }

 private:
  std::vector<ScriptRule> rules_;
};

/// First matching rule wins. Pure function of its arguments. Throws
/// NoMatchError with the first 200 characters of the prompt.
ChatResponse scripted_complete(const ChatRequest& request, const ScriptTable& script);

class ScriptedBackend final : public ChatBackend {
 public:
  ScriptedBackend(std::string id, ScriptTable script, BackendLimits limits = {});

  const ScriptTable& script() const noexcept { return script_; }

 private:
  ChatResponse do_complete(const ChatRequest& request) const override;

  ScriptTable script_;
};

// ---------------------------------------------------------------------------
// HTTP backend

/// Retries happen only on transport errors, HTTP 429 and 5xx.
struct RetryPolicy {
  int max_retries = 3;
  std::vector<std::chrono::milliseconds> backoff = {std::chrono::milliseconds(500),
                                                    std::chrono::milliseconds(1000),
                                                    std::chrono::milliseconds(2000)};

  /// Delay before retry number `retry` (0-based); the last entry repeats.
  std::chrono::milliseconds delay(int retry) const;
};

struct HttpBackendOptions {
  /// scheme://host[:port], e.g. https://api.openai.com
  std::string base_url;
  std::string path = "/v1/chat/completions";
  /// Sent on the wire; empty means the backend id.
  std::string model;
  std::string api_key;
  std::chrono::milliseconds timeout{120000};
  RetryPolicy retry;
};

/// OpenAI-compatible chat-completions client.
class HttpBackend final : public ChatBackend {
 public:
  HttpBackend(std::string id, HttpBackendOptions options, BackendLimits limits = {});

  std::string model_name() const override;

 private:
  ChatResponse do_complete(const ChatRequest& request) const override;

  HttpBackendOptions options_;
};

/// Serializes the chat-completions request body.
Json openai_request_body(const ChatRequest& request);
/// Parses the first choice of a chat-completions response body. Refusals are
/// returned as ordinary text. Throws EndpointError on malformed bodies.
ChatResponse parse_openai_response(const Json& body, int status);

// ---------------------------------------------------------------------------
// Cassettes

/// SHA-256 of the canonical request JSON.
std::string request_hash(const ChatRequest& request);

/// Passes calls through and appends {"hash", "request", "response"} lines to
/// a JSONL cassette.
class RecordingBackend final : public ChatBackend {
 public:
  RecordingBackend(std::shared_ptr<const ChatBackend> inner, std::filesystem::path cassette);

  std::string model_name() const override { return inner_->model_name(); }

 private:
  ChatResponse do_complete(const ChatRequest& request) const override;

  std::shared_ptr<const ChatBackend> inner_;
  std::filesystem::path cassette_;
  mutable std::mutex mutex_;
};

/// Answers from a recorded cassette; unknown requests throw CassetteMiss.
class ReplayBackend final : public ChatBackend {
 public:
  ReplayBackend(std::string id, const std::filesystem::path& cassette, BackendLimits limits = {});

  std::size_t size() const noexcept { return responses_.size(); }

 private:
  ChatResponse do_complete(const ChatRequest& request) const override;

  std::map<std::string, ChatResponse> responses_;
};

}  // namespace llmrnn
