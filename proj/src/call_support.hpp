#pragma once

// Shared plumbing for structured model calls: one bounded parse retry and a
// CallRecord per request.

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "llmrnn/backend.hpp"
#include "llmrnn/errors.hpp"
#include "llmrnn/structured_output.hpp"

namespace llmrnn::detail {

inline constexpr std::string_view kJsonReminder = "Return only valid JSON.";

inline CallRecord make_call_record(std::string purpose, const ChatBackend& backend,
                                   const ChatRequest& request, const ChatResponse& response) {
  CallRecord record;
  record.purpose = std::move(purpose);
  record.backend_id = backend.id();
  record.model_id = request.model_id;
  record.temperature = request.temperature;
  record.top_p = request.top_p;
  record.max_tokens = request.max_tokens;
  record.finish_reason = std::string(to_string(response.finish_reason));
  record.retries = response.retries;
  record.latency_ms = response.latency_ms;
  record.prompt_tokens = response.usage.prompt_tokens;
  record.completion_tokens = response.usage.completion_tokens;
  return record;
}

template <typename T>
struct StructuredResult {
  std::optional<T> value;
  std::optional<std::string> error;
  std::vector<std::string> stages;
  int parse_retries = 0;
  std::string raw;
};

/// Sends `request`, extracts JSON and hands it to `interpret`, which may
/// throw UnparseableOutput or SchemaViolation. On such a failure the request
/// is re-sent once with a JSON reminder appended (when `allow_retry`).
/// Backend errors propagate.
template <typename T, typename Interpret>
StructuredResult<T> call_structured(const ChatBackend& backend, ChatRequest request,
                                    std::string_view purpose, bool allow_retry,
                                    std::vector<CallRecord>& calls, Interpret&& interpret) {
  request.model_id = backend.model_name();
  StructuredResult<T> result;
  const int attempts = allow_retry ? 2 : 1;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) {
      request.messages.back().content += "\n\n";
      request.messages.back().content += kJsonReminder;
      ++result.parse_retries;
    }
    const ChatResponse response = backend.complete(request);
    std::string name(purpose);
    if (attempt > 0) name += "_retry";
    calls.push_back(make_call_record(std::move(name), backend, request, response));
    result.raw = response.text;
    try {
      ExtractedJson extracted =
          extract_json(response.text, response.finish_reason == FinishReason::length);
      result.value = interpret(extracted, response);
      result.stages = std::move(extracted.stages);
      result.error.reset();
      return result;
    } catch (const UnparseableOutput& e) {
      result.stages = e.stages_attempted();
      result.error = std::string("unparseable output: ") + e.what();
    } catch (const SchemaViolation& e) {
      result.stages.clear();
      result.error = std::string("schema violation: ") + e.what();
    }
  }
  return result;
}

}  // namespace llmrnn::detail
