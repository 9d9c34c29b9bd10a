#include <chrono>
#include <thread>

#include "httplib.h"
#include "llmrnn/backend.hpp"
#include "llmrnn/errors.hpp"

namespace llmrnn {

std::chrono::milliseconds RetryPolicy::delay(int retry) const {
  if (backoff.empty()) return std::chrono::milliseconds(0);
  const auto index = static_cast<std::size_t>(retry);
  return index < backoff.size() ? backoff[index] : backoff.back();
}

Json openai_request_body(const ChatRequest& request) {
  Json messages = Json::array();
  for (const auto& m : request.messages) {
    messages.push_back(Json{{"role", to_string(m.role)}, {"content", m.content}});
  }
  return Json{{"model", request.model_id},
              {"messages", std::move(messages)},
              {"temperature", request.temperature},
              {"top_p", request.top_p},
              {"max_tokens", request.max_tokens}};
}

ChatResponse parse_openai_response(const Json& body, int status) {
  auto malformed = [&](const std::string& why) {
    return EndpointError(status, "malformed chat-completions response (" + why + ")");
  };
  if (!body.is_object() || !body.contains("choices") || !body.at("choices").is_array() ||
      body.at("choices").empty()) {
    throw malformed("no choices");
  }
  const Json& choice = body.at("choices").at(0);
  if (!choice.contains("message") || !choice.at("message").is_object()) {
    throw malformed("choice has no message");
  }
  const Json& message = choice.at("message");
  ChatResponse out;
  if (message.contains("content") && message.at("content").is_string()) {
    out.text = message.at("content").get<std::string>();
  } else if (message.contains("refusal") && message.at("refusal").is_string()) {
    out.text = message.at("refusal").get<std::string>();
  }
  const std::string finish =
      choice.contains("finish_reason") && choice.at("finish_reason").is_string()
          ? choice.at("finish_reason").get<std::string>()
          : "stop";
  if (finish == "stop") {
    out.finish_reason = FinishReason::stop;
  } else if (finish == "length") {
    out.finish_reason = FinishReason::length;
  } else {
    out.finish_reason = FinishReason::error;
  }
  if (body.contains("usage") && body.at("usage").is_object()) {
    const Json& usage = body.at("usage");
    out.usage.prompt_tokens = usage.value("prompt_tokens", std::size_t{0});
    out.usage.completion_tokens = usage.value("completion_tokens", std::size_t{0});
  }
  if (body.contains("model") && body.at("model").is_string()) {
    out.model_id = body.at("model").get<std::string>();
  }
  return out;
}

HttpBackend::HttpBackend(std::string id, HttpBackendOptions options, BackendLimits limits)
    : ChatBackend(std::move(id), std::move(limits)), options_(std::move(options)) {
  if (options_.base_url.empty()) throw BackendConfigError("http backend '" + this->id() +
                                                          "' has no base_url");
}

std::string HttpBackend::model_name() const {
  return options_.model.empty() ? id() : options_.model;
}

ChatResponse HttpBackend::do_complete(const ChatRequest& request) const {
  const std::string payload = openai_request_body(request).dump();
  httplib::Headers headers;
  if (!options_.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + options_.api_key);
  }
  const auto started = std::chrono::steady_clock::now();
  const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout);
  const auto micros =
      std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout - seconds);

  for (int attempt = 0;; ++attempt) {
    const bool can_retry = attempt < options_.retry.max_retries;
    httplib::Client client(options_.base_url);
    client.set_connection_timeout(seconds.count(), micros.count());
    client.set_read_timeout(seconds.count(), micros.count());
    client.set_write_timeout(seconds.count(), micros.count());
    auto result = client.Post(options_.path, headers, payload, "application/json");

    if (!result) {
      if (can_retry) {
        std::this_thread::sleep_for(options_.retry.delay(attempt));
        continue;
      }
      throw TransportError("request to " + options_.base_url + options_.path +
                               " failed after " + std::to_string(attempt + 1) +
                               " attempts: " + httplib::to_string(result.error()),
                           attempt + 1);
    }
    const int status = result->status;
    if (status == 429 || status >= 500) {
      if (can_retry) {
        std::this_thread::sleep_for(options_.retry.delay(attempt));
        continue;
      }
      throw EndpointError(status, result->body);
    }
    if (status < 200 || status >= 300) throw EndpointError(status, result->body);

    Json body;
    try {
      body = Json::parse(result->body);
    } catch (const Json::exception&) {
      throw EndpointError(status, "response body is not JSON: " + result->body.substr(0, 200));
    }
    ChatResponse response = parse_openai_response(body, status);
    response.retries = attempt;
    response.backend_id = id();
    if (response.model_id.empty()) response.model_id = request.model_id;
    response.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                              std::chrono::steady_clock::now() - started)
                              .count();
    return response;
  }
}

}  // namespace llmrnn
