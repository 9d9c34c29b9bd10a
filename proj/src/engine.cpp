#include "llmrnn/engine.hpp"

#include "call_support.hpp"
#include "llmrnn/datasets.hpp"
#include "llmrnn/errors.hpp"
#include "llmrnn/structured_output.hpp"

namespace llmrnn {

const ChatBackend& EngineContext::generator_backend() const {
  if (!generator) throw ConfigError("no generator backend configured");
  return *generator;
}

const ChatBackend& EngineContext::updater_backend() const {
  return updater ? *updater : generator_backend();
}

const ChatBackend& EngineContext::feedback_backend() const {
  return feedback_judge ? *feedback_judge : generator_backend();
}

const TokenCounter& EngineContext::tokens() const {
  if (!counter) throw ConfigError("no token counter configured");
  return *counter;
}

const PromptTemplate& EngineContext::prompt(TemplateId id) const {
  return templates->get(config.task, id);
}

void EngineContext::validate() const {
  config.validate();
  generator_backend();
  if (tokens().name() != config.token_counter) {
    throw ConfigError("token counter '" + std::string(tokens().name()) +
                      "' does not match config '" + config.token_counter + "'");
  }
  if (templates == nullptr) throw ConfigError("no template registry configured");
}

std::string Context::text() const {
  std::string out;
  for (const std::string* part : {&system_text, &memory_text, &observation_text}) {
    if (part->empty()) continue;
    if (!out.empty()) out += '\n';
    out += *part;
  }
  return out;
}

Context make_context(std::string system_text, std::string memory_text,
                     std::string observation_text, const TokenCounter& counter) {
  Context ctx{std::move(system_text), std::move(memory_text), std::move(observation_text), 0};
  ctx.token_count = counter.count(ctx.text());
  return ctx;
}

std::string instruction_text(const PromptTemplate& tmpl, const Bindings& fixed) {
  Bindings b;
  for (const auto& name : tmpl.required_placeholders()) {
    auto it = fixed.find(name);
    b.emplace(name, it == fixed.end() ? std::string() : it->second);
  }
  return tmpl.render(b);
}

Bindings prompt_bindings(const Bindings& metadata, const Observation& x) {
  Bindings b = observation_bindings(x);
  for (const auto& [k, v] : metadata) b.insert_or_assign(k, v);
  return b;
}

PredictOutcome request_prediction(std::vector<ChatMessage> messages, TaskKind task,
                                  const ChatBackend& backend, const RunConfig& config,
                                  std::string_view purpose, std::vector<CallRecord>& calls) {
  auto result = detail::call_structured<Prediction>(
      backend, make_request(config, std::move(messages)), purpose, config.parse_retry, calls,
      [&](const ExtractedJson& ex, const ChatResponse& response) {
        return validate_prediction(ex.value, task, response.text);
      });
  PredictOutcome out;
  out.prediction = std::move(result.value);
  out.error = std::move(result.error);
  out.repair_stages = std::move(result.stages);
  out.parse_retries = result.parse_retries;
  return out;
}

}  // namespace llmrnn
