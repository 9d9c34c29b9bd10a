#include "llmrnn/backend.hpp"

#include <fstream>
#include <sstream>

#include "llmrnn/errors.hpp"
#include "llmrnn/hashing.hpp"

namespace llmrnn {

namespace {

const TokenCounter& fallback_counter() {
  static const WhitespaceTokenCounter counter;
  return counter;
}

std::string response_text(const Json& value) {
  return value.is_string() ? value.get<std::string>() : value.dump();
}

ScriptRule parse_rule(const Json& j) {
  ScriptRule rule;
  const std::string match = j.value("match", std::string("substring"));
  if (match == "substring") {
    rule.match = ScriptRule::Match::substring;
  } else if (match == "regex") {
    rule.match = ScriptRule::Match::regex;
  } else {
    throw BackendConfigError("script rule: unknown match kind '" + match + "'");
  }
  if (!j.contains("pattern") || !j.at("pattern").is_string()) {
    throw BackendConfigError("script rule: missing string 'pattern'");
  }
  rule.pattern = j.at("pattern").get<std::string>();
  if (j.contains("response")) rule.response = response_text(j.at("response"));
  if (j.contains("finish_reason")) {
    rule.finish_reason = parse_finish_reason(j.at("finish_reason").get<std::string>());
  }
  if (j.contains("error")) {
    const auto& e = j.at("error");
    rule.error = e.is_string() ? e.get<std::string>() : e.dump();
  }
  return rule;
}

}  // namespace

std::string_view to_string(ChatRole role) {
  switch (role) {
    case ChatRole::system: return "system";
    case ChatRole::user: return "user";
    case ChatRole::assistant: return "assistant";
  }
  return "user";
}

ChatRole parse_chat_role(std::string_view text) {
  if (text == "system") return ChatRole::system;
  if (text == "user") return ChatRole::user;
  if (text == "assistant") return ChatRole::assistant;
  throw ConfigError("unknown chat role '" + std::string(text) + "'");
}

std::string_view to_string(FinishReason reason) {
  switch (reason) {
    case FinishReason::stop: return "stop";
    case FinishReason::length: return "length";
    case FinishReason::error: return "error";
  }
  return "error";
}

FinishReason parse_finish_reason(std::string_view text) {
  if (text == "stop") return FinishReason::stop;
  if (text == "length") return FinishReason::length;
  if (text == "error") return FinishReason::error;
  throw ConfigError("unknown finish reason '" + std::string(text) + "'");
}

std::string ChatRequest::prompt_text() const {
  std::string out;
  for (std::size_t i = 0; i < messages.size(); ++i) {
    if (i != 0) out += '\n';
    out += messages[i].content;
  }
  return out;
}

ChatRequest make_request(const RunConfig& config, std::vector<ChatMessage> messages) {
  ChatRequest request;
  request.messages = std::move(messages);
  request.temperature = config.temperature;
  request.top_p = config.top_p;
  request.max_tokens = config.max_tokens;
  return request;
}

void to_json(Json& j, const ChatRequest& v) {
  Json messages = Json::array();
  for (const auto& m : v.messages) {
    messages.push_back(Json{{"role", to_string(m.role)}, {"content", m.content}});
  }
  j = Json{{"model_id", v.model_id},
           {"messages", std::move(messages)},
           {"temperature", v.temperature},
           {"top_p", v.top_p},
           {"max_tokens", v.max_tokens}};
}

void from_json(const Json& j, ChatRequest& v) {
  v.model_id = j.at("model_id").get<std::string>();
  v.messages.clear();
  for (const auto& m : j.at("messages")) {
    v.messages.push_back({parse_chat_role(m.at("role").get<std::string>()),
                          m.at("content").get<std::string>()});
  }
  v.temperature = j.at("temperature").get<double>();
  v.top_p = j.at("top_p").get<double>();
  v.max_tokens = j.at("max_tokens").get<int>();
}

void to_json(Json& j, const ChatResponse& v) {
  j = Json{{"text", v.text},
           {"finish_reason", to_string(v.finish_reason)},
           {"usage",
            {{"prompt_tokens", v.usage.prompt_tokens},
             {"completion_tokens", v.usage.completion_tokens}}},
           {"retries", v.retries},
           {"latency_ms", v.latency_ms},
           {"backend_id", v.backend_id},
           {"model_id", v.model_id}};
}

void from_json(const Json& j, ChatResponse& v) {
  v.text = j.at("text").get<std::string>();
  v.finish_reason = parse_finish_reason(j.at("finish_reason").get<std::string>());
  v.usage.prompt_tokens = j.at("usage").at("prompt_tokens").get<std::size_t>();
  v.usage.completion_tokens = j.at("usage").at("completion_tokens").get<std::size_t>();
  v.retries = j.value("retries", 0);
  v.latency_ms = j.value("latency_ms", std::int64_t{0});
  v.backend_id = j.value("backend_id", std::string());
  v.model_id = j.value("model_id", std::string());
}

// ---------------------------------------------------------------------------

ChatBackend::ChatBackend(std::string id, BackendLimits limits)
    : id_(std::move(id)), limits_(std::move(limits)) {}

std::size_t ChatBackend::count_tokens(std::string_view text) const {
  return limits_.counter ? limits_.counter->count(text) : fallback_counter().count(text);
}

ChatResponse ChatBackend::complete(const ChatRequest& request) const {
  if (request.messages.empty()) throw InvariantViolation("chat request has no messages");
  if (limits_.context_limit != 0) {
    const std::size_t tokens = count_tokens(request.prompt_text());
    if (tokens > limits_.context_limit) throw BudgetError(tokens, limits_.context_limit);
  }
  return do_complete(request);
}

// ---------------------------------------------------------------------------

ScriptTable ScriptTable::from_json(const Json& json) {
  const Json* rules = &json;
  if (json.is_object()) {
    if (!json.contains("rules")) throw BackendConfigError("script has no 'rules' array");
    rules = &json.at("rules");
  }
  if (!rules->is_array()) throw BackendConfigError("script rules must be an array");
  ScriptTable table;
  for (const auto& r : *rules) table.add_rule(parse_rule(r));
  return table;
}

ScriptTable ScriptTable::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BackendConfigError("cannot read script " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return from_json(Json::parse(ss.str(), nullptr, true, true));
  } catch (const Json::exception& e) {
    throw BackendConfigError("script " + path.string() + " is not valid JSON: " + e.what());
  }
}

ScriptTable& ScriptTable::add_substring(std::string pattern, std::string response,
                                        FinishReason finish) {
  ScriptRule rule;
  rule.pattern = std::move(pattern);
  rule.response = std::move(response);
  rule.finish_reason = finish;
  return add_rule(std::move(rule));
}

ScriptTable& ScriptTable::add_regex(std::string pattern, std::string response,
                                    FinishReason finish) {
  ScriptRule rule;
  rule.match = ScriptRule::Match::regex;
  rule.pattern = std::move(pattern);
  rule.response = std::move(response);
  rule.finish_reason = finish;
  return add_rule(std::move(rule));
}

ScriptTable& ScriptTable::add_rule(ScriptRule rule) {
  if (rule.match == ScriptRule::Match::regex && !rule.compiled) {
    try {
      rule.compiled = std::make_shared<const std::regex>(rule.pattern, std::regex::ECMAScript);
    } catch (const std::regex_error& e) {
      throw BackendConfigError("script rule: bad regex '" + rule.pattern + "': " + e.what());
    }
  }
  rules_.push_back(std::move(rule));
  return *this;
}

ChatResponse scripted_complete(const ChatRequest& request, const ScriptTable& script) {
  const std::string prompt = request.prompt_text();
  for (const auto& rule : script.rules()) {
    std::string text;
    if (rule.match == ScriptRule::Match::substring) {
      if (prompt.find(rule.pattern) == std::string::npos) continue;
      text = rule.response;
    } else {
      std::smatch m;
      if (!std::regex_search(prompt, m, *rule.compiled)) continue;
      text = m.format(rule.response);
    }
    if (rule.error) {
      if (*rule.error == "transport") throw TransportError("scripted transport failure", 1);
      int status = 500;
      try {
        status = std::stoi(*rule.error);
      } catch (const std::exception&) {
        throw BackendConfigError("script rule: unknown error '" + *rule.error + "'");
      }
      throw EndpointError(status, text);
    }
    ChatResponse response;
    response.text = std::move(text);
    response.finish_reason = rule.finish_reason;
    response.usage.prompt_tokens = fallback_counter().count(prompt);
    response.usage.completion_tokens = fallback_counter().count(response.text);
    response.model_id = request.model_id;
    return response;
  }
  throw NoMatchError(prompt.substr(0, 200));
}

ScriptedBackend::ScriptedBackend(std::string id, ScriptTable script, BackendLimits limits)
    : ChatBackend(std::move(id), std::move(limits)), script_(std::move(script)) {}

ChatResponse ScriptedBackend::do_complete(const ChatRequest& request) const {
  ChatResponse response = scripted_complete(request, script_);
  response.backend_id = id();
  return response;
}

// ---------------------------------------------------------------------------

std::string request_hash(const ChatRequest& request) {
  return sha256_hex(Json(request).dump());
}

RecordingBackend::RecordingBackend(std::shared_ptr<const ChatBackend> inner,
                                   std::filesystem::path cassette)
    : ChatBackend(inner->id(), inner->limits()),
      inner_(std::move(inner)),
      cassette_(std::move(cassette)) {}

ChatResponse RecordingBackend::do_complete(const ChatRequest& request) const {
  ChatResponse response = inner_->complete(request);
  const Json line{{"hash", request_hash(request)}, {"request", request}, {"response", response}};
  std::lock_guard lock(mutex_);
  std::ofstream out(cassette_, std::ios::binary | std::ios::app);
  if (!out) throw BackendConfigError("cannot append to cassette " + cassette_.string());
  out << line.dump(-1, ' ', false, Json::error_handler_t::replace) << '\n';
  return response;
}

ReplayBackend::ReplayBackend(std::string id, const std::filesystem::path& cassette,
                             BackendLimits limits)
    : ChatBackend(std::move(id), std::move(limits)) {
  std::ifstream in(cassette, std::ios::binary);
  if (!in) throw BackendConfigError("cannot read cassette " + cassette.string());
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      const Json j = Json::parse(line);
      // The first recording of a request wins.
      responses_.try_emplace(j.at("hash").get<std::string>(),
                             j.at("response").get<ChatResponse>());
    } catch (const Json::exception& e) {
      throw BackendConfigError("cassette " + cassette.string() + " line " +
                               std::to_string(number) + ": " + e.what());
    }
  }
}

ChatResponse ReplayBackend::do_complete(const ChatRequest& request) const {
  const std::string hash = request_hash(request);
  auto it = responses_.find(hash);
  if (it == responses_.end()) throw CassetteMiss("no cassette entry for request " + hash);
  return it->second;
}

}  // namespace llmrnn
