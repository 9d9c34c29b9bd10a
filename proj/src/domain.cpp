#include "llmrnn/domain.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "llmrnn/errors.hpp"

namespace llmrnn {

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::diagnosis: return "diagnosis";
    case TaskKind::weather_summary: return "weather_summary";
    case TaskKind::price_forecast: return "price_forecast";
  }
  return "diagnosis";
}

std::string_view to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::zero_shot: return "zero_shot";
    case StrategyKind::fhc: return "fhc";
    case StrategyKind::memprompt: return "memprompt";
    case StrategyKind::llm_as_rnn: return "llm_as_rnn";
  }
  return "llm_as_rnn";
}

std::string_view to_string(SupervisionMode mode) {
  return mode == SupervisionMode::supervised ? "supervised" : "open_ended";
}

TaskKind parse_task_kind(std::string_view text) {
  if (text == "diagnosis") return TaskKind::diagnosis;
  if (text == "weather_summary") return TaskKind::weather_summary;
  if (text == "price_forecast") return TaskKind::price_forecast;
  throw ConfigError("unknown task kind '" + std::string(text) + "'");
}

StrategyKind parse_strategy(std::string_view text) {
  if (text == "zero_shot") return StrategyKind::zero_shot;
  if (text == "fhc") return StrategyKind::fhc;
  if (text == "memprompt") return StrategyKind::memprompt;
  if (text == "llm_as_rnn") return StrategyKind::llm_as_rnn;
  throw ConfigError("unknown strategy '" + std::string(text) + "'");
}

SupervisionMode parse_supervision(std::string_view text) {
  if (text == "supervised") return SupervisionMode::supervised;
  if (text == "open_ended") return SupervisionMode::open_ended;
  throw ConfigError("unknown supervision mode '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------

std::optional<std::string> VisitRecord::section(std::string_view name) const {
  for (const auto& s : sections) {
    if (s.name != name) continue;
    std::string out;
    for (const auto& v : s.values) {
      if (v.empty()) continue;
      if (!out.empty()) out += "; ";
      out += v;
    }
    return out;
  }
  return std::nullopt;
}

std::optional<double> DailyRecord::number(std::string_view field) const {
  for (const auto& [k, v] : numeric) {
    if (k == field) return v;
  }
  return std::nullopt;
}

std::optional<std::string> DailyRecord::string(std::string_view field) const {
  for (const auto& [k, v] : text) {
    if (k == field) return v;
  }
  return std::nullopt;
}

void Reference::validate() const {
  if (mode == SupervisionMode::supervised && !ground_truth) {
    throw InvariantViolation("supervised reference requires ground truth");
  }
  if (mode == SupervisionMode::open_ended && criteria.empty()) {
    throw InvariantViolation("open-ended reference requires at least one criterion");
  }
}

// ---------------------------------------------------------------------------

MemoryState MemoryState::make(std::string text, std::size_t budget, std::size_t version,
                              const TokenCounter& counter) {
  if (budget == 0) throw InvariantViolation("memory budget must be positive");
  const std::size_t tokens = counter.count(text);
  if (tokens > budget) {
    throw InvariantViolation("memory state has " + std::to_string(tokens) +
                             " tokens, budget is " + std::to_string(budget));
  }
  return MemoryState(std::move(text), budget, tokens, version);
}

MemoryState MemoryState::draft(std::string text, std::size_t budget, std::size_t version,
                               const TokenCounter& counter) {
  if (budget == 0) throw InvariantViolation("memory budget must be positive");
  const std::size_t tokens = counter.count(text);
  return MemoryState(std::move(text), budget, tokens, version);
}

MemoryState MemoryState::restore(std::string text, std::size_t budget, std::size_t token_count,
                                 std::size_t version) {
  return MemoryState(std::move(text), budget, token_count, version);
}

void HistoryLog::append(Observation observation, std::optional<Prediction> prediction) {
  if (!entries_.empty() && observation.step_index <= entries_.back().observation.step_index) {
    throw InvariantViolation("history entries must have increasing step_index");
  }
  entries_.push_back(Entry{std::move(observation), std::move(prediction)});
}

void RunConfig::validate() const {
  if (budget_lambda == 0) throw ConfigError("budget_lambda must be positive");
  if (budget_lambda >= context_limit) {
    throw ConfigError("budget_lambda (" + std::to_string(budget_lambda) +
                      ") must be smaller than context_limit (" + std::to_string(context_limit) +
                      ")");
  }
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) {
    throw ConfigError("temperature must be a finite non-negative number");
  }
  if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("top_p must lie in (0, 1]");
  if (max_tokens <= 0) throw ConfigError("max_tokens must be positive");
  if (memprompt_unit_budget == 0) throw ConfigError("memprompt_unit_budget must be positive");
  if (!(price_tolerance >= 0.0)) throw ConfigError("price_tolerance must be non-negative");
  if (supervision == SupervisionMode::open_ended && criteria.empty()) {
    throw ConfigError("open-ended supervision needs at least one criterion");
  }
  make_token_counter(token_counter);
}

bool is_primary_call(std::string_view purpose) {
  return purpose == "predict" || purpose == "judge" || purpose == "update";
}

// ---------------------------------------------------------------------------

std::string normalize_space(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
    } else {
      if (pending_space) out.push_back(' ');
      pending_space = false;
      out.push_back(c);
    }
  }
  return out;
}

std::string to_lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string match_key(std::string_view text) { return to_lower(normalize_space(text)); }

bool labels_equal(std::string_view a, std::string_view b) { return match_key(a) == match_key(b); }

// ---------------------------------------------------------------------------
// JSON

namespace {

template <typename T>
void put_optional(Json& j, const char* key, const std::optional<T>& v) {
  if (v) {
    j[key] = *v;
  } else {
    j[key] = nullptr;
  }
}

template <typename T>
std::optional<T> get_optional(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

Json ground_truth_json(const GroundTruth& truth) {
  Json j;
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, DiagnosisTruth>) {
          j["diagnoses"] = v.diagnoses;
        } else if constexpr (std::is_same_v<T, SummaryText>) {
          j["summary"] = v.text;
        } else {
          j["close"] = v.close;
        }
      },
      truth);
  return j;
}

GroundTruth ground_truth_from_json(const Json& j) {
  if (j.contains("diagnoses")) return DiagnosisTruth{j.at("diagnoses").get<std::vector<std::string>>()};
  if (j.contains("summary")) return SummaryText{j.at("summary").get<std::string>()};
  if (j.contains("close")) return PriceForecast{j.at("close").get<double>()};
  throw InvariantViolation("unrecognized ground truth object");
}

}  // namespace

void to_json(Json& j, const Section& v) {
  j = Json::object();
  j["name"] = v.name;
  j["values"] = v.values;
  j["is_list"] = v.is_list;
}

void from_json(const Json& j, Section& v) {
  v.name = j.at("name").get<std::string>();
  v.values = j.at("values").get<std::vector<std::string>>();
  v.is_list = j.value("is_list", false);
}

void to_json(Json& j, const VisitRecord& v) {
  j = Json::object();
  j["visit_index"] = v.visit_index;
  j["sections"] = v.sections;
  put_optional(j, "notes", v.notes);
  put_optional(j, "chief_complaint", v.chief_complaint);
  put_optional(j, "allergies", v.allergies);
  put_optional(j, "service", v.service);
  j["ground_truth_diagnoses"] = v.ground_truth_diagnoses;
}

void from_json(const Json& j, VisitRecord& v) {
  v.visit_index = j.at("visit_index").get<int>();
  v.sections = j.at("sections").get<std::vector<Section>>();
  v.notes = get_optional<std::string>(j, "notes");
  v.chief_complaint = get_optional<std::string>(j, "chief_complaint");
  v.allergies = get_optional<std::string>(j, "allergies");
  v.service = get_optional<std::string>(j, "service");
  v.ground_truth_diagnoses = j.value("ground_truth_diagnoses", std::vector<std::string>{});
}

void to_json(Json& j, const DailyRecord& v) {
  j = Json::object();
  j["date"] = v.date;
  Json numeric = Json::object();
  for (const auto& [k, x] : v.numeric) numeric[k] = x;
  Json text = Json::object();
  for (const auto& [k, x] : v.text) text[k] = x;
  j["numeric"] = std::move(numeric);
  j["text"] = std::move(text);
}

void from_json(const Json& j, DailyRecord& v) {
  v.date = j.at("date").get<std::string>();
  v.numeric.clear();
  v.text.clear();
  for (const auto& [k, x] : j.at("numeric").items()) v.numeric.emplace_back(k, x.get<double>());
  for (const auto& [k, x] : j.at("text").items()) v.text.emplace_back(k, x.get<std::string>());
}

void to_json(Json& j, const TimeWindow& v) {
  j = Json::object();
  j["rows"] = v.rows;
  j["window_length"] = v.window_length;
  j["target_date"] = v.target_date;
  j["target_field"] = v.target_field;
}

void from_json(const Json& j, TimeWindow& v) {
  v.rows = j.at("rows").get<std::vector<DailyRecord>>();
  v.window_length = j.at("window_length").get<int>();
  v.target_date = j.at("target_date").get<std::string>();
  v.target_field = j.at("target_field").get<std::string>();
}

void to_json(Json& j, const Observation& v) {
  j = Json::object();
  j["sequence_id"] = v.sequence_id;
  j["step_index"] = v.step_index;
  if (const auto* visit = std::get_if<VisitRecord>(&v.payload)) {
    j["payload"] = {{"visit", *visit}};
  } else {
    j["payload"] = {{"window", std::get<TimeWindow>(v.payload)}};
  }
  j["rendered_text"] = v.rendered_text;
}

void from_json(const Json& j, Observation& v) {
  v.sequence_id = j.at("sequence_id").get<std::string>();
  v.step_index = j.at("step_index").get<int>();
  const auto& payload = j.at("payload");
  if (payload.contains("visit")) {
    v.payload = payload.at("visit").get<VisitRecord>();
  } else {
    v.payload = payload.at("window").get<TimeWindow>();
  }
  v.rendered_text = j.at("rendered_text").get<std::string>();
}

void to_json(Json& j, const Prediction& v) {
  j = Json::object();
  j["task_kind"] = std::string(to_string(v.task_kind));
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, DiagnosisList>) {
          j["top_5_diagnoses"] = s.ranked;
          j["primary_diagnosis"] = s.ranked.empty() ? std::string() : s.primary();
        } else if constexpr (std::is_same_v<T, SummaryText>) {
          j["summary"] = s.text;
        } else {
          j["close"] = s.close;
        }
      },
      v.structured);
  j["raw_text"] = v.raw_text;
}

void from_json(const Json& j, Prediction& v) {
  v.task_kind = parse_task_kind(j.at("task_kind").get<std::string>());
  switch (v.task_kind) {
    case TaskKind::diagnosis:
      v.structured = DiagnosisList{j.at("top_5_diagnoses").get<std::vector<std::string>>()};
      break;
    case TaskKind::weather_summary:
      v.structured = SummaryText{j.at("summary").get<std::string>()};
      break;
    case TaskKind::price_forecast:
      v.structured = PriceForecast{j.at("close").get<double>()};
      break;
  }
  v.raw_text = j.at("raw_text").get<std::string>();
}

void to_json(Json& j, const Reference& v) {
  j = Json::object();
  j["mode"] = std::string(to_string(v.mode));
  if (v.ground_truth) {
    j["ground_truth"] = ground_truth_json(*v.ground_truth);
  } else {
    j["ground_truth"] = nullptr;
  }
  j["criteria"] = v.criteria;
}

void from_json(const Json& j, Reference& v) {
  v.mode = parse_supervision(j.at("mode").get<std::string>());
  const auto& gt = j.at("ground_truth");
  if (gt.is_null()) {
    v.ground_truth.reset();
  } else {
    v.ground_truth = ground_truth_from_json(gt);
  }
  v.criteria = j.value("criteria", std::vector<std::string>{});
}

void to_json(Json& j, const Feedback& v) {
  j = Json::object();
  j["text"] = v.text;
  put_optional(j, "primary_correct", v.primary_correct);
  put_optional(j, "any_top_k_correct", v.any_top_k_correct);
  j["missed_items"] = v.missed_items;
  j["suggestion"] = v.suggestion;
}

void from_json(const Json& j, Feedback& v) {
  v.text = j.at("text").get<std::string>();
  v.primary_correct = get_optional<bool>(j, "primary_correct");
  v.any_top_k_correct = get_optional<bool>(j, "any_top_k_correct");
  v.missed_items = j.value("missed_items", std::vector<std::string>{});
  v.suggestion = j.value("suggestion", std::string());
}

void to_json(Json& j, const MemoryState& v) {
  j = Json::object();
  j["text"] = v.text();
  j["budget_lambda"] = v.budget();
  j["token_count"] = v.token_count();
  j["version"] = v.version();
}

MemoryState memory_state_from_json(const Json& j) {
  return MemoryState::restore(j.at("text").get<std::string>(),
                              j.at("budget_lambda").get<std::size_t>(),
                              j.at("token_count").get<std::size_t>(),
                              j.at("version").get<std::size_t>());
}

void to_json(Json& j, const SummaryUnit& v) {
  j = Json::object();
  j["step_index"] = v.step_index();
  j["text"] = v.text();
  j["frozen"] = v.frozen();
  j["fallback"] = v.fallback();
}

SummaryUnit summary_unit_from_json(const Json& j) {
  return SummaryUnit(j.at("step_index").get<int>(), j.at("text").get<std::string>(),
                     j.value("fallback", false));
}

void to_json(Json& j, const RunConfig& v) {
  j = Json::object();
  j["strategy"] = std::string(to_string(v.strategy));
  j["task"] = std::string(to_string(v.task));
  j["supervision"] = std::string(to_string(v.supervision));
  j["budget_lambda"] = v.budget_lambda;
  j["temperature"] = v.temperature;
  j["top_p"] = v.top_p;
  j["max_tokens"] = v.max_tokens;
  j["context_limit"] = v.context_limit;
  j["model_id"] = v.model_id;
  put_optional(j, "updater_model", v.updater_model);
  put_optional(j, "judge_model", v.judge_model);
  j["seed"] = v.seed;
  j["token_counter"] = v.token_counter;
  j["memprompt_unit_budget"] = v.memprompt_unit_budget;
  j["parse_retry"] = v.parse_retry;
  j["price_tolerance"] = v.price_tolerance;
  j["criteria"] = v.criteria;
  j["shadow_full_history"] = v.shadow_full_history;
}

void from_json(const Json& j, RunConfig& v) {
  RunConfig d;
  v.strategy = parse_strategy(j.value("strategy", std::string(to_string(d.strategy))));
  v.task = parse_task_kind(j.value("task", std::string(to_string(d.task))));
  v.supervision = parse_supervision(j.value("supervision", std::string(to_string(d.supervision))));
  v.budget_lambda = j.value("budget_lambda", d.budget_lambda);
  v.temperature = j.value("temperature", d.temperature);
  v.top_p = j.value("top_p", d.top_p);
  v.max_tokens = j.value("max_tokens", d.max_tokens);
  v.context_limit = j.value("context_limit", d.context_limit);
  v.model_id = j.value("model_id", d.model_id);
  v.updater_model = get_optional<std::string>(j, "updater_model");
  v.judge_model = get_optional<std::string>(j, "judge_model");
  v.seed = j.value("seed", d.seed);
  v.token_counter = j.value("token_counter", d.token_counter);
  v.memprompt_unit_budget = j.value("memprompt_unit_budget", d.memprompt_unit_budget);
  v.parse_retry = j.value("parse_retry", d.parse_retry);
  v.price_tolerance = j.value("price_tolerance", d.price_tolerance);
  v.criteria = j.value("criteria", d.criteria);
  v.shadow_full_history = j.value("shadow_full_history", d.shadow_full_history);
}

void to_json(Json& j, const CallRecord& v) {
  j = Json::object();
  j["purpose"] = v.purpose;
  j["backend_id"] = v.backend_id;
  j["model_id"] = v.model_id;
  j["temperature"] = v.temperature;
  j["top_p"] = v.top_p;
  j["max_tokens"] = v.max_tokens;
  j["finish_reason"] = v.finish_reason;
  j["retries"] = v.retries;
  j["latency_ms"] = v.latency_ms;
  j["prompt_tokens"] = v.prompt_tokens;
  j["completion_tokens"] = v.completion_tokens;
}

void from_json(const Json& j, CallRecord& v) {
  v.purpose = j.at("purpose").get<std::string>();
  v.backend_id = j.at("backend_id").get<std::string>();
  v.model_id = j.at("model_id").get<std::string>();
  v.temperature = j.at("temperature").get<double>();
  v.top_p = j.at("top_p").get<double>();
  v.max_tokens = j.at("max_tokens").get<int>();
  v.finish_reason = j.at("finish_reason").get<std::string>();
  v.retries = j.at("retries").get<int>();
  v.latency_ms = j.at("latency_ms").get<std::int64_t>();
  v.prompt_tokens = j.at("prompt_tokens").get<std::size_t>();
  v.completion_tokens = j.at("completion_tokens").get<std::size_t>();
}

void to_json(Json& j, const Judgment& v) {
  j = Json::object();
  j["step_index"] = v.step_index;
  j["primary_correct"] = v.primary_correct;
  j["any_top5_correct"] = v.any_top5_correct;
  j["source"] = v.source == JudgmentSource::exact_match ? "exact_match" : "llm_judge";
  if (v.raw) {
    j["raw"] = *v.raw;
  } else {
    j["raw"] = nullptr;
  }
}

void from_json(const Json& j, Judgment& v) {
  v.step_index = j.at("step_index").get<int>();
  v.primary_correct = j.at("primary_correct").get<bool>();
  v.any_top5_correct = j.at("any_top5_correct").get<bool>();
  const auto source = j.at("source").get<std::string>();
  if (source == "exact_match") {
    v.source = JudgmentSource::exact_match;
  } else if (source == "llm_judge") {
    v.source = JudgmentSource::llm_judge;
  } else {
    throw InvariantViolation("unknown judgment source '" + source + "'");
  }
  const auto& raw = j.at("raw");
  if (raw.is_null()) {
    v.raw.reset();
  } else {
    v.raw = raw;
  }
}

void to_json(Json& j, const StepTrace& v) {
  j = Json::object();
  j["sequence_id"] = v.sequence_id;
  j["step_index"] = v.step_index;
  j["strategy"] = std::string(to_string(v.strategy));
  j["token_counter"] = v.token_counter;
  j["context_text"] = v.context_text;
  j["context_token_count"] = v.context_token_count;
  put_optional(j, "prediction", v.prediction);
  put_optional(j, "prediction_error", v.prediction_error);
  j["repair_stages"] = v.repair_stages;
  j["parse_retries"] = v.parse_retries;
  j["reference"] = v.reference;
  put_optional(j, "feedback", v.feedback);
  put_optional(j, "memory_before", v.memory_before);
  put_optional(j, "memory_after", v.memory_after);
  j["memory_update_failed"] = v.memory_update_failed;
  j["compressed"] = v.compressed;
  j["compression_truncated"] = v.compression_truncated;
  j["history_truncated"] = v.history_truncated;
  j["dropped_observations"] = v.dropped_observations;
  j["summaries"] = v.summaries;
  j["summaries_compressed"] = v.summaries_compressed;
  put_optional(j, "shadow_prediction", v.shadow_prediction);
  j["calls"] = v.calls;
  j["evaluation_calls"] = v.evaluation_calls;
  put_optional(j, "judgment", v.judgment);
  put_optional(j, "judgment_error", v.judgment_error);
}

StepTrace step_trace_from_json(const Json& j) {
  StepTrace v;
  v.sequence_id = j.at("sequence_id").get<std::string>();
  v.step_index = j.at("step_index").get<int>();
  v.strategy = parse_strategy(j.at("strategy").get<std::string>());
  v.token_counter = j.at("token_counter").get<std::string>();
  v.context_text = j.at("context_text").get<std::string>();
  v.context_token_count = j.at("context_token_count").get<std::size_t>();
  v.prediction = get_optional<Prediction>(j, "prediction");
  v.prediction_error = get_optional<std::string>(j, "prediction_error");
  v.repair_stages = j.at("repair_stages").get<std::vector<std::string>>();
  v.parse_retries = j.at("parse_retries").get<int>();
  v.reference = j.at("reference").get<Reference>();
  v.feedback = get_optional<Feedback>(j, "feedback");
  if (!j.at("memory_before").is_null()) v.memory_before = memory_state_from_json(j.at("memory_before"));
  if (!j.at("memory_after").is_null()) v.memory_after = memory_state_from_json(j.at("memory_after"));
  v.memory_update_failed = j.at("memory_update_failed").get<bool>();
  v.compressed = j.at("compressed").get<bool>();
  v.compression_truncated = j.at("compression_truncated").get<bool>();
  v.history_truncated = j.at("history_truncated").get<bool>();
  v.dropped_observations = j.at("dropped_observations").get<std::size_t>();
  for (const auto& u : j.at("summaries")) v.summaries.push_back(summary_unit_from_json(u));
  v.summaries_compressed = j.at("summaries_compressed").get<bool>();
  v.shadow_prediction = get_optional<Prediction>(j, "shadow_prediction");
  v.calls = j.at("calls").get<std::vector<CallRecord>>();
  v.evaluation_calls = j.at("evaluation_calls").get<std::vector<CallRecord>>();
  v.judgment = get_optional<Judgment>(j, "judgment");
  v.judgment_error = get_optional<std::string>(j, "judgment_error");
  return v;
}

std::string to_jsonl_line(const StepTrace& trace) {
  Json j = trace;
  return j.dump(-1, ' ', false, Json::error_handler_t::replace) + "\n";
}

}  // namespace llmrnn
