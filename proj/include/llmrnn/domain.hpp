#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"
#include "llmrnn/token_counter.hpp"

namespace llmrnn {

/// Canonical JSON type. Insertion-ordered so serialized output is stable.
using Json = nlohmann::ordered_json;

/// Placeholder name -> value, used for prompt rendering.
using Bindings = std::map<std::string, std::string, std::less<>>;

enum class TaskKind { diagnosis, weather_summary, price_forecast };
enum class StrategyKind { zero_shot, fhc, memprompt, llm_as_rnn };
enum class SupervisionMode { supervised, open_ended };

std::string_view to_string(TaskKind kind);
std::string_view to_string(StrategyKind kind);
std::string_view to_string(SupervisionMode mode);
TaskKind parse_task_kind(std::string_view text);
StrategyKind parse_strategy(std::string_view text);
SupervisionMode parse_supervision(std::string_view text);

// ---------------------------------------------------------------------------
// Observation payloads

/// One named clinical section. List-valued sections keep their elements.
struct Section {
  std::string name;
  std::vector<std::string> values;
  bool is_list = false;
};

struct VisitRecord {
  int visit_index = 0;
  std::vector<Section> sections;
  std::optional<std::string> notes;
  std::optional<std::string> chief_complaint;
  std::optional<std::string> allergies;
  std::optional<std::string> service;
  std::vector<std::string> ground_truth_diagnoses;

  /// Text of the named section (list elements joined with "; "), if present.
  std::optional<std::string> section(std::string_view name) const;
};

/// One dated row of a time series.
struct DailyRecord {
  std::string date;
  std::vector<std::pair<std::string, double>> numeric;
  std::vector<std::pair<std::string, std::string>> text;

  std::optional<double> number(std::string_view field) const;
  std::optional<std::string> string(std::string_view field) const;
};

/// A lookback window of `window_length` rows ending at the target date. The
/// target field of the last row is withheld when rendering.
struct TimeWindow {
  std::vector<DailyRecord> rows;
  int window_length = 5;
  std::string target_date;
  std::string target_field;
};

using ObservationPayload = std::variant<VisitRecord, TimeWindow>;

/// x_t: one timestep's input.
struct Observation {
  std::string sequence_id;
  int step_index = 1;
  ObservationPayload payload;
  std::string rendered_text;
};

// ---------------------------------------------------------------------------
// Predictions, references, feedback

/// Ranked diagnosis names; entry 0 is the primary diagnosis.
struct DiagnosisList {
  std::vector<std::string> ranked;
  const std::string& primary() const { return ranked.front(); }
};

struct SummaryText {
  std::string text;
};

struct PriceForecast {
  double close = 0.0;
};

using StructuredPrediction = std::variant<DiagnosisList, SummaryText, PriceForecast>;

/// ŷ_t: validated model output plus the verbatim text it came from.
struct Prediction {
  TaskKind task_kind = TaskKind::diagnosis;
  StructuredPrediction structured;
  std::string raw_text;
};

/// Ground-truth diagnoses; the first entry is the primary one.
struct DiagnosisTruth {
  std::vector<std::string> diagnoses;
};

using GroundTruth = std::variant<DiagnosisTruth, SummaryText, PriceForecast>;

/// R_t. Supervised references carry ground truth; open-ended ones carry
/// quality criteria (and may still carry ground truth for evaluation only).
struct Reference {
  SupervisionMode mode = SupervisionMode::supervised;
  std::optional<GroundTruth> ground_truth;
  std::vector<std::string> criteria;

  void validate() const;
};

/// e_t plus machine-readable correctness flags.
struct Feedback {
  std::string text;
  std::optional<bool> primary_correct;
  std::optional<bool> any_top_k_correct;
  std::vector<std::string> missed_items;
  std::string suggestion;
};

// ---------------------------------------------------------------------------
// Memory

/// h_t. Immutable value; `draft` builds an unchecked intermediate that may
/// exceed its budget (the input to compression). Every state the engine hands
/// back to callers satisfies token_count() <= budget().
class MemoryState {
 public:
  static MemoryState make(std::string text, std::size_t budget, std::size_t version,
                          const TokenCounter& counter);
  static MemoryState draft(std::string text, std::size_t budget, std::size_t version,
                           const TokenCounter& counter);
  /// Restores a serialized state verbatim.
  static MemoryState restore(std::string text, std::size_t budget, std::size_t token_count,
                             std::size_t version);

  const std::string& text() const noexcept { return text_; }
  std::size_t budget() const noexcept { return budget_; }
  std::size_t token_count() const noexcept { return token_count_; }
  std::size_t version() const noexcept { return version_; }
  bool within_budget() const noexcept { return token_count_ <= budget_; }

  friend bool operator==(const MemoryState&, const MemoryState&) = default;

 private:
  MemoryState(std::string text, std::size_t budget, std::size_t token_count, std::size_t version)
      : text_(std::move(text)), budget_(budget), token_count_(token_count), version_(version) {}

  std::string text_;
  std::size_t budget_ = 0;
  std::size_t token_count_ = 0;
  std::size_t version_ = 0;
};

/// m_i of a MemPrompt run. Frozen on creation; there is no way to edit it.
class SummaryUnit {
 public:
  SummaryUnit(int step_index, std::string text, bool fallback = false)
      : step_index_(step_index), text_(std::move(text)), fallback_(fallback) {}

  int step_index() const noexcept { return step_index_; }
  const std::string& text() const noexcept { return text_; }
  bool frozen() const noexcept { return true; }
  /// True when the summarizer failed and the unit is a head-truncation of x_i.
  bool fallback() const noexcept { return fallback_; }

 private:
  int step_index_;
  std::string text_;
  bool fallback_;
};

/// H_{t-1}: append-only log of (observation, prediction) pairs.
class HistoryLog {
 public:
  struct Entry {
    Observation observation;
    std::optional<Prediction> prediction;
  };

  /// Throws InvariantViolation unless step_index exceeds the last entry's.
  void append(Observation observation, std::optional<Prediction> prediction);
  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  std::vector<Entry> entries_;
};

/// One timestep of a sequence: x_t with its reference R_t.
struct SequenceStep {
  Observation observation;
  Reference reference;
};

/// An ordered run of steps plus sequence-level prompt bindings (patient
/// demographics and the like).
struct Sequence {
  std::string id;
  TaskKind task = TaskKind::diagnosis;
  Bindings metadata;
  std::vector<SequenceStep> steps;
};

// ---------------------------------------------------------------------------
// Configuration

/// Decoding defaults: temperature 0.7, top-p 0.9, max_tokens 4096, memory budget 4096.
struct RunConfig {
  StrategyKind strategy = StrategyKind::llm_as_rnn;
  TaskKind task = TaskKind::diagnosis;
  SupervisionMode supervision = SupervisionMode::supervised;
  std::size_t budget_lambda = 4096;
  double temperature = 0.7;
  double top_p = 0.9;
  int max_tokens = 4096;
  std::size_t context_limit = 32768;
  std::string model_id = "default";
  std::optional<std::string> updater_model;
  std::optional<std::string> judge_model;
  std::uint64_t seed = 0;
  std::string token_counter = "whitespace";
  std::size_t memprompt_unit_budget = 64;
  bool parse_retry = true;
  /// Relative error under which a price forecast counts as correct.
  double price_tolerance = 0.01;
  std::vector<std::string> criteria = {"relevance", "coherence",
                                       "consistency with prior facts"};
  bool shadow_full_history = false;

  void validate() const;
};

// ---------------------------------------------------------------------------
// Traces

/// One backend call made during a step.
struct CallRecord {
  std::string purpose;  // predict, judge, update, compress, summarize, *_retry, shadow_fhc
  std::string backend_id;
  std::string model_id;
  double temperature = 0.0;
  double top_p = 0.0;
  int max_tokens = 0;
  std::string finish_reason;
  int retries = 0;
  std::int64_t latency_ms = 0;
  std::size_t prompt_tokens = 0;
  std::size_t completion_tokens = 0;
};

/// Calls that make up the per-step contract (predict, judge, update) as
/// opposed to retries, compression and bookkeeping calls.
bool is_primary_call(std::string_view purpose);

enum class JudgmentSource { exact_match, llm_judge };

struct Judgment {
  int step_index = 0;
  bool primary_correct = false;
  bool any_top5_correct = false;
  JudgmentSource source = JudgmentSource::exact_match;
  std::optional<Json> raw;
};

struct StepTrace {
  std::string sequence_id;
  int step_index = 0;
  StrategyKind strategy = StrategyKind::llm_as_rnn;
  std::string token_counter;
  std::string context_text;
  std::size_t context_token_count = 0;

  std::optional<Prediction> prediction;
  std::optional<std::string> prediction_error;
  std::vector<std::string> repair_stages;
  int parse_retries = 0;

  Reference reference;
  std::optional<Feedback> feedback;

  std::optional<MemoryState> memory_before;
  std::optional<MemoryState> memory_after;
  bool memory_update_failed = false;
  bool compressed = false;
  bool compression_truncated = false;

  bool history_truncated = false;
  std::size_t dropped_observations = 0;
  std::vector<SummaryUnit> summaries;
  bool summaries_compressed = false;

  std::optional<Prediction> shadow_prediction;
  std::vector<CallRecord> calls;
  std::vector<CallRecord> evaluation_calls;
  std::optional<Judgment> judgment;
  std::optional<std::string> judgment_error;
};

// ---------------------------------------------------------------------------
// Helpers shared across modules

/// Trim and collapse internal whitespace runs to single spaces.
std::string normalize_space(std::string_view text);
/// normalize_space + ASCII lowercase; used for equality of labels.
std::string match_key(std::string_view text);
bool labels_equal(std::string_view a, std::string_view b);
std::string to_lower(std::string_view text);

// ---------------------------------------------------------------------------
// Canonical JSON

void to_json(Json& j, const Section& v);
void from_json(const Json& j, Section& v);
void to_json(Json& j, const VisitRecord& v);
void from_json(const Json& j, VisitRecord& v);
void to_json(Json& j, const DailyRecord& v);
void from_json(const Json& j, DailyRecord& v);
void to_json(Json& j, const TimeWindow& v);
void from_json(const Json& j, TimeWindow& v);
void to_json(Json& j, const Observation& v);
void from_json(const Json& j, Observation& v);
void to_json(Json& j, const Prediction& v);
void from_json(const Json& j, Prediction& v);
void to_json(Json& j, const Reference& v);
void from_json(const Json& j, Reference& v);
void to_json(Json& j, const Feedback& v);
void from_json(const Json& j, Feedback& v);
void to_json(Json& j, const MemoryState& v);
MemoryState memory_state_from_json(const Json& j);
void to_json(Json& j, const SummaryUnit& v);
SummaryUnit summary_unit_from_json(const Json& j);
void to_json(Json& j, const RunConfig& v);
void from_json(const Json& j, RunConfig& v);
void to_json(Json& j, const CallRecord& v);
void from_json(const Json& j, CallRecord& v);
void to_json(Json& j, const Judgment& v);
void from_json(const Json& j, Judgment& v);
void to_json(Json& j, const StepTrace& v);
StepTrace step_trace_from_json(const Json& j);

/// One compact JSON object per line.
std::string to_jsonl_line(const StepTrace& trace);

}  // namespace llmrnn
