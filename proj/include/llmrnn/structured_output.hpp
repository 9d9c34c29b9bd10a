#pragma once

#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "llmrnn/domain.hpp"

namespace llmrnn {

/// Stage names recorded in traces and errors.
namespace repair_stage {
inline constexpr std::string_view strip_fences = "strip_fences";
inline constexpr std::string_view strip_prose = "strip_prose";
inline constexpr std::string_view trailing_commas = "trailing_commas";
inline constexpr std::string_view balance_braces = "balance_braces";
}  // namespace repair_stage

struct ExtractedJson {
  Json value;
  /// Repair stages that changed the text, in application order. Empty when
  /// the input was already strict JSON.
  std::vector<std::string> stages;

  bool repaired() const noexcept { return !stages.empty(); }
};

/// Pulls one JSON value out of model text.
///
/// Strict JSON is returned untouched. Otherwise the following repairs are
/// tried in order: markdown fence stripping, prose removal around the first
/// balanced `{...}`, trailing-comma removal, and (only when `truncated` is
/// set, i.e. the endpoint reported finish_reason=length) closing an open
/// string and appending the missing closers. Repairs only delete text or
/// append quotes/closers, so they cannot introduce new keys.
///
/// Throws UnparseableOutput with the raw text and the stages attempted.
ExtractedJson extract_json(std::string_view raw, bool truncated = false);

/// Removes commas that directly precede `}` or `]` outside of strings.
std::string remove_trailing_commas(std::string_view text);

/// Enforces the task schema on parsed model output.
///
/// diagnosis: `top_5_diagnoses` with exactly five names (objects with "name"
/// or bare strings) and a `primary_diagnosis` that is one of them; the
/// primary is moved to rank 1. weather_summary: a string or an object with
/// "summary". price_forecast: a finite number, bare or under "close_price".
/// Names and summaries are whitespace-normalized.
///
/// Throws SchemaViolation(path, reason).
Prediction validate_prediction(const Json& json, TaskKind kind, std::string raw_text = {});

/// Parsed g_eval output. The flag names differ per task (primary_correct,
/// aligned, reasonable) but map onto the same fields.
struct JudgeVerdict {
  bool primary_correct = false;
  std::optional<bool> any_top5_correct;
  std::vector<std::string> missed;
  std::string why;
  std::string suggestion;
  Json raw;
};

/// Throws SchemaViolation when the verdict flag is absent.
JudgeVerdict parse_judge_verdict(const Json& json, TaskKind kind);

/// First string found under `keys` (in order), falling back to the first
/// string member of an object, or the value itself if it is a string. Object
/// values under a key are flattened to "KEY: value" lines. Throws
/// SchemaViolation when nothing usable exists.
std::string text_field(const Json& json, std::initializer_list<std::string_view> keys);

}  // namespace llmrnn
