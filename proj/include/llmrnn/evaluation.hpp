#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "llmrnn/backend.hpp"
#include "llmrnn/domain.hpp"
#include "llmrnn/templates.hpp"

namespace llmrnn {

/// Local exact-match comparison of a prediction against ground truth.
struct MatchResult {
  bool primary_correct = false;
  bool any_top5_correct = false;
  /// Ground-truth items absent from the prediction (diagnosis task only).
  std::vector<std::string> missed;
};

/// Diagnoses and summaries compare with labels_equal. Prices are correct
/// when |p - y| <= tolerance * |y|. Throws InvariantViolation on a task
/// mismatch between prediction and truth.
MatchResult match_prediction(const Prediction& prediction, const GroundTruth& truth,
                             double price_tolerance);

/// Human-readable form of a truth or prediction for feedback and prompts.
std::string describe(const GroundTruth& truth);
std::string describe(const Prediction& prediction);
/// The single item a supervised error message names as expected.
std::string expected_label(const GroundTruth& truth);
std::string generated_label(const Prediction& prediction);

Judgment exact_match_judgment(int step_index, const Prediction& prediction,
                              const GroundTruth& truth, double price_tolerance);

/// Fraction of judgments with primary_correct (k = 1) or any_top5_correct
/// (k = 5). Throws EmptyInput on an empty list, InvariantViolation for other k.
double acc_at_k(std::span<const Judgment> judgments, int k);

/// Fraction of judgments whose output was deemed aligned (primary_correct).
double alignment_rate(std::span<const Judgment> judgments);

struct RegressionErrors {
  double mae = 0.0;
  double mse = 0.0;
};

/// Throws LengthMismatch, EmptyInput or NonFiniteValue.
RegressionErrors regression_errors(std::span<const double> predictions,
                                   std::span<const double> truths);

struct TransitionMatrix {
  std::size_t tt = 0;
  std::size_t tf = 0;
  std::size_t ft = 0;
  std::size_t ff = 0;

  std::size_t total() const noexcept { return tt + tf + ft + ff; }
  /// F->T / (F->T + F->F); absent when no step was wrong with a successor.
  std::optional<double> recovery_rate() const;
  TransitionMatrix& operator+=(const TransitionMatrix& other);
  friend bool operator==(const TransitionMatrix&, const TransitionMatrix&) = default;
};

/// Counts consecutive pairs of one sequence.
TransitionMatrix transition_counts(const std::vector<bool>& correctness);
/// Sums transition_counts over sequences.
TransitionMatrix transition_matrix(const std::vector<std::vector<bool>>& sequences);

enum class MetricId { acc1, acc5, alignment, mae, mse };
std::string_view to_string(MetricId metric);

struct CurvePoint {
  int step_index = 0;
  /// Sequences that reached this step.
  std::size_t sequences = 0;
  /// Steps that contributed to the value (judged, or with a price forecast).
  std::size_t counted = 0;
  std::optional<double> value;
};

/// Groups steps by step_index across sequences and computes `metric` per
/// index. Traces without a judgment (or price) are excluded from that index.
std::vector<CurvePoint> temporal_curve(const std::vector<std::vector<StepTrace>>& traces,
                                       MetricId metric);

/// Per-step outcome of evaluation judging. Exactly one of judgment / error
/// is set.
struct JudgedStep {
  std::optional<Judgment> judgment;
  std::optional<std::string> error;
  std::vector<CallRecord> calls;
};

/// Renders g_eval for every (prediction, truth) pair and parses the judge's
/// verdict into a Judgment with source llm_judge. Failures are per step and
/// never abort the batch.
std::vector<JudgedStep> judge_predictions(const std::vector<std::optional<Prediction>>& predictions,
                                          const std::vector<GroundTruth>& truths,
                                          const ChatBackend& judge, const RunConfig& config,
                                          const TemplateRegistry& templates);

/// One-row summary of a run.
struct Report {
  std::string strategy;
  std::string task;
  std::string supervision;
  std::string model_id;
  std::size_t budget_lambda = 0;
  std::string judge_source;

  std::size_t sequences = 0;
  std::size_t steps = 0;
  std::size_t judged_steps = 0;
  std::size_t excluded_steps = 0;
  std::size_t repaired_steps = 0;
  std::size_t parse_retries = 0;
  std::size_t memory_update_failures = 0;
  std::size_t compressions = 0;
  std::size_t truncated_contexts = 0;

  std::optional<double> acc1;
  std::optional<double> acc5;
  std::optional<double> alignment;
  std::optional<double> mae;
  std::optional<double> mse;
  TransitionMatrix transitions;

  std::size_t max_context_tokens = 0;
  std::size_t max_memory_tokens = 0;
  std::size_t primary_calls = 0;
  std::size_t auxiliary_calls = 0;

  std::vector<std::pair<MetricId, std::vector<CurvePoint>>> curves;
};

/// Pure function of the traces (sequences in the given order) and config.
Report build_report(const std::vector<std::vector<StepTrace>>& traces, const RunConfig& config);

Json report_json(const Report& report);
/// Aligned plain-text table: Acc to 4 decimals, MAE/MSE to 3.
std::string report_table(const std::vector<Report>& reports);
/// step_index,metric,sequences,counted,value
std::string curves_csv(const Report& report);
/// Transition counts and recovery rate as text.
std::string transitions_text(const Report& report);

}  // namespace llmrnn
