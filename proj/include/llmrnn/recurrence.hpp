#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "llmrnn/engine.hpp"

namespace llmrnn {

/// h_0: the task's default_init text at version 0. Throws ConfigError when it
/// does not fit the budget.
MemoryState initial_memory(const EngineContext& engine);

/// C_t = I_sys + h_{t-1} + x_t joined by single newlines.
/// Throws InvariantViolation if h_prev is over budget and ObservationTooLarge
/// if the context exceeds `context_limit`.
Context contextualize(std::string system_text, const MemoryState& h_prev, const Observation& x,
                      const TokenCounter& counter, std::size_t context_limit);

/// Renders sys_init (carrying ctx.memory_text) and P_gen for x, then asks
/// the generator.
PredictOutcome predict(const Context& ctx, const Observation& x, const Bindings& metadata,
                       const EngineContext& engine, std::vector<CallRecord>& calls);

/// Deterministic supervised feedback:
/// "Error: Expected <y> but generated <y_hat>." on a mismatch, a confirmation
/// otherwise, plus a line listing missed ground-truth items.
Feedback supervised_feedback(const Prediction& prediction, const GroundTruth& truth,
                             double price_tolerance);

/// e_t for step t. Supervised mode is local and never fails. Open-ended mode
/// asks the feedback judge with g_eval and throws JudgeUnavailable when the
/// call or its parsing fails (transport failures propagate unchanged).
/// A missing prediction yields feedback that says so, without a judge call.
Feedback reflect(const std::optional<Prediction>& prediction, const Reference& reference,
                 const EngineContext& engine, std::vector<CallRecord>& calls);

struct MemoryUpdate {
  MemoryState state;
  /// The rewrite could not be parsed and h_{t-1} was carried over.
  bool failed = false;
  std::optional<std::string> error;
  bool compressed = false;
  bool truncated = false;
  int parse_retries = 0;
  std::vector<std::string> repair_stages;
};

/// h_t from P_mem(h_{t-1}, x_t, y_hat_t, e_t). The version always advances by
/// one and the result is always within budget.
MemoryUpdate update_memory(const MemoryState& h_prev, const Observation& x,
                           const std::optional<Prediction>& prediction, const Feedback& feedback,
                           const Reference& reference, const EngineContext& engine,
                           std::vector<CallRecord>& calls);

struct Compression {
  MemoryState state;
  /// The model result was unusable and the text was cut to its last
  /// `lambda` tokens.
  bool truncated = false;
};

/// Requires h.token_count() > lambda (InvariantViolation otherwise). Tries a
/// model compression first and falls back to keep_last(lambda). The result
/// keeps h's version and is always within lambda.
Compression compress(const MemoryState& h, std::size_t lambda, const EngineContext& engine,
                     std::vector<CallRecord>& calls);

/// The recurrent loop for one sequence: contextualize, predict, reflect, rewrite.
class RecurrentStrategy final : public SequenceStrategy {
 public:
  RecurrentStrategy(const Sequence& sequence, const EngineContext& engine);

  StepTrace step(const SequenceStep& input) override;

  const MemoryState& memory() const noexcept { return memory_; }

 private:
  const EngineContext& engine_;
  std::string sequence_id_;
  Bindings metadata_;
  std::string system_text_;
  MemoryState memory_;
  HistoryLog history_;
};

}  // namespace llmrnn
