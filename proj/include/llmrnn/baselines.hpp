#pragma once

#include <optional>
#include <string>
#include <vector>

#include "llmrnn/engine.hpp"

namespace llmrnn {

/// Zero-shot: C_t = I_sys + x_t. No history, no memory.
Context zero_shot_context(std::string system_text, const Observation& x,
                          const TokenCounter& counter);

struct FhcContext {
  /// memory_text holds x_i..x_{t-1} joined by newlines.
  Context context;
  bool truncated = false;
  std::size_t dropped = 0;
};

/// Full history concatenation: C_t = I_sys + x_1 + ... + x_t. Drops the
/// oldest observations until the context fits `context_limit`. Throws
/// ObservationTooLarge when I_sys + x_t alone does not fit.
FhcContext fhc_context(const HistoryLog& history, const Observation& x, std::size_t context_limit,
                       std::string system_text, const TokenCounter& counter);

struct SummaryOutcome {
  SummaryUnit unit;
  std::optional<std::string> error;
};

/// m_i = Summarize(x_i): one call with the summarization template. Accepted
/// summaries are clamped to the unit budget; on a parse failure the unit is
/// the head of x_i's text (flagged as fallback).
SummaryOutcome memprompt_summarize(const Observation& x, const EngineContext& engine,
                                   std::vector<CallRecord>& calls);

/// C_t = I_sys + m_1 + ... + m_{t-1} + x_t.
Context memprompt_context(const std::vector<SummaryUnit>& units, const Observation& x,
                          std::string system_text, const TokenCounter& counter);

class ZeroShotStrategy final : public SequenceStrategy {
 public:
  ZeroShotStrategy(const Sequence& sequence, const EngineContext& engine);
  StepTrace step(const SequenceStep& input) override;

 private:
  const EngineContext& engine_;
  std::string sequence_id_;
  Bindings metadata_;
  std::string system_text_;
};

class FhcStrategy final : public SequenceStrategy {
 public:
  FhcStrategy(const Sequence& sequence, const EngineContext& engine);
  StepTrace step(const SequenceStep& input) override;

 private:
  const EngineContext& engine_;
  std::string sequence_id_;
  std::string system_text_;
  HistoryLog history_;
};

/// Summaries are frozen once written. When their total exceeds half the
/// context limit they are replaced by one compressed digest (flagged).
class MemPromptStrategy final : public SequenceStrategy {
 public:
  MemPromptStrategy(const Sequence& sequence, const EngineContext& engine);
  StepTrace step(const SequenceStep& input) override;

  const std::vector<SummaryUnit>& units() const noexcept { return units_; }

 private:
  bool compress_units(std::vector<CallRecord>& calls);

  const EngineContext& engine_;
  std::string sequence_id_;
  std::string system_text_;
  std::vector<SummaryUnit> units_;
  int last_summarized_ = 0;
};

}  // namespace llmrnn
