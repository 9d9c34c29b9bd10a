#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "llmrnn/backend.hpp"
#include "llmrnn/domain.hpp"
#include "llmrnn/templates.hpp"
#include "llmrnn/token_counter.hpp"

namespace llmrnn {

/// Everything a strategy needs for one run. Shared read-only across
/// concurrently running sequences.
struct EngineContext {
  RunConfig config;
  std::shared_ptr<const TokenCounter> counter;
  const TemplateRegistry* templates = &TemplateRegistry::builtin();
  std::shared_ptr<const ChatBackend> generator;
  /// Memory rewrite and compression; defaults to the generator.
  std::shared_ptr<const ChatBackend> updater;
  /// Open-ended feedback judge; defaults to the generator.
  std::shared_ptr<const ChatBackend> feedback_judge;
  /// Evaluation judge. Without one, steps are scored by exact match.
  std::shared_ptr<const ChatBackend> evaluation_judge;

  const ChatBackend& generator_backend() const;
  const ChatBackend& updater_backend() const;
  const ChatBackend& feedback_backend() const;
  const TokenCounter& tokens() const;
  const PromptTemplate& prompt(TemplateId id) const;
  /// Checks that backends are present and the counter matches the config.
  void validate() const;
};

/// C_t split into its operands. text() joins the non-empty operands with
/// single newlines, so token_count is additive under the default counter.
struct Context {
  std::string system_text;
  std::string memory_text;
  std::string observation_text;
  std::size_t token_count = 0;

  std::string text() const;
};

/// Builds a Context and counts its tokens; no limit check.
Context make_context(std::string system_text, std::string memory_text,
                     std::string observation_text, const TokenCounter& counter);

/// A template's instruction text: `fixed` bindings applied and every other
/// placeholder left empty. Used as I_sys in context accounting.
std::string instruction_text(const PromptTemplate& tmpl, const Bindings& fixed);

/// Sequence metadata merged with the observation's prompt fields.
Bindings prompt_bindings(const Bindings& metadata, const Observation& x);

struct PredictOutcome {
  std::optional<Prediction> prediction;
  std::optional<std::string> error;
  std::vector<std::string> repair_stages;
  int parse_retries = 0;
};

/// Sends `messages` to `backend` and validates the reply for `task`, with the
/// bounded parse retry. Backend errors propagate.
PredictOutcome request_prediction(std::vector<ChatMessage> messages, TaskKind task,
                                  const ChatBackend& backend, const RunConfig& config,
                                  std::string_view purpose, std::vector<CallRecord>& calls);

/// Per-sequence state machine. One instance drives one sequence serially.
class SequenceStrategy {
 public:
  virtual ~SequenceStrategy() = default;
  /// Runs one timestep. Steps must arrive in increasing step_index order.
  virtual StepTrace step(const SequenceStep& input) = 0;
};

}  // namespace llmrnn
