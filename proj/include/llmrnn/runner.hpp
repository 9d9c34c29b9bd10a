#pragma once

#include <memory>
#include <vector>

#include "llmrnn/engine.hpp"

namespace llmrnn {

/// Strategy instance for `engine.config.strategy`. The sequence and engine
/// must outlive it.
std::unique_ptr<SequenceStrategy> make_strategy(const Sequence& sequence,
                                                const EngineContext& engine);

/// Runs every step of `sequence` in order, then scores the steps: with the
/// evaluation judge when one is configured, otherwise by exact match against
/// the ground truth. Steps without a prediction or truth stay unjudged.
///
/// Throws on backend failures that survive the client's retries; per-step
/// parse failures are recorded in the traces instead.
std::vector<StepTrace> run_sequence(const Sequence& sequence, const EngineContext& engine);

/// The scoring pass of run_sequence on its own.
void attach_judgments(std::vector<StepTrace>& traces, const EngineContext& engine);

}  // namespace llmrnn
