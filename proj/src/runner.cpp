#include "llmrnn/runner.hpp"

#include "llmrnn/baselines.hpp"
#include "llmrnn/errors.hpp"
#include "llmrnn/evaluation.hpp"
#include "llmrnn/recurrence.hpp"

namespace llmrnn {

std::unique_ptr<SequenceStrategy> make_strategy(const Sequence& sequence,
                                                const EngineContext& engine) {
  switch (engine.config.strategy) {
    case StrategyKind::zero_shot: return std::make_unique<ZeroShotStrategy>(sequence, engine);
    case StrategyKind::fhc: return std::make_unique<FhcStrategy>(sequence, engine);
    case StrategyKind::memprompt: return std::make_unique<MemPromptStrategy>(sequence, engine);
    case StrategyKind::llm_as_rnn: return std::make_unique<RecurrentStrategy>(sequence, engine);
  }
  throw ConfigError("unknown strategy");
}

std::vector<StepTrace> run_sequence(const Sequence& sequence, const EngineContext& engine) {
  engine.validate();
  if (sequence.task != engine.config.task) {
    throw ConfigError("sequence " + sequence.id + " is a " + std::string(to_string(sequence.task)) +
                      " sequence but the run is configured for " +
                      std::string(to_string(engine.config.task)));
  }
  auto strategy = make_strategy(sequence, engine);
  std::vector<StepTrace> traces;
  traces.reserve(sequence.steps.size());
  int previous = 0;
  for (const auto& step : sequence.steps) {
    if (step.observation.step_index <= previous) {
      throw InvariantViolation("sequence " + sequence.id + ": step indices must increase");
    }
    previous = step.observation.step_index;
    traces.push_back(strategy->step(step));
  }
  attach_judgments(traces, engine);
  return traces;
}

void attach_judgments(std::vector<StepTrace>& traces, const EngineContext& engine) {
  if (!engine.evaluation_judge) {
    for (auto& t : traces) {
      if (t.prediction && t.reference.ground_truth) {
        t.judgment = exact_match_judgment(t.step_index, *t.prediction, *t.reference.ground_truth,
                                          engine.config.price_tolerance);
      }
    }
    return;
  }
  std::vector<std::size_t> positions;
  std::vector<std::optional<Prediction>> predictions;
  std::vector<GroundTruth> truths;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    if (!traces[i].reference.ground_truth) continue;
    positions.push_back(i);
    predictions.push_back(traces[i].prediction);
    truths.push_back(*traces[i].reference.ground_truth);
  }
  auto judged = judge_predictions(predictions, truths, *engine.evaluation_judge, engine.config,
                                  *engine.templates);
  for (std::size_t k = 0; k < positions.size(); ++k) {
    StepTrace& t = traces[positions[k]];
    t.evaluation_calls = std::move(judged[k].calls);
    if (judged[k].judgment) {
      t.judgment = std::move(judged[k].judgment);
      t.judgment->step_index = t.step_index;
    } else {
      t.judgment_error = judged[k].error;
    }
  }
}

}  // namespace llmrnn
