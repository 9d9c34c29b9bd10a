#include "llmrnn/recurrence.hpp"

#include "call_support.hpp"
#include "llmrnn/baselines.hpp"
#include "llmrnn/errors.hpp"
#include "llmrnn/evaluation.hpp"
#include "llmrnn/structured_output.hpp"

namespace llmrnn {

namespace {

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i != 0) out += sep;
    out += items[i];
  }
  return out;
}

std::string criteria_text(const Reference& reference) {
  return "Quality criteria (no ground truth is available): " + join(reference.criteria, "; ") + ".";
}

std::string revealed_outcome(const Observation& x, const Reference& reference) {
  if (reference.mode == SupervisionMode::open_ended || !reference.ground_truth) {
    return "Not revealed in open-ended mode.";
  }
  return "Step " + std::to_string(x.step_index) + ": " + describe(*reference.ground_truth);
}

Feedback missing_prediction_feedback(const Reference& reference) {
  Feedback fb;
  if (reference.mode == SupervisionMode::supervised && reference.ground_truth) {
    fb.text = "Error: Expected " + expected_label(*reference.ground_truth) +
              " but no valid prediction was generated.";
    fb.primary_correct = false;
    fb.any_top_k_correct = false;
    if (const auto* dx = std::get_if<DiagnosisTruth>(&*reference.ground_truth)) {
      fb.missed_items = dx->diagnoses;
    }
  } else {
    fb.text = "No valid prediction was generated, so nothing could be evaluated.";
  }
  return fb;
}

}  // namespace

MemoryState initial_memory(const EngineContext& engine) {
  std::string text = engine.prompt(TemplateId::default_init).render({});
  const std::size_t tokens = engine.tokens().count(text);
  if (tokens > engine.config.budget_lambda) {
    throw ConfigError("initial memory has " + std::to_string(tokens) +
                      " tokens, more than the budget " +
                      std::to_string(engine.config.budget_lambda));
  }
  return MemoryState::make(std::move(text), engine.config.budget_lambda, 0, engine.tokens());
}

Context contextualize(std::string system_text, const MemoryState& h_prev, const Observation& x,
                      const TokenCounter& counter, std::size_t context_limit) {
  if (!h_prev.within_budget()) {
    throw InvariantViolation("contextualize: memory state exceeds its budget");
  }
  Context ctx = make_context(std::move(system_text), h_prev.text(), x.rendered_text, counter);
  if (ctx.token_count > context_limit) {
    throw ObservationTooLarge("context for step " + std::to_string(x.step_index) + " has " +
                              std::to_string(ctx.token_count) + " tokens, limit is " +
                              std::to_string(context_limit));
  }
  return ctx;
}

PredictOutcome predict(const Context& ctx, const Observation& x, const Bindings& metadata,
                       const EngineContext& engine, std::vector<CallRecord>& calls) {
  Bindings system = metadata;
  system.insert_or_assign("evolving_summary", ctx.memory_text);
  std::vector<ChatMessage> messages = {
      {ChatRole::system, engine.prompt(TemplateId::sys_init).render(system)},
      {ChatRole::user, engine.prompt(TemplateId::p_gen).render(prompt_bindings(metadata, x))}};
  return request_prediction(std::move(messages), engine.config.task, engine.generator_backend(),
                            engine.config, "predict", calls);
}

Feedback supervised_feedback(const Prediction& prediction, const GroundTruth& truth,
                             double price_tolerance) {
  const MatchResult m = match_prediction(prediction, truth, price_tolerance);
  Feedback fb;
  const std::string expected = expected_label(truth);
  const std::string generated = generated_label(prediction);
  fb.text = m.primary_correct
                ? "Correct: generated " + generated + ", matching the expected " + expected + "."
                : "Error: Expected " + expected + " but generated " + generated + ".";
  if (!m.missed.empty()) fb.text += "\nMissed: " + join(m.missed, "; ") + ".";
  fb.primary_correct = m.primary_correct;
  fb.any_top_k_correct = m.any_top5_correct;
  fb.missed_items = m.missed;
  return fb;
}

Feedback reflect(const std::optional<Prediction>& prediction, const Reference& reference,
                 const EngineContext& engine, std::vector<CallRecord>& calls) {
  if (!prediction) return missing_prediction_feedback(reference);
  if (reference.mode == SupervisionMode::supervised) {
    if (!reference.ground_truth) throw InvariantViolation("supervised reference without truth");
    return supervised_feedback(*prediction, *reference.ground_truth, engine.config.price_tolerance);
  }

  const std::string criteria = criteria_text(reference);
  const Bindings bindings{{"prediction", describe(*prediction)},
                          {"ground_truth_diagnoses", criteria},
                          {"ground_truth", criteria}};
  const std::string prompt = engine.prompt(TemplateId::g_eval).render(bindings);
  detail::StructuredResult<JudgeVerdict> result;
  try {
    result = detail::call_structured<JudgeVerdict>(
        engine.feedback_backend(), make_request(engine.config, {{ChatRole::user, prompt}}),
        "judge", engine.config.parse_retry, calls,
        [&](const ExtractedJson& ex, const ChatResponse&) {
          return parse_judge_verdict(ex.value, engine.config.task);
        });
  } catch (const TransportError&) {
    throw;
  } catch (const BackendError& e) {
    throw JudgeUnavailable(std::string("feedback judge failed: ") + e.what());
  }
  if (!result.value) {
    throw JudgeUnavailable("feedback judge output unusable: " + result.error.value_or("unknown"));
  }
  const JudgeVerdict& v = *result.value;
  Feedback fb;
  fb.text = v.raw.dump();
  fb.primary_correct = v.primary_correct;
  fb.any_top_k_correct = v.any_top5_correct;
  fb.missed_items = v.missed;
  fb.suggestion = v.suggestion;
  return fb;
}

MemoryUpdate update_memory(const MemoryState& h_prev, const Observation& x,
                           const std::optional<Prediction>& prediction, const Feedback& feedback,
                           const Reference& reference, const EngineContext& engine,
                           std::vector<CallRecord>& calls) {
  const std::size_t lambda = engine.config.budget_lambda;
  const TokenCounter& counter = engine.tokens();
  const std::size_t version = h_prev.version() + 1;

  std::string feedback_text = feedback.text;
  if (!feedback.suggestion.empty()) feedback_text += "\nSuggestion: " + feedback.suggestion;
  std::string context = x.rendered_text + "\nPREDICTION: " +
                        (prediction ? describe(*prediction) : std::string("none (unparseable output)"));
  const std::string outcome = revealed_outcome(x, reference);
  const Bindings bindings{{"current_evolving_summary", h_prev.text()},
                          {"patient_history", outcome},
                          {"revealed_outcome", outcome},
                          {"evaluation_feedback", feedback_text},
                          {"visit_summary", context},
                          {"observation_summary", context}};
  const std::string prompt = engine.prompt(TemplateId::p_mem).render(bindings);

  auto result = detail::call_structured<std::string>(
      engine.updater_backend(), make_request(engine.config, {{ChatRole::user, prompt}}), "update",
      engine.config.parse_retry, calls, [](const ExtractedJson& ex, const ChatResponse&) {
        return text_field(ex.value, {"evolving_summary"});
      });

  MemoryUpdate out{MemoryState::make(h_prev.text(), lambda, version, counter), false, std::nullopt,
                   false, false, 0, {}};
  out.parse_retries = result.parse_retries;
  out.repair_stages = result.stages;
  if (!result.value) {
    out.failed = true;
    out.error = result.error;
    return out;
  }
  MemoryState draft = MemoryState::draft(std::move(*result.value), lambda, version, counter);
  if (draft.within_budget()) {
    out.state = MemoryState::make(draft.text(), lambda, version, counter);
    return out;
  }
  Compression c = compress(draft, lambda, engine, calls);
  out.state = std::move(c.state);
  out.compressed = true;
  out.truncated = c.truncated;
  return out;
}

Compression compress(const MemoryState& h, std::size_t lambda, const EngineContext& engine,
                     std::vector<CallRecord>& calls) {
  if (h.token_count() <= lambda) {
    throw InvariantViolation("compress called on a state already within budget");
  }
  const TokenCounter& counter = engine.tokens();
  const std::string prompt =
      engine.prompt(TemplateId::memprompt_summarize).render({{"long_system_prompt", h.text()}});

  std::optional<std::string> candidate;
  try {
    auto result = detail::call_structured<std::string>(
        engine.updater_backend(), make_request(engine.config, {{ChatRole::user, prompt}}),
        "compress", false, calls, [](const ExtractedJson& ex, const ChatResponse&) {
          return text_field(ex.value, {"evolving_summary", "compressed_prompt", "summary"});
        });
    candidate = std::move(result.value);
  } catch (const TransportError&) {
    throw;
  } catch (const BackendError&) {
    // Truncation below is the total fallback.
  }
  if (candidate && counter.count(*candidate) <= lambda) {
    return {MemoryState::make(std::move(*candidate), lambda, h.version(), counter), false};
  }
  std::string kept = counter.keep_last(candidate ? *candidate : h.text(), lambda);
  return {MemoryState::make(std::move(kept), lambda, h.version(), counter), true};
}

RecurrentStrategy::RecurrentStrategy(const Sequence& sequence, const EngineContext& engine)
    : engine_(engine),
      sequence_id_(sequence.id),
      metadata_(sequence.metadata),
      memory_(initial_memory(engine)) {
  Bindings fixed = metadata_;
  fixed.insert_or_assign("evolving_summary", "");
  system_text_ = instruction_text(engine.prompt(TemplateId::sys_init), fixed);
}

StepTrace RecurrentStrategy::step(const SequenceStep& input) {
  const Observation& x = input.observation;
  input.reference.validate();
  StepTrace trace;
  trace.sequence_id = sequence_id_;
  trace.step_index = x.step_index;
  trace.strategy = StrategyKind::llm_as_rnn;
  trace.token_counter = std::string(engine_.tokens().name());
  trace.reference = input.reference;
  trace.memory_before = memory_;

  // Phase 1: contextualize and predict.
  const Context ctx = contextualize(system_text_, memory_, x, engine_.tokens(),
                                    engine_.config.context_limit);
  trace.context_text = ctx.text();
  trace.context_token_count = ctx.token_count;
  PredictOutcome outcome = predict(ctx, x, metadata_, engine_, trace.calls);
  trace.prediction = outcome.prediction;
  trace.prediction_error = outcome.error;
  trace.repair_stages = outcome.repair_stages;
  trace.parse_retries = outcome.parse_retries;

  if (engine_.config.shadow_full_history) {
    const Context full = fhc_context(history_, x, engine_.config.context_limit,
                                     instruction_text(engine_.prompt(TemplateId::fhc_memprompt), {}),
                                     engine_.tokens())
                             .context;
    PredictOutcome shadow = request_prediction(
        {{ChatRole::user, engine_.prompt(TemplateId::fhc_memprompt)
                              .render({{"patient_history", full.memory_text},
                                       {"current_visit", full.observation_text}})}},
        engine_.config.task, engine_.generator_backend(), engine_.config, "shadow_fhc",
        trace.calls);
    trace.shadow_prediction = shadow.prediction;
  }

  // Phase 2: reflect.
  Feedback feedback;
  try {
    feedback = reflect(outcome.prediction, input.reference, engine_, trace.calls);
  } catch (const JudgeUnavailable& e) {
    feedback.text = std::string("No evaluation feedback this step: ") + e.what();
  }
  trace.feedback = feedback;

  // Phase 3: rewrite memory.
  MemoryUpdate update =
      update_memory(memory_, x, outcome.prediction, feedback, input.reference, engine_, trace.calls);
  trace.memory_update_failed = update.failed;
  trace.compressed = update.compressed;
  trace.compression_truncated = update.truncated;
  trace.parse_retries += update.parse_retries;
  memory_ = std::move(update.state);
  trace.memory_after = memory_;

  history_.append(x, outcome.prediction);
  return trace;
}

}  // namespace llmrnn
