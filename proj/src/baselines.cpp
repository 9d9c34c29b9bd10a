#include "llmrnn/baselines.hpp"

#include <algorithm>

#include "call_support.hpp"
#include "llmrnn/errors.hpp"
#include "llmrnn/structured_output.hpp"

namespace llmrnn {

namespace {

std::string join_texts(const std::vector<std::string_view>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i != 0) out += '\n';
    out += parts[i];
  }
  return out;
}

std::string join_units(const std::vector<SummaryUnit>& units) {
  std::vector<std::string_view> parts;
  parts.reserve(units.size());
  for (const auto& u : units) parts.push_back(u.text());
  return join_texts(parts);
}

StepTrace start_trace(const std::string& sequence_id, const SequenceStep& input,
                      StrategyKind strategy, const TokenCounter& counter) {
  input.reference.validate();
  StepTrace trace;
  trace.sequence_id = sequence_id;
  trace.step_index = input.observation.step_index;
  trace.strategy = strategy;
  trace.token_counter = std::string(counter.name());
  trace.reference = input.reference;
  return trace;
}

void record_context(StepTrace& trace, const Context& ctx, std::size_t limit) {
  if (ctx.token_count > limit) {
    throw ObservationTooLarge("context for step " + std::to_string(trace.step_index) + " has " +
                              std::to_string(ctx.token_count) + " tokens, limit is " +
                              std::to_string(limit));
  }
  trace.context_text = ctx.text();
  trace.context_token_count = ctx.token_count;
}

void record_prediction(StepTrace& trace, PredictOutcome outcome) {
  trace.prediction = std::move(outcome.prediction);
  trace.prediction_error = std::move(outcome.error);
  trace.repair_stages = std::move(outcome.repair_stages);
  trace.parse_retries = outcome.parse_retries;
}

// Baseline prompts carry the history and the current observation in the
// fhc_memprompt slots.
PredictOutcome predict_with_history(const Context& ctx, const EngineContext& engine,
                                    std::vector<CallRecord>& calls) {
  const std::string prompt = engine.prompt(TemplateId::fhc_memprompt)
                                 .render({{"patient_history", ctx.memory_text},
                                          {"current_visit", ctx.observation_text}});
  return request_prediction({{ChatRole::user, prompt}}, engine.config.task,
                            engine.generator_backend(), engine.config, "predict", calls);
}

}  // namespace

Context zero_shot_context(std::string system_text, const Observation& x,
                          const TokenCounter& counter) {
  return make_context(std::move(system_text), {}, x.rendered_text, counter);
}

FhcContext fhc_context(const HistoryLog& history, const Observation& x, std::size_t context_limit,
                       std::string system_text, const TokenCounter& counter) {
  const auto& entries = history.entries();
  if (!entries.empty() && entries.back().observation.step_index >= x.step_index) {
    throw InvariantViolation("fhc_context: history is not older than the current observation");
  }
  const std::size_t base = counter.count(system_text) + counter.count(x.rendered_text);
  if (counter.count(make_context(system_text, {}, x.rendered_text, counter).text()) > context_limit) {
    throw ObservationTooLarge("step " + std::to_string(x.step_index) +
                              ": observation does not fit the context limit");
  }
  auto build = [&](std::size_t drop) {
    std::vector<std::string_view> parts;
    for (std::size_t i = drop; i < entries.size(); ++i) {
      parts.push_back(entries[i].observation.rendered_text);
    }
    return make_context(system_text, join_texts(parts), x.rendered_text, counter);
  };

  // Summed part counts bound the joined count from above for both built-in
  // counters, so the first drop whose sum fits is safe; then walk back while
  // keeping more history still fits.
  std::size_t drop = 0;
  std::size_t sum = base;
  for (const auto& e : entries) sum += counter.count(e.observation.rendered_text);
  while (drop < entries.size() && sum > context_limit) {
    sum -= counter.count(entries[drop].observation.rendered_text);
    ++drop;
  }
  Context ctx = build(drop);
  while (ctx.token_count > context_limit && drop < entries.size()) ctx = build(++drop);
  while (drop > 0) {
    Context wider = build(drop - 1);
    if (wider.token_count > context_limit) break;
    ctx = std::move(wider);
    --drop;
  }
  return {std::move(ctx), drop > 0, drop};
}

SummaryOutcome memprompt_summarize(const Observation& x, const EngineContext& engine,
                                   std::vector<CallRecord>& calls) {
  const TokenCounter& counter = engine.tokens();
  const std::size_t budget = engine.config.memprompt_unit_budget;
  const std::string prompt = engine.prompt(TemplateId::memprompt_summarize)
                                 .render({{"long_system_prompt", x.rendered_text}});
  auto result = detail::call_structured<std::string>(
      engine.generator_backend(), make_request(engine.config, {{ChatRole::user, prompt}}),
      "summarize", engine.config.parse_retry, calls,
      [](const ExtractedJson& ex, const ChatResponse&) {
        return text_field(ex.value, {"summary", "compressed_prompt", "evolving_summary"});
      });
  if (result.value) {
    return {SummaryUnit(x.step_index, counter.keep_first(normalize_space(*result.value), budget)),
            std::nullopt};
  }
  return {SummaryUnit(x.step_index, counter.keep_first(x.rendered_text, budget), true),
          result.error};
}

Context memprompt_context(const std::vector<SummaryUnit>& units, const Observation& x,
                          std::string system_text, const TokenCounter& counter) {
  for (std::size_t i = 1; i < units.size(); ++i) {
    if (units[i].step_index() < units[i - 1].step_index()) {
      throw InvariantViolation("memprompt_context: summary units out of order");
    }
  }
  return make_context(std::move(system_text), join_units(units), x.rendered_text, counter);
}

// ---------------------------------------------------------------------------

ZeroShotStrategy::ZeroShotStrategy(const Sequence& sequence, const EngineContext& engine)
    : engine_(engine),
      sequence_id_(sequence.id),
      metadata_(sequence.metadata),
      system_text_(instruction_text(engine.prompt(TemplateId::zero_shot), sequence.metadata)) {}

StepTrace ZeroShotStrategy::step(const SequenceStep& input) {
  const Observation& x = input.observation;
  StepTrace trace = start_trace(sequence_id_, input, StrategyKind::zero_shot, engine_.tokens());
  record_context(trace, zero_shot_context(system_text_, x, engine_.tokens()),
                 engine_.config.context_limit);
  const std::string prompt =
      engine_.prompt(TemplateId::zero_shot).render(prompt_bindings(metadata_, x));
  record_prediction(trace, request_prediction({{ChatRole::user, prompt}}, engine_.config.task,
                                              engine_.generator_backend(), engine_.config,
                                              "predict", trace.calls));
  return trace;
}

FhcStrategy::FhcStrategy(const Sequence& sequence, const EngineContext& engine)
    : engine_(engine),
      sequence_id_(sequence.id),
      system_text_(instruction_text(engine.prompt(TemplateId::fhc_memprompt), {})) {}

StepTrace FhcStrategy::step(const SequenceStep& input) {
  const Observation& x = input.observation;
  StepTrace trace = start_trace(sequence_id_, input, StrategyKind::fhc, engine_.tokens());
  FhcContext fhc =
      fhc_context(history_, x, engine_.config.context_limit, system_text_, engine_.tokens());
  record_context(trace, fhc.context, engine_.config.context_limit);
  trace.history_truncated = fhc.truncated;
  trace.dropped_observations = fhc.dropped;
  PredictOutcome outcome = predict_with_history(fhc.context, engine_, trace.calls);
  history_.append(x, outcome.prediction);
  record_prediction(trace, std::move(outcome));
  return trace;
}

MemPromptStrategy::MemPromptStrategy(const Sequence& sequence, const EngineContext& engine)
    : engine_(engine),
      sequence_id_(sequence.id),
      system_text_(instruction_text(engine.prompt(TemplateId::fhc_memprompt), {})) {}

StepTrace MemPromptStrategy::step(const SequenceStep& input) {
  const Observation& x = input.observation;
  StepTrace trace = start_trace(sequence_id_, input, StrategyKind::memprompt, engine_.tokens());
  if (x.step_index <= last_summarized_) {
    throw InvariantViolation("memprompt: step " + std::to_string(x.step_index) +
                             " was already summarized");
  }
  const Context ctx = memprompt_context(units_, x, system_text_, engine_.tokens());
  record_context(trace, ctx, engine_.config.context_limit);
  trace.summaries = units_;
  record_prediction(trace, predict_with_history(ctx, engine_, trace.calls));

  SummaryOutcome summary = memprompt_summarize(x, engine_, trace.calls);
  last_summarized_ = x.step_index;
  units_.push_back(std::move(summary.unit));
  std::size_t total = 0;
  for (const auto& u : units_) total += engine_.tokens().count(u.text());
  if (total > engine_.config.context_limit / 2) trace.summaries_compressed = compress_units(trace.calls);
  return trace;
}

bool MemPromptStrategy::compress_units(std::vector<CallRecord>& calls) {
  const TokenCounter& counter = engine_.tokens();
  const std::size_t limit = std::max<std::size_t>(1, engine_.config.context_limit / 4);
  const std::string joined = join_units(units_);
  const std::string prompt = engine_.prompt(TemplateId::memprompt_summarize)
                                 .render({{"long_system_prompt", joined}});
  std::optional<std::string> digest;
  try {
    auto result = detail::call_structured<std::string>(
        engine_.generator_backend(), make_request(engine_.config, {{ChatRole::user, prompt}}),
        "compress", false, calls, [](const ExtractedJson& ex, const ChatResponse&) {
          return text_field(ex.value, {"summary", "compressed_prompt", "evolving_summary"});
        });
    digest = std::move(result.value);
  } catch (const TransportError&) {
    throw;
  } catch (const BackendError&) {
    // Fall through to truncation.
  }
  if (!digest || counter.count(*digest) > limit) digest = counter.keep_last(joined, limit);
  const int step = units_.back().step_index();
  units_.clear();
  units_.emplace_back(step, std::move(*digest));
  return true;
}

}  // namespace llmrnn
