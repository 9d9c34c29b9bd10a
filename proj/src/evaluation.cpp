#include "llmrnn/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "call_support.hpp"
#include "llmrnn/errors.hpp"
#include "llmrnn/structured_output.hpp"

namespace llmrnn {

namespace {

std::string shortest(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) return "nan";
  return std::string(buf, end);
}

std::string fixed(double value, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, value);
  return buf;
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i != 0) out += sep;
    out += items[i];
  }
  return out;
}

template <typename T>
const T& expect_alternative(const auto& variant, std::string_view what) {
  if (const T* v = std::get_if<T>(&variant)) return *v;
  throw InvariantViolation("prediction and ground truth disagree on task (" + std::string(what) +
                           ")");
}

Json prediction_json(const Prediction& p) {
  return std::visit(
      [](const auto& v) -> Json {
        using V = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<V, DiagnosisList>) {
          Json top = Json::array();
          for (const auto& name : v.ranked) top.push_back(Json{{"name", name}});
          return Json{{"top_5_diagnoses", std::move(top)},
                      {"primary_diagnosis", Json{{"name", v.primary()}}}};
        } else if constexpr (std::is_same_v<V, SummaryText>) {
          return Json{{"summary", v.text}};
        } else {
          return Json{{"close_price", v.close}};
        }
      },
      p.structured);
}

std::optional<double> truth_price(const StepTrace& t) {
  if (!t.reference.ground_truth) return std::nullopt;
  if (const auto* p = std::get_if<PriceForecast>(&*t.reference.ground_truth)) return p->close;
  return std::nullopt;
}

std::optional<double> predicted_price(const StepTrace& t) {
  if (!t.prediction) return std::nullopt;
  if (const auto* p = std::get_if<PriceForecast>(&t.prediction->structured)) return p->close;
  return std::nullopt;
}

bool counts_for(const StepTrace& t, MetricId metric) {
  if (metric == MetricId::mae || metric == MetricId::mse) {
    return predicted_price(t) && truth_price(t);
  }
  return t.judgment.has_value();
}

// Mean of the metric over a set of steps that all count for it.
double metric_value(const std::vector<const StepTrace*>& steps, MetricId metric) {
  double sum = 0.0;
  for (const StepTrace* t : steps) {
    switch (metric) {
      case MetricId::acc1:
      case MetricId::alignment:
        sum += t->judgment->primary_correct ? 1.0 : 0.0;
        break;
      case MetricId::acc5:
        sum += t->judgment->any_top5_correct ? 1.0 : 0.0;
        break;
      case MetricId::mae:
        sum += std::abs(*predicted_price(*t) - *truth_price(*t));
        break;
      case MetricId::mse: {
        const double d = *predicted_price(*t) - *truth_price(*t);
        sum += d * d;
        break;
      }
    }
  }
  return sum / static_cast<double>(steps.size());
}

std::vector<MetricId> metrics_for(TaskKind task) {
  switch (task) {
    case TaskKind::diagnosis: return {MetricId::acc1, MetricId::acc5};
    case TaskKind::weather_summary: return {MetricId::alignment};
    case TaskKind::price_forecast: return {MetricId::mae, MetricId::mse};
  }
  return {};
}

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

// ---------------------------------------------------------------------------
// Matching

MatchResult match_prediction(const Prediction& prediction, const GroundTruth& truth,
                             double price_tolerance) {
  MatchResult out;
  if (const auto* dx = std::get_if<DiagnosisTruth>(&truth)) {
    const auto& list = expect_alternative<DiagnosisList>(prediction.structured, "diagnosis");
    if (dx->diagnoses.empty()) throw InvariantViolation("diagnosis ground truth is empty");
    auto listed = [&](const std::string& name) {
      return std::any_of(list.ranked.begin(), list.ranked.end(),
                         [&](const std::string& r) { return labels_equal(r, name); });
    };
    out.primary_correct = !list.ranked.empty() && labels_equal(list.primary(), dx->diagnoses.front());
    out.any_top5_correct = listed(dx->diagnoses.front());
    for (const auto& name : dx->diagnoses) {
      if (!listed(name)) out.missed.push_back(name);
    }
  } else if (const auto* summary = std::get_if<SummaryText>(&truth)) {
    const auto& pred = expect_alternative<SummaryText>(prediction.structured, "summary");
    out.primary_correct = labels_equal(pred.text, summary->text);
    out.any_top5_correct = out.primary_correct;
  } else {
    const auto& price = std::get<PriceForecast>(truth);
    const auto& pred = expect_alternative<PriceForecast>(prediction.structured, "price");
    out.primary_correct = std::abs(pred.close - price.close) <= price_tolerance * std::abs(price.close);
    out.any_top5_correct = out.primary_correct;
  }
  return out;
}

std::string describe(const GroundTruth& truth) {
  return std::visit(
      [](const auto& v) -> std::string {
        using V = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<V, DiagnosisTruth>) {
          return join(v.diagnoses, "; ");
        } else if constexpr (std::is_same_v<V, SummaryText>) {
          return v.text;
        } else {
          return shortest(v.close);
        }
      },
      truth);
}

std::string describe(const Prediction& prediction) { return prediction_json(prediction).dump(); }

std::string expected_label(const GroundTruth& truth) {
  if (const auto* dx = std::get_if<DiagnosisTruth>(&truth)) {
    return dx->diagnoses.empty() ? std::string() : dx->diagnoses.front();
  }
  return describe(truth);
}

std::string generated_label(const Prediction& prediction) {
  return std::visit(
      [](const auto& v) -> std::string {
        using V = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<V, DiagnosisList>) {
          return v.primary();
        } else if constexpr (std::is_same_v<V, SummaryText>) {
          return v.text;
        } else {
          return shortest(v.close);
        }
      },
      prediction.structured);
}

Judgment exact_match_judgment(int step_index, const Prediction& prediction,
                              const GroundTruth& truth, double price_tolerance) {
  const MatchResult m = match_prediction(prediction, truth, price_tolerance);
  Judgment j;
  j.step_index = step_index;
  j.primary_correct = m.primary_correct;
  j.any_top5_correct = m.any_top5_correct;
  j.source = JudgmentSource::exact_match;
  return j;
}

// ---------------------------------------------------------------------------
// Scalar metrics

double acc_at_k(std::span<const Judgment> judgments, int k) {
  if (k != 1 && k != 5) throw InvariantViolation("acc_at_k: k must be 1 or 5");
  if (judgments.empty()) throw EmptyInput("acc_at_k: no judgments");
  std::size_t hits = 0;
  for (const auto& j : judgments) hits += (k == 1 ? j.primary_correct : j.any_top5_correct) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(judgments.size());
}

double alignment_rate(std::span<const Judgment> judgments) {
  if (judgments.empty()) throw EmptyInput("alignment_rate: no judgments");
  std::size_t hits = 0;
  for (const auto& j : judgments) hits += j.primary_correct ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(judgments.size());
}

RegressionErrors regression_errors(std::span<const double> predictions,
                                   std::span<const double> truths) {
  if (predictions.size() != truths.size()) {
    throw LengthMismatch("regression_errors: " + std::to_string(predictions.size()) +
                         " predictions vs " + std::to_string(truths.size()) + " truths");
  }
  if (predictions.empty()) throw EmptyInput("regression_errors: no values");
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (!std::isfinite(predictions[i]) || !std::isfinite(truths[i])) {
      throw NonFiniteValue("regression_errors: non-finite value at index " + std::to_string(i));
    }
    const double d = predictions[i] - truths[i];
    abs_sum += std::abs(d);
    sq_sum += d * d;
  }
  const auto n = static_cast<double>(predictions.size());
  return {abs_sum / n, sq_sum / n};
}

// ---------------------------------------------------------------------------
// Transitions and curves

std::optional<double> TransitionMatrix::recovery_rate() const {
  if (ft + ff == 0) return std::nullopt;
  return static_cast<double>(ft) / static_cast<double>(ft + ff);
}

TransitionMatrix& TransitionMatrix::operator+=(const TransitionMatrix& other) {
  tt += other.tt;
  tf += other.tf;
  ft += other.ft;
  ff += other.ff;
  return *this;
}

TransitionMatrix transition_counts(const std::vector<bool>& correctness) {
  TransitionMatrix m;
  for (std::size_t i = 1; i < correctness.size(); ++i) {
    const bool prev = correctness[i - 1];
    const bool cur = correctness[i];
    if (prev && cur) ++m.tt;
    if (prev && !cur) ++m.tf;
    if (!prev && cur) ++m.ft;
    if (!prev && !cur) ++m.ff;
  }
  return m;
}

TransitionMatrix transition_matrix(const std::vector<std::vector<bool>>& sequences) {
  TransitionMatrix total;
  for (const auto& s : sequences) total += transition_counts(s);
  return total;
}

std::string_view to_string(MetricId metric) {
  switch (metric) {
    case MetricId::acc1: return "acc@1";
    case MetricId::acc5: return "acc@5";
    case MetricId::alignment: return "alignment";
    case MetricId::mae: return "mae";
    case MetricId::mse: return "mse";
  }
  return "acc@1";
}

std::vector<CurvePoint> temporal_curve(const std::vector<std::vector<StepTrace>>& traces,
                                       MetricId metric) {
  std::map<int, std::pair<std::size_t, std::vector<const StepTrace*>>> by_index;
  for (const auto& sequence : traces) {
    for (const auto& step : sequence) {
      auto& [reached, counted] = by_index[step.step_index];
      ++reached;
      if (counts_for(step, metric)) counted.push_back(&step);
    }
  }
  std::vector<CurvePoint> curve;
  for (const auto& [index, entry] : by_index) {
    CurvePoint p;
    p.step_index = index;
    p.sequences = entry.first;
    p.counted = entry.second.size();
    if (!entry.second.empty()) p.value = metric_value(entry.second, metric);
    curve.push_back(p);
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Judge

std::vector<JudgedStep> judge_predictions(const std::vector<std::optional<Prediction>>& predictions,
                                          const std::vector<GroundTruth>& truths,
                                          const ChatBackend& judge, const RunConfig& config,
                                          const TemplateRegistry& templates) {
  if (predictions.size() != truths.size()) {
    throw LengthMismatch("judge_predictions: predictions and truths differ in length");
  }
  std::vector<JudgedStep> out(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    JudgedStep& step = out[i];
    if (!predictions[i]) {
      step.error = "no prediction to judge";
      continue;
    }
    const Prediction& pred = *predictions[i];
    const std::string truth_text = describe(truths[i]);
    const Bindings bindings{{"prediction", describe(pred)},
                            {"ground_truth_diagnoses", truth_text},
                            {"ground_truth", truth_text}};
    const std::string prompt = templates.get(pred.task_kind, TemplateId::g_eval).render(bindings);
    try {
      auto result = detail::call_structured<JudgeVerdict>(
          judge, make_request(config, {{ChatRole::user, prompt}}), "judge", config.parse_retry,
          step.calls,
          [&](const ExtractedJson& ex, const ChatResponse&) {
            return parse_judge_verdict(ex.value, pred.task_kind);
          });
      if (!result.value) {
        step.error = result.error.value_or("judge output unusable");
        continue;
      }
      Judgment j;
      j.step_index = static_cast<int>(i) + 1;
      j.primary_correct = result.value->primary_correct;
      j.any_top5_correct = result.value->any_top5_correct.value_or(j.primary_correct);
      j.source = JudgmentSource::llm_judge;
      j.raw = result.value->raw;
      step.judgment = std::move(j);
    } catch (const Error& e) {
      step.error = std::string("judge call failed: ") + e.what();
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report

Report build_report(const std::vector<std::vector<StepTrace>>& traces, const RunConfig& config) {
  Report r;
  r.strategy = std::string(to_string(config.strategy));
  r.task = std::string(to_string(config.task));
  r.supervision = std::string(to_string(config.supervision));
  r.model_id = config.model_id;
  r.budget_lambda = config.budget_lambda;
  r.sequences = traces.size();

  std::vector<Judgment> judgments;
  std::vector<double> preds;
  std::vector<double> truths;
  bool any_llm = false;
  bool any_exact = false;
  for (const auto& sequence : traces) {
    const StepTrace* previous = nullptr;
    for (const auto& t : sequence) {
      ++r.steps;
      if (!t.repair_stages.empty()) ++r.repaired_steps;
      r.parse_retries += static_cast<std::size_t>(t.parse_retries);
      if (t.memory_update_failed) ++r.memory_update_failures;
      if (t.compressed || t.summaries_compressed) ++r.compressions;
      if (t.history_truncated) ++r.truncated_contexts;
      r.max_context_tokens = std::max(r.max_context_tokens, t.context_token_count);
      if (t.memory_after) r.max_memory_tokens = std::max(r.max_memory_tokens, t.memory_after->token_count());
      for (const auto& c : t.calls) (is_primary_call(c.purpose) ? r.primary_calls : r.auxiliary_calls)++;
      for (const auto& c : t.evaluation_calls) (is_primary_call(c.purpose) ? r.primary_calls : r.auxiliary_calls)++;

      if (config.task == TaskKind::price_forecast) {
        if (auto p = predicted_price(t), y = truth_price(t); p && y) {
          preds.push_back(*p);
          truths.push_back(*y);
        } else {
          ++r.excluded_steps;
        }
      } else if (!t.judgment) {
        ++r.excluded_steps;
      }
      if (t.judgment) {
        ++r.judged_steps;
        judgments.push_back(*t.judgment);
        (t.judgment->source == JudgmentSource::llm_judge ? any_llm : any_exact) = true;
        // Pairs only span consecutive judged steps.
        if (previous && previous->judgment && previous->step_index + 1 == t.step_index) {
          r.transitions += transition_counts(
              {previous->judgment->primary_correct, t.judgment->primary_correct});
        }
      }
      previous = &t;
    }
  }
  r.judge_source = any_llm && any_exact ? "mixed" : any_llm ? "llm_judge" : "exact_match";

  switch (config.task) {
    case TaskKind::diagnosis:
      if (!judgments.empty()) {
        r.acc1 = acc_at_k(judgments, 1);
        r.acc5 = acc_at_k(judgments, 5);
      }
      break;
    case TaskKind::weather_summary:
      if (!judgments.empty()) r.alignment = alignment_rate(judgments);
      break;
    case TaskKind::price_forecast:
      if (!preds.empty()) {
        const auto e = regression_errors(preds, truths);
        r.mae = e.mae;
        r.mse = e.mse;
      }
      break;
  }
  for (MetricId m : metrics_for(config.task)) r.curves.emplace_back(m, temporal_curve(traces, m));
  return r;
}

Json report_json(const Report& r) {
  Json curves = Json::object();
  for (const auto& [metric, points] : r.curves) {
    Json series = Json::array();
    for (const auto& p : points) {
      series.push_back(Json{{"step_index", p.step_index},
                            {"sequences", p.sequences},
                            {"counted", p.counted},
                            {"value", optional_number(p.value)}});
    }
    curves[std::string(to_string(metric))] = std::move(series);
  }
  return Json{
      {"strategy", r.strategy},
      {"task", r.task},
      {"supervision", r.supervision},
      {"model_id", r.model_id},
      {"budget_lambda", r.budget_lambda},
      {"judge_source", r.judge_source},
      {"sequences", r.sequences},
      {"steps", r.steps},
      {"judged_steps", r.judged_steps},
      {"excluded_steps", r.excluded_steps},
      {"repaired_steps", r.repaired_steps},
      {"parse_retries", r.parse_retries},
      {"memory_update_failures", r.memory_update_failures},
      {"compressions", r.compressions},
      {"truncated_contexts", r.truncated_contexts},
      {"metrics",
       {{"acc@1", optional_number(r.acc1)},
        {"acc@5", optional_number(r.acc5)},
        {"alignment", optional_number(r.alignment)},
        {"mae", optional_number(r.mae)},
        {"mse", optional_number(r.mse)}}},
      {"transitions",
       {{"T->T", r.transitions.tt},
        {"T->F", r.transitions.tf},
        {"F->T", r.transitions.ft},
        {"F->F", r.transitions.ff},
        {"recovery_rate", optional_number(r.transitions.recovery_rate())}}},
      {"max_context_tokens", r.max_context_tokens},
      {"max_memory_tokens", r.max_memory_tokens},
      {"primary_calls", r.primary_calls},
      {"auxiliary_calls", r.auxiliary_calls},
      {"curves", std::move(curves)}};
}

std::string report_table(const std::vector<Report>& reports) {
  const std::vector<std::string> header = {"Method", "Task",  "Mode",  "Backbone", "Lambda",
                                           "Steps",  "Excl.", "Acc@1", "Acc@5",    "Align",
                                           "MAE",    "MSE"};
  auto cell = [](const std::optional<double>& v, int precision) {
    return v ? fixed(*v, precision) : std::string("-");
  };
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : reports) {
    rows.push_back({r.strategy, r.task, r.supervision, r.model_id, std::to_string(r.budget_lambda),
                    std::to_string(r.steps), std::to_string(r.excluded_steps), cell(r.acc1, 4),
                    cell(r.acc5, 4), cell(r.alignment, 4), cell(r.mae, 3), cell(r.mse, 3)});
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& row : rows) width[c] = std::max(width[c], row[c].size());
  }
  // Text columns align left, numeric columns right.
  auto line = [&](const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c != 0) out += "  ";
      const std::string pad(width[c] - cells[c].size(), ' ');
      out += c < 4 ? cells[c] + pad : pad + cells[c];
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out + "\n";
  };
  std::string out = line(header);
  std::size_t rule = 0;
  for (std::size_t w : width) rule += w;
  out += std::string(rule + 2 * (width.size() - 1), '-') + "\n";
  for (const auto& row : rows) out += line(row);
  return out;
}

std::string curves_csv(const Report& report) {
  std::string out = "step_index,metric,sequences,counted,value\n";
  for (const auto& [metric, points] : report.curves) {
    for (const auto& p : points) {
      out += std::to_string(p.step_index) + "," + std::string(to_string(metric)) + "," +
             std::to_string(p.sequences) + "," + std::to_string(p.counted) + "," +
             (p.value ? fixed(*p.value, 6) : std::string()) + "\n";
    }
  }
  return out;
}

std::string transitions_text(const Report& report) {
  const auto& m = report.transitions;
  std::ostringstream out;
  out << "Transitions (t -> t+1)\n";
  out << "           next T  next F\n";
  out << "  prev T  " << std::string(7 - std::min<std::size_t>(7, std::to_string(m.tt).size()), ' ')
      << m.tt << " " << std::string(7 - std::min<std::size_t>(7, std::to_string(m.tf).size()), ' ')
      << m.tf << "\n";
  out << "  prev F  " << std::string(7 - std::min<std::size_t>(7, std::to_string(m.ft).size()), ' ')
      << m.ft << " " << std::string(7 - std::min<std::size_t>(7, std::to_string(m.ff).size()), ' ')
      << m.ff << "\n";
  const auto rate = m.recovery_rate();
  out << "  recovery rate: " << (rate ? fixed(*rate, 4) : std::string("n/a")) << "\n";
  return out.str();
}

}  // namespace llmrnn
