#include "doctest.h"
#include "llmrnn/errors.hpp"
#include "llmrnn/evaluation.hpp"
#include "test_support.hpp"

using namespace llmrnn;

namespace {

Judgment judged(int step, bool top1, bool top5 = true) {
  return Judgment{step, top1, top5, JudgmentSource::exact_match, std::nullopt};
}

StepTrace trace_with(int step, std::optional<bool> correct) {
  StepTrace t;
  t.step_index = step;
  if (correct) t.judgment = judged(step, *correct);
  t.calls.push_back(CallRecord{"predict"});
  t.calls.push_back(CallRecord{"update"});
  t.calls.push_back(CallRecord{"update_retry"});
  return t;
}

StepTrace price_trace(int step, std::optional<double> predicted, double truth) {
  StepTrace t;
  t.step_index = step;
  if (predicted) t.prediction = Prediction{TaskKind::price_forecast, PriceForecast{*predicted}, ""};
  t.reference.ground_truth = PriceForecast{truth};
  return t;
}

Prediction dx(std::vector<std::string> ranked) {
  return Prediction{TaskKind::diagnosis, DiagnosisList{std::move(ranked)}, ""};
}

}  // namespace

TEST_CASE("exact matching per task") {
  const auto m = match_prediction(dx({"Flu", "sepsis", "c", "d", "e"}), DiagnosisTruth{{"sepsis", "flu", "aki"}}, 0.01);
  CHECK_FALSE(m.primary_correct);
  CHECK(m.any_top5_correct);
  CHECK(m.missed == std::vector<std::string>{"aki"});

  const auto w = match_prediction(Prediction{TaskKind::weather_summary, SummaryText{"Partly  Cloudy"}, ""},
                                  SummaryText{"partly cloudy"}, 0.01);
  CHECK(w.primary_correct);

  // 1% of 200 is 2: 202 is inside, 202.5 is not.
  CHECK(match_prediction(Prediction{TaskKind::price_forecast, PriceForecast{202}, ""}, PriceForecast{200}, 0.01)
            .primary_correct);
  CHECK_FALSE(match_prediction(Prediction{TaskKind::price_forecast, PriceForecast{202.5}, ""},
                               PriceForecast{200}, 0.01)
                  .primary_correct);
  CHECK_THROWS_AS(match_prediction(dx({"a", "b", "c", "d", "e"}), SummaryText{"x"}, 0.01), InvariantViolation);

  const Judgment j = exact_match_judgment(4, dx({"a", "b", "c", "d", "e"}), DiagnosisTruth{{"b"}}, 0.01);
  CHECK(j.step_index == 4);
  CHECK_FALSE(j.primary_correct);
  CHECK(j.any_top5_correct);
  CHECK(j.source == JudgmentSource::exact_match);
}

TEST_CASE("labels for feedback") {
  CHECK(describe(GroundTruth{DiagnosisTruth{{"a", "b"}}}) == "a; b");
  CHECK(describe(GroundTruth{PriceForecast{4012.5}}) == "4012.5");
  CHECK(expected_label(DiagnosisTruth{{"a", "b"}}) == "a");
  CHECK(generated_label(dx({"x", "b", "c", "d", "e"})) == "x");
}

TEST_CASE("accuracy at k and alignment") {
  const std::vector<Judgment> js = {judged(1, true), judged(2, false, true), judged(3, false, false),
                                    judged(4, true)};
  CHECK(acc_at_k(js, 1) == 0.5);
  CHECK(acc_at_k(js, 5) == 0.75);
  CHECK(alignment_rate(js) == 0.5);
  CHECK_THROWS_AS(acc_at_k(js, 3), InvariantViolation);
  CHECK_THROWS_AS(acc_at_k({}, 1), EmptyInput);
  CHECK_THROWS_AS(alignment_rate({}), EmptyInput);
}

TEST_CASE("regression errors") {
  const std::vector<double> p = {1, 2, 4};
  const std::vector<double> y = {1.5, 2, 1};
  const auto e = regression_errors(p, y);
  CHECK(e.mae == doctest::Approx(3.5 / 3));
  CHECK(e.mse == doctest::Approx(9.25 / 3));
  const std::vector<double> short_y = {1};
  CHECK_THROWS_AS(regression_errors(p, short_y), LengthMismatch);
  CHECK_THROWS_AS(regression_errors({}, {}), EmptyInput);
  const std::vector<double> bad = {1, std::nan(""), 2};
  CHECK_THROWS_AS(regression_errors(bad, y), NonFiniteValue);
}

TEST_CASE("transition counts") {
  const TransitionMatrix m = transition_counts({true, false, false, true, true});
  CHECK(m == TransitionMatrix{1, 1, 1, 1});
  CHECK(m.recovery_rate() == 0.5);
  CHECK(transition_counts({true}).total() == 0);
  CHECK_FALSE(transition_counts({true, true}).recovery_rate().has_value());
  CHECK(transition_matrix({{true, false, false, true, true}, {false, false}, {}}) ==
        TransitionMatrix{1, 1, 1, 2});
}

TEST_CASE("report from traces: metrics, exclusions, transitions and curves") {
  std::vector<std::vector<StepTrace>> traces(2);
  for (int i = 0; i < 5; ++i) {
    const bool pattern[] = {true, false, false, true, true};
    traces[0].push_back(trace_with(i + 1, pattern[i]));
  }
  traces[1].push_back(trace_with(1, true));
  traces[1].push_back(trace_with(2, std::nullopt));
  traces[1].push_back(trace_with(3, false));
  RunConfig cfg;
  cfg.model_id = "m";
  cfg.budget_lambda = 512;
  const Report r = build_report(traces, cfg);
  CHECK(r.steps == 8);
  CHECK(r.judged_steps == 7);
  CHECK(r.excluded_steps == 1);
  CHECK(r.acc1 == doctest::Approx(4.0 / 7.0));
  CHECK(r.acc5 == 1.0);
  CHECK_FALSE(r.mae.has_value());
  // The unjudged step breaks the pair in the second sequence.
  CHECK(r.transitions == TransitionMatrix{1, 1, 1, 1});
  CHECK(r.judge_source == "exact_match");
  CHECK(r.primary_calls == 16);
  CHECK(r.auxiliary_calls == 8);

  CHECK(curves_csv(r) ==
        "step_index,metric,sequences,counted,value\n"
        "1,acc@1,2,2,1.000000\n"
        "2,acc@1,2,1,0.000000\n"
        "3,acc@1,2,2,0.000000\n"
        "4,acc@1,1,1,1.000000\n"
        "5,acc@1,1,1,1.000000\n"
        "1,acc@5,2,2,1.000000\n"
        "2,acc@5,2,1,1.000000\n"
        "3,acc@5,2,2,1.000000\n"
        "4,acc@5,1,1,1.000000\n"
        "5,acc@5,1,1,1.000000\n");
  CHECK(transitions_text(r) ==
        "Transitions (t -> t+1)\n"
        "           next T  next F\n"
        "  prev T        1       1\n"
        "  prev F        1       1\n"
        "  recovery rate: 0.5000\n");

  const Json j = report_json(r);
  CHECK(j.at("metrics").at("acc@5") == 1.0);
  CHECK(j.at("metrics").at("mae").is_null());
  CHECK(j.at("transitions").at("recovery_rate") == 0.5);
  CHECK(build_report(traces, cfg).curves.size() == 2);
  CHECK(report_json(build_report(traces, cfg)).dump() == j.dump());
}

TEST_CASE("price reports use MAE and MSE over steps with a forecast") {
  RunConfig cfg;
  cfg.task = TaskKind::price_forecast;
  const std::vector<std::vector<StepTrace>> traces = {
      {price_trace(1, 101.0, 100.0), price_trace(2, std::nullopt, 100.0), price_trace(3, 97.0, 100.0)}};
  const Report r = build_report(traces, cfg);
  CHECK(r.mae == 2.0);
  CHECK(r.mse == 5.0);
  CHECK(r.excluded_steps == 1);
  CHECK(r.curves.size() == 2);
  CHECK(r.curves[0].second[1].counted == 0);
  CHECK_FALSE(r.curves[0].second[1].value.has_value());
}

TEST_CASE("report table formatting") {
  Report a;
  a.strategy = "llm_as_rnn";
  a.task = "diagnosis";
  a.supervision = "supervised";
  a.model_id = "m";
  a.budget_lambda = 512;
  a.steps = 10;
  a.acc1 = 0.5;
  a.acc5 = 0.9;
  CHECK(report_table({a}) ==
        "Method      Task       Mode        Backbone  Lambda  Steps  Excl.   Acc@1   Acc@5  Align  MAE  MSE\n"
        + std::string(98, '-') + "\n" +
        "llm_as_rnn  diagnosis  supervised  m            512     10      0  0.5000  0.9000      -    -    -\n");

  Report p;
  p.strategy = "fhc";
  p.task = "price_forecast";
  p.supervision = "supervised";
  p.model_id = "m";
  p.budget_lambda = 256;
  p.steps = 3;
  p.excluded_steps = 1;
  p.mae = 1.1046;
  p.mse = 2.0;
  const std::string table = report_table({p});
  CHECK(table.find("fhc     price_forecast  supervised  m            256      3      1      -      -      -  1.105  2.000\n") !=
        std::string::npos);
}

TEST_CASE("LLM judging is per step and never aborts the batch") {
  ScriptTable t;
  t.add_regex("PREDICTED OUTPUT \\(JSON\\): [^\\n]*\"good\"",
              R"({"diagnosis_evaluation":{"primary_correct":true,"any_top5_correct":true}})");
  t.add_substring("evaluating predicted", "no verdict here");
  auto judge = testing::scripted(t, "judge");
  const std::vector<std::optional<Prediction>> preds = {dx({"good", "b", "c", "d", "e"}),
                                                        dx({"bad", "b", "c", "d", "e"}), std::nullopt};
  const std::vector<GroundTruth> truths = {DiagnosisTruth{{"x"}}, DiagnosisTruth{{"x"}},
                                           DiagnosisTruth{{"x"}}};
  const auto out = judge_predictions(preds, truths, *judge, RunConfig{}, TemplateRegistry::builtin());
  REQUIRE(out.size() == 3);
  REQUIRE(out[0].judgment.has_value());
  CHECK(out[0].judgment->primary_correct);
  CHECK(out[0].judgment->source == JudgmentSource::llm_judge);
  CHECK(out[0].calls.size() == 1);
  CHECK(out[1].error.has_value());
  CHECK(out[1].calls.size() == 2);
  CHECK(out[2].error.has_value());
  CHECK(out[2].calls.empty());
  CHECK_THROWS_AS(judge_predictions(preds, {}, *judge, RunConfig{}, TemplateRegistry::builtin()),
                  LengthMismatch);
}
