#include "doctest.h"
#include "llmrnn/domain.hpp"
#include "llmrnn/errors.hpp"
#include "test_support.hpp"

using namespace llmrnn;

TEST_CASE("enum names round-trip and unknown names are rejected") {
  for (auto k : {TaskKind::diagnosis, TaskKind::weather_summary, TaskKind::price_forecast}) {
    CHECK(parse_task_kind(to_string(k)) == k);
  }
  for (auto s : {StrategyKind::zero_shot, StrategyKind::fhc, StrategyKind::memprompt,
                 StrategyKind::llm_as_rnn}) {
    CHECK(parse_strategy(to_string(s)) == s);
  }
  CHECK(to_string(StrategyKind::llm_as_rnn) == "llm_as_rnn");
  CHECK(parse_supervision("open_ended") == SupervisionMode::open_ended);
  CHECK_THROWS_AS(parse_strategy("rnn"), ConfigError);
  CHECK_THROWS_AS(parse_task_kind("stocks"), ConfigError);
}

TEST_CASE("MemoryState::make enforces the budget, draft does not") {
  WhitespaceTokenCounter c;
  const MemoryState h = MemoryState::make("a b c", 3, 2, c);
  CHECK(h.token_count() == 3);
  CHECK(h.version() == 2);
  CHECK(h.within_budget());
  CHECK_THROWS_AS(MemoryState::make("a b c d", 3, 0, c), InvariantViolation);
  CHECK_THROWS_AS(MemoryState::make("a", 0, 0, c), InvariantViolation);
  const MemoryState d = MemoryState::draft("a b c d", 3, 1, c);
  CHECK_FALSE(d.within_budget());
  CHECK(d.token_count() == 4);
}

TEST_CASE("HistoryLog is append-only with increasing steps") {
  HistoryLog log;
  log.append(testing::visit_obs(1, "x"), std::nullopt);
  log.append(testing::visit_obs(3, "y"), std::nullopt);
  CHECK(log.size() == 2);
  CHECK_THROWS_AS(log.append(testing::visit_obs(3, "z"), std::nullopt), InvariantViolation);
  CHECK_THROWS_AS(log.append(testing::visit_obs(2, "z"), std::nullopt), InvariantViolation);
}

TEST_CASE("SummaryUnit is frozen") {
  SummaryUnit u(4, "sum", true);
  CHECK(u.frozen());
  CHECK(u.fallback());
  CHECK(u.step_index() == 4);
}

TEST_CASE("Reference validation by mode") {
  Reference r;
  CHECK_THROWS_AS(r.validate(), InvariantViolation);
  r.ground_truth = DiagnosisTruth{{"flu"}};
  CHECK_NOTHROW(r.validate());
  Reference o;
  o.mode = SupervisionMode::open_ended;
  CHECK_THROWS_AS(o.validate(), InvariantViolation);
  o.criteria = {"coherence"};
  CHECK_NOTHROW(o.validate());
}

TEST_CASE("RunConfig validation") {
  RunConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.temperature == doctest::Approx(0.7));
  CHECK(c.top_p == doctest::Approx(0.9));
  CHECK(c.max_tokens == 4096);
  CHECK(c.budget_lambda == 4096);
  c.budget_lambda = c.context_limit;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = RunConfig{};
  c.top_p = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = RunConfig{};
  c.token_counter = "nope";
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = RunConfig{};
  c.supervision = SupervisionMode::open_ended;
  c.criteria.clear();
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("label helpers normalize whitespace and case") {
  CHECK(normalize_space("  a \n b\t\tc ") == "a b c");
  CHECK(match_key(" Type 2  Diabetes ") == "type 2 diabetes");
  CHECK(labels_equal("Atrial  Fibrillation", "atrial fibrillation"));
  CHECK_FALSE(labels_equal("sepsis", "septic shock"));
}

TEST_CASE("primary calls are predict, judge and update") {
  CHECK(is_primary_call("predict"));
  CHECK(is_primary_call("judge"));
  CHECK(is_primary_call("update"));
  CHECK_FALSE(is_primary_call("predict_retry"));
  CHECK_FALSE(is_primary_call("compress"));
  CHECK_FALSE(is_primary_call("summarize"));
  CHECK_FALSE(is_primary_call("shadow_fhc"));
}

TEST_CASE("VisitRecord::section joins list values") {
  VisitRecord v;
  v.sections.push_back({"labs", {"a", "", "b"}, true});
  CHECK(v.section("labs") == "a; b");
  CHECK_FALSE(v.section("vitals").has_value());
}

TEST_CASE("StepTrace JSON round-trip is lossless") {
  WhitespaceTokenCounter c;
  StepTrace t;
  t.sequence_id = "p1";
  t.step_index = 2;
  t.token_counter = "whitespace";
  t.context_text = "sys\nmem\nobs";
  t.context_token_count = 3;
  t.prediction = Prediction{TaskKind::diagnosis, DiagnosisList{{"a", "b", "c", "d", "e"}}, "raw"};
  t.reference = testing::dx_ref({"a"});
  t.feedback = Feedback{"Correct", true, true, {}, "none"};
  t.memory_before = MemoryState::make("old", 8, 1, c);
  t.memory_after = MemoryState::make("new text", 8, 2, c);
  t.summaries.emplace_back(1, "unit one");
  t.calls.push_back(CallRecord{"predict", "s", "m", 0.7, 0.9, 10, "stop", 0, 0, 5, 3});
  t.judgment = Judgment{2, true, true, JudgmentSource::exact_match, std::nullopt};
  const std::string line = to_jsonl_line(t);
  CHECK(line.back() == '\n');
  CHECK(line.find('\n') == line.size() - 1);
  const StepTrace back = step_trace_from_json(Json::parse(line));
  CHECK(to_jsonl_line(back) == line);
  CHECK(back.memory_after->text() == "new text");
  CHECK(back.memory_after->version() == 2);
}

TEST_CASE("Observation payloads serialize with their kind") {
  Observation x = testing::visit_obs(1, "hello");
  Json j = x;
  Observation back = j.get<Observation>();
  CHECK(back.rendered_text == "hello");
  CHECK(std::holds_alternative<VisitRecord>(back.payload));

  TimeWindow w;
  w.rows.push_back({"2024-01-01", {{"close", 1.5}}, {{"headline", "up"}}});
  w.target_date = "2024-01-01";
  w.target_field = "close";
  Observation y;
  y.payload = w;
  Json jy = y;
  Observation yb = jy.get<Observation>();
  REQUIRE(std::holds_alternative<TimeWindow>(yb.payload));
  CHECK(std::get<TimeWindow>(yb.payload).rows[0].number("close") == 1.5);
}
