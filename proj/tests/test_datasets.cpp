#include "doctest.h"
#include "llmrnn/datasets.hpp"
#include "llmrnn/errors.hpp"
#include "llmrnn/hashing.hpp"
#include "test_support.hpp"

using namespace llmrnn;

namespace {

TopicSet topics(std::initializer_list<const char*> names) {
  TopicSet s;
  for (auto n : names) s.insert(n);
  return s;
}

SeriesSchema price_schema(int window = 2) {
  SeriesSchema s;
  s.task = TaskKind::price_forecast;
  s.numeric = {"open", "close"};
  s.text = {"headline"};
  s.target = "close";
  s.window = window;
  return s;
}

const char* kPriceCsv =
    "date,open,close,headline\n"
    "2024-01-01,10,11,\"up, strongly\"\n"
    "2024-01-02,11,10.5,down\n"
    "2024-01-03,10.5,12.25,up\n";

}  // namespace

TEST_CASE("visit text joins every source, lowercased") {
  VisitRecord v;
  v.sections.push_back({"hpi", {"Chest PAIN"}, false});
  v.sections.push_back({"labs", {"Troponin", "BNP"}, true});
  v.notes = "Seen by Cardiology";
  v.chief_complaint = "Dyspnea";
  v.allergies = "  ";
  v.service = "MED";
  CHECK(build_visit_text(v) == "chest pain troponin bnp seen by cardiology dyspnea med");
  CHECK_THROWS_AS(build_visit_text(VisitRecord{}), EmptyVisit);
}

TEST_CASE("topic assignment keeps the three best scores, lexicon order on ties") {
  CHECK(assign_topics("heart failure with pneumonia") == topics({"cardiovascular", "respiratory"}));
  // Scores: cardiovascular 2, renal 2, respiratory 1, infectious 1.
  CHECK(assign_topics("heart hypertension kidney dialysis lung sepsis") ==
        topics({"cardiovascular", "renal", "respiratory"}));
  CHECK(assign_topics("no keywords here").empty());
  CHECK(topic_score("atrial fibrillation", TopicLexicon::standard().topics()[0]) == 2);
  CHECK(TopicLexicon::standard().order_of("infectious") == 7);
  CHECK_THROWS_AS(TopicLexicon::standard().order_of("dermatology"), ConfigError);
}

TEST_CASE("topic similarity is Jaccard") {
  CHECK(topic_similarity(topics({"a", "b"}), topics({"b", "c"})) == doctest::Approx(1.0 / 3.0));
  CHECK(topic_similarity(topics({"a"}), topics({"a"})) == 1.0);
  CHECK(topic_similarity({}, topics({"a"})) == 0.0);
  CHECK(topic_similarity({}, {}) == 0.0);
}

TEST_CASE("group discovery: single pass with mean similarity") {
  FilterParams p;
  const auto A = topics({"a"});
  const auto B = topics({"b"});
  const auto AB = topics({"a", "b"});
  CHECK(discover_groups({A, A, A, B, B}, p) == std::vector<VisitGroup>{{0, 3}, {3, 5}});
  // Jaccard(AB, A) = 0.5 < 0.6 splits; the singleton is dropped.
  CHECK(discover_groups({AB, A, A, B}, p) == std::vector<VisitGroup>{{1, 3}});
  p.tau = 0.5;
  CHECK(discover_groups({AB, A, A, B}, p) == std::vector<VisitGroup>{{0, 3}});
  p.tau = 0.6;
  // No group survives: the whole sequence is one group.
  CHECK(discover_groups({A, B, A}, p) == std::vector<VisitGroup>{{0, 3}});
  CHECK(discover_groups({}, p).empty());
  CHECK(largest_group({{0, 2}, {2, 4}, {4, 5}}) == VisitGroup{0, 2});
  CHECK(largest_group({{0, 2}, {2, 5}}) == VisitGroup{2, 5});
}

TEST_CASE("filter params are validated") {
  FilterParams p;
  p.tau = 1.5;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = {};
  p.cohort_min = 30;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("cohort filter matches the hand-verified fixture") {
  const Json fixture =
      Json::parse(testing::slurp(testing::source_dir() / "tests/data/filter_fixture.json"));
  FilterParams p;
  const Json& jp = fixture.at("params");
  p.tau = jp.at("tau");
  p.min_group = jp.at("min_group");
  p.min_retained = jp.at("min_retained");
  p.cohort_min = jp.at("cohort_min");
  p.cohort_max = jp.at("cohort_max");

  const FilterResult r = filter_cohort(fixture.at("input"), p);
  Json retained = Json::object();
  for (const auto& patient : r.dataset) {
    Json idx = Json::array();
    for (const auto& v : patient.at("visits")) idx.push_back(v.at("visit_index"));
    retained[patient.at("patient_id").get<std::string>()] = idx;
  }
  CHECK(retained == fixture.at("expected_retained"));

  const Json& es = fixture.at("expected_stats");
  CHECK(r.stats.patients_in == es.at("patients_in"));
  CHECK(r.stats.patients_out == es.at("patients_out"));
  CHECK(r.stats.visits_in == es.at("visits_in"));
  CHECK(r.stats.visits_out == es.at("visits_out"));
  CHECK(r.stats.outside_cohort == es.at("outside_cohort"));
  CHECK(r.stats.below_min_retained == es.at("below_min_retained"));
  CHECK(r.stats.malformed == es.at("malformed"));
  REQUIRE(r.warnings.size() == 1);
  CHECK(r.warnings[0] == "patient 8 skipped: patient has no 'visits' array");

  // Valid-visit counts are recorded so a second pass is a no-op.
  CHECK(r.dataset[0].at("valid_visits") == 5);
  CHECK(r.dataset[3].at("valid_visits") == 5);
  const FilterResult again = filter_cohort(r.dataset, p);
  CHECK(again.dataset == r.dataset);
  CHECK(again.stats.patients_out == r.stats.patients_out);

  // Object layout is preserved.
  const Json wrapped{{"source", "x"}, {"patients", fixture.at("input")}};
  const FilterResult w = filter_cohort(wrapped, p);
  CHECK(w.dataset.at("source") == "x");
  CHECK(w.dataset.at("patients") == r.dataset);

  CHECK_THROWS_AS(filter_cohort(Json{{"nope", 1}}, p), MalformedRecord);
}

TEST_CASE("visits parse from the documented layout and render") {
  const Json visit = Json::parse(R"({
    "chief_complaint": "Chest pain",
    "sections": {"history_present_illness": "Two days of pain", "labs": ["trop 0.4", "bnp 900"]},
    "allergies": "none",
    "ground_truth_diagnoses": ["nstemi", {"name": "chf"}]
  })");
  const VisitRecord v = parse_visit(visit, 2);
  CHECK(v.visit_index == 3);
  CHECK(v.ground_truth_diagnoses == std::vector<std::string>{"nstemi", "chf"});
  CHECK(v.section("labs") == std::optional<std::string>("trop 0.4; bnp 900"));
  CHECK(render_visit(v) ==
        "Visit 3\nChief Complaint: Chest pain\nHistory Present Illness: Two days of pain\n"
        "Labs: trop 0.4; bnp 900\nAllergies: none");

  Observation x;
  x.payload = v;
  const Bindings b = observation_bindings(x);
  CHECK(b.at("chief_complaint") == "Chest pain");
  CHECK(b.at("lab_results") == "trop 0.4; bnp 900");
  CHECK(b.at("labs") == "trop 0.4; bnp 900");
  CHECK(b.at("vitals") == "Not documented");
  CHECK(b.at("history_present_illness") == "Two days of pain");

  CHECK_THROWS_AS(parse_visit(Json::array(), 0), MalformedRecord);
  CHECK_THROWS_AS(parse_visit(Json{{"visit_index", "x"}}, 0), MalformedRecord);
}

TEST_CASE("CSV parsing handles quotes and round-trips") {
  const auto rows = parse_csv("a,b\n\"x, y\",\"say \"\"hi\"\"\"\n\"multi\nline\",2\n");
  REQUIRE(rows.size() == 3);
  CHECK(rows[1] == std::vector<std::string>{"x, y", "say \"hi\""});
  CHECK(rows[2] == std::vector<std::string>{"multi\nline", "2"});
  CHECK(parse_csv(write_csv(rows)) == rows);
}

TEST_CASE("series reading and sliding windows") {
  const SeriesSchema schema = price_schema();
  const auto series = read_series(kPriceCsv, schema);
  REQUIRE(series.size() == 3);
  CHECK(series[0].string("headline") == std::optional<std::string>("up, strongly"));
  CHECK(series[1].number("close") == 10.5);

  const auto windows = sliding_windows(series, 2, schema);
  REQUIRE(windows.size() == 2);
  CHECK(windows[0].first.target_date == "2024-01-02");
  CHECK(std::get<PriceForecast>(windows[1].second).close == 12.25);
  CHECK(render_window(windows[1].first, schema.withheld_fields()) ==
        "Date: 2024-01-02 | open: 11 | close: 10.5 | headline: down\n"
        "Date: 2024-01-03 (target day) | open: 10.5 | close: [withheld] | headline: up");
  CHECK_THROWS_AS(sliding_windows(series, 4, schema), InsufficientHistory);

  CHECK_THROWS_AS(read_series("date,open\n2024-01-01,1\n", schema), MalformedRecord);
  CHECK_THROWS_AS(read_series("date,open,close,headline\n2024-01-01,1,x,h\n", schema),
                  MalformedRecord);
  CHECK_THROWS_AS(read_series("date,open,close,headline\n2024-01-02,1,1,h\n2024-01-01,1,1,h\n", schema),
                  DatasetError);
}

TEST_CASE("series schema validation") {
  Json j = price_schema().to_json();
  CHECK(SeriesSchema::from_json(j).to_json() == j);
  Json bad = j;
  bad["target"] = "headline";
  CHECK_THROWS(SeriesSchema::from_json(bad));
  bad = j;
  bad["window"] = 0;
  CHECK_THROWS(SeriesSchema::from_json(bad));
}

TEST_CASE("window sequences split by sequence length") {
  SeriesSchema schema = price_schema(1);
  schema.sequence_length = 2;
  RunConfig cfg;
  cfg.task = TaskKind::price_forecast;
  const auto seqs = window_sequences(read_series(kPriceCsv, schema), schema, cfg, "spx");
  REQUIRE(seqs.size() == 2);
  CHECK(seqs[0].id == "spx-001");
  CHECK(seqs[1].id == "spx-002");
  CHECK(seqs[0].steps.size() == 2);
  CHECK(seqs[1].steps.size() == 1);
  CHECK(seqs[1].steps[0].observation.step_index == 1);
  const Bindings b = observation_bindings(seqs[0].steps[1].observation);
  CHECK(b.at("target_date") == "2024-01-02");
}

TEST_CASE("patient sequences") {
  const Json data = Json::parse(R"([{"patient_id": "P1", "age": 70, "visits": [
      {"chief_complaint": "cough", "ground_truth_diagnoses": ["pneumonia"]},
      {"chief_complaint": ""},
      {"chief_complaint": "fever", "diagnoses": ["sepsis", "uti"]}]}])");
  const auto seqs = visit_sequences(data, RunConfig{});
  REQUIRE(seqs.size() == 1);
  CHECK(seqs[0].id == "P1");
  CHECK(seqs[0].metadata.at("age") == "70");
  CHECK(seqs[0].metadata.at("gender") == "unknown");
  REQUIRE(seqs[0].steps.size() == 2);
  CHECK(seqs[0].steps[1].observation.step_index == 2);
  CHECK(std::get<DiagnosisTruth>(*seqs[0].steps[1].reference.ground_truth).diagnoses ==
        std::vector<std::string>{"sepsis", "uti"});

  const Json no_dx = Json::parse(R"([{"patient_id": "P1", "visits": [{"chief_complaint": "x"}]}])");
  CHECK_THROWS_AS(visit_sequences(no_dx, RunConfig{}), MalformedRecord);
}

TEST_CASE("synthetic data is deterministic per seed") {
  for (auto kind : {SyntheticKind::clinical, SyntheticKind::planted_rule, SyntheticKind::weather,
                    SyntheticKind::finance}) {
    CAPTURE(to_string(kind));
    const SyntheticSpec spec{kind, 12, 42};
    const auto a = generate_synthetic(spec);
    const auto b = generate_synthetic(spec);
    CHECK(a.patients == b.patients);
    CHECK(a.csv == b.csv);
    const auto c = generate_synthetic({kind, 12, 43});
    CHECK((a.patients != c.patients || a.csv != c.csv));
    CHECK(parse_synthetic_kind(to_string(kind)) == kind);
  }
  // Frozen first rows guard cross-platform determinism.
  const auto w = generate_synthetic({SyntheticKind::weather, 3, 1});
  CHECK(w.csv ==
        "date,temperature,humidity,cloud_cover,precipitation,wind_speed,summary\n"
        "2024-01-01,6.48,80.40,82.16,4.22,12.44,rain\n"
        "2024-01-02,0.74,89.91,95.91,4.17,13.79,rain\n"
        "2024-01-03,10.34,82.54,78.15,6.86,12.91,rain\n");
}

TEST_CASE("synthetic clinical blocks are exactly the discovered topic groups") {
  const auto d = generate_synthetic({SyntheticKind::clinical, 25, 7});
  REQUIRE(d.patients.size() == 25);
  for (const auto& patient : d.patients) {
    const Json& visits = patient.at("visits");
    CHECK(visits.size() >= 5);
    CHECK(visits.size() <= 15);
    std::vector<TopicSet> ts;
    for (std::size_t i = 0; i < visits.size(); ++i) {
      ts.push_back(assign_topics(build_visit_text(parse_visit(visits[i], static_cast<int>(i)))));
    }
    CHECK(discover_groups(ts, FilterParams{}) == planted_blocks(patient));
  }
}

TEST_CASE("planted-rule patients never name their hidden diagnosis in the text") {
  const auto d = generate_synthetic({SyntheticKind::planted_rule, 6, 3});
  for (const auto& patient : d.patients) {
    const std::string hidden =
        patient.at("visits")[0].at("ground_truth_diagnoses")[0].get<std::string>();
    for (const auto& v : patient.at("visits")) {
      CHECK(v.at("ground_truth_diagnoses")[0] == hidden);
      CHECK(build_visit_text(parse_visit(v, 0)).find(hidden) == std::string::npos);
    }
  }
}

TEST_CASE("load_dataset reads patient JSON and CSV with its schema manifest") {
  const auto dir = testing::temp_dir("datasets_load");
  const auto clinical = generate_synthetic({SyntheticKind::clinical, 3, 1}).write(dir, "c");
  RunConfig cfg;
  const LoadedDataset lc = load_dataset(clinical, cfg);
  CHECK(lc.task == TaskKind::diagnosis);
  CHECK(lc.sequences.size() == 3);
  CHECK(lc.fingerprint == sha256_hex(testing::slurp(clinical)));

  const auto fin = generate_synthetic({SyntheticKind::finance, 30, 1}).write(dir, "f");
  CHECK(fin.extension() == ".csv");
  cfg.task = TaskKind::price_forecast;
  const LoadedDataset lf = load_dataset(fin, cfg);
  CHECK(lf.files.size() == 2);
  CHECK(lf.fingerprint == sha256_hex(testing::slurp(fin) + std::string(1, '\0') +
                                     testing::slurp(dir / "f.schema.json")));
  // 30 days, window 5, 10 windows per sequence.
  CHECK(lf.sequences.size() == 3);
  CHECK(lf.sequences[2].steps.size() == 6);

  cfg.task = TaskKind::weather_summary;
  CHECK_THROWS_AS(load_dataset(fin, cfg), DatasetError);
  CHECK_THROWS_AS(load_dataset(dir / "missing.json", cfg), DatasetError);
  testing::spit(dir / "orphan.csv", "date,x\n");
  CHECK_THROWS_AS(load_dataset(dir / "orphan.csv", cfg), DatasetError);
}
