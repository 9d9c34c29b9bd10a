#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <random>

#include "llmrnn/datasets.hpp"
#include "llmrnn/errors.hpp"

namespace llmrnn {

namespace {

// std distributions are implementation-defined, so draws are built from the
// raw engine output to stay identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }
  std::size_t between(std::size_t lo, std::size_t hi) { return lo + below(hi - lo + 1); }
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  bool chance(double p) { return unit() < p; }
  // Irwin-Hall approximation of a standard normal.
  double normal() {
    double sum = 0.0;
    for (int i = 0; i < 12; ++i) sum += unit();
    return sum - 6.0;
  }
  template <typename T, std::size_t N>
  const T& pick(const std::array<T, N>& items) {
    return items[below(N)];
  }

 private:
  std::mt19937_64 engine_;
};

std::string fmt2(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string date_after(int days) {
  using namespace std::chrono;
  const year_month_day d{sys_days{year{2024} / January / 1} + std::chrono::days{days}};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

// Each topic's visit text mentions only its own lexicon keywords. The
// history line always carries at least one, so every visit maps to exactly
// its block's topic.
struct TopicVocab {
  const char* topic;
  std::array<const char*, 3> complaints;
  std::array<const char*, 3> histories;
  std::array<const char*, 3> labs;
  std::array<const char*, 3> medications;
  std::array<const char*, 4> diagnoses;
};

const std::array<TopicVocab, 8>& vocabulary() {
  static const std::array<TopicVocab, 8> v{{
      {"cardiovascular",
       {"palpitations and chest tightness", "exertional chest pressure",
        "irregular pulse noted at home"},
       {"reports cardiac symptoms on exertion", "known coronary artery disease, worse over two weeks",
        "cardiac monitor showed runs of fast rhythm"},
       {"troponin mildly elevated", "bnp 820", "troponin 0.04"},
       {"metoprolol 25 mg", "apixaban 5 mg", "atorvastatin 40 mg"},
       {"atrial fibrillation", "congestive heart failure", "coronary artery disease",
        "hypertensive urgency"}},
      {"respiratory",
       {"productive cough and wheeze", "worsening dyspnea on stairs", "shortness of breath at rest"},
       {"copd flare with increased sputum", "pneumonia on chest film, right lower lung",
        "pulmonary function reduced since last year"},
       {"wbc 11.2", "abg ph 7.36", "wbc 9.7"},
       {"albuterol inhaler", "tiotropium", "prednisone 40 mg"},
       {"copd exacerbation", "community acquired pneumonia", "asthma exacerbation",
        "pulmonary embolism"}},
      {"diabetes",
       {"polyuria and thirst", "blurred vision and thirst", "low energy after meals"},
       {"poorly controlled diabetes, missed insulin doses", "home glucose readings above 300",
        "diabetic foot check overdue"},
       {"hba1c 9.4%", "fingerstick 286", "hba1c 8.1%"},
       {"metformin 1000 mg", "long acting insulin 20 units", "empagliflozin 10 mg"},
       {"type 2 diabetes mellitus", "diabetic ketoacidosis", "hyperosmolar hyperglycemic state",
        "hypoglycemia"}},
      {"renal",
       {"decreased urine output", "leg swelling and reduced urine output", "foamy urine"},
       {"creatinine rising over three days", "ckd stage 4 followed in clinic",
        "kidney function worse than baseline"},
       {"creatinine 3.1", "potassium 5.8", "creatinine 2.4"},
       {"furosemide 40 mg", "sodium bicarbonate", "sevelamer 800 mg"},
       {"acute kidney injury", "chronic kidney disease stage 4", "hyperkalemia",
        "nephrotic syndrome"}},
      {"neurological",
       {"sudden left arm weakness", "new severe headache", "witnessed seizure at home"},
       {"prior stroke with residual weakness", "seizure lasting two minutes",
        "brain mri ordered for new deficits"},
       {"sodium 138", "ct head without bleed", "sodium 131"},
       {"levetiracetam 500 mg", "aspirin 81 mg", "clopidogrel 75 mg"},
       {"ischemic stroke", "epilepsy", "migraine", "transient ischemic attack"}},
      {"gastrointestinal",
       {"abdominal pain and bloating", "dark stools and nausea", "yellowing of the eyes"},
       {"known cirrhosis with worsening ascites", "bowel habits changed over a month",
        "hepatic panel abnormal at last check"},
       {"bilirubin 4.2", "lipase 310", "alt 88"},
       {"lactulose 20 g", "pantoprazole 40 mg", "rifaximin 550 mg"},
       {"alcoholic cirrhosis", "upper gi bleed", "acute pancreatitis", "cholecystitis"}},
      {"oncology",
       {"unintended weight loss", "new breast lump", "night sweats and weight loss"},
       {"metastatic breast cancer on chemotherapy", "tumor markers rising since last cycle",
        "known malignancy, scans ordered"},
       {"cea 14.2", "hemoglobin 9.8", "cea 22.5"},
       {"ondansetron 8 mg", "dexamethasone 4 mg", "letrozole 2.5 mg"},
       {"metastatic breast cancer", "lung adenocarcinoma", "neutropenic fever after chemotherapy",
        "anemia of malignancy"}},
      {"infectious",
       {"fever and chills", "rigors overnight", "painful red swollen leg"},
       {"suspected sepsis from a skin source", "bacterial culture positive yesterday",
        "started antibiotic course on admission"},
       {"lactate 3.4", "wbc 18.5", "procalcitonin 2.1"},
       {"vancomycin 1 g", "piperacillin tazobactam", "ceftriaxone 2 g"},
       {"sepsis", "cellulitis", "urinary tract infection", "bacteremia"}},
  }};
  return v;
}

std::string vitals(Rng& rng) {
  return "pulse " + std::to_string(rng.between(62, 104)) + ", bp " +
         std::to_string(rng.between(108, 158)) + "/" + std::to_string(rng.between(64, 92)) +
         ", temp 37." + std::to_string(rng.below(10)) + ", spo2 " +
         std::to_string(rng.between(92, 99)) + "%";
}

Json topic_visit(const TopicVocab& v, std::size_t index, Rng& rng) {
  Json visit = Json::object();
  visit["visit_index"] = index;
  visit["chief_complaint"] = rng.pick(v.complaints);
  visit["sections"] = Json{{"history_present_illness", rng.pick(v.histories)},
                           {"vitals", vitals(rng)},
                           {"labs", Json::array({rng.pick(v.labs)})},
                           {"medications", Json::array({rng.pick(v.medications)})}};
  visit["allergies"] = "none reported";
  const std::size_t first = rng.below(v.diagnoses.size());
  const std::size_t second = (first + 1 + rng.below(v.diagnoses.size() - 1)) % v.diagnoses.size();
  visit["ground_truth_diagnoses"] = Json::array({v.diagnoses[first], v.diagnoses[second]});
  return visit;
}

Json patient_header(std::size_t p, Rng& rng) {
  char id[16];
  std::snprintf(id, sizeof id, "P%04zu", p + 1);
  Json patient = Json::object();
  patient["patient_id"] = id;
  patient["age"] = rng.between(35, 89);
  patient["gender"] = rng.chance(0.5) ? "F" : "M";
  return patient;
}

Json clinical_patient(std::size_t p, Rng& rng) {
  const auto& vocab = vocabulary();
  Json patient = patient_header(p, rng);
  const std::size_t visits = rng.between(5, 15);
  const std::size_t blocks = rng.between(2, std::min<std::size_t>(4, visits / 2));
  std::vector<std::size_t> sizes(blocks, 2);
  for (std::size_t extra = visits - 2 * blocks; extra > 0; --extra) ++sizes[rng.below(blocks)];

  Json list = Json::array();
  Json spans = Json::array();
  std::vector<std::string> conditions;
  std::size_t previous = vocab.size();
  std::size_t position = 0;
  for (std::size_t b = 0; b < blocks; ++b) {
    std::size_t topic = rng.below(vocab.size() - (previous == vocab.size() ? 0 : 1));
    if (previous != vocab.size() && topic >= previous) ++topic;
    previous = topic;
    spans.push_back(Json::array({position, position + sizes[b]}));
    if (std::find(conditions.begin(), conditions.end(), vocab[topic].topic) == conditions.end()) {
      conditions.emplace_back(vocab[topic].topic);
    }
    for (std::size_t i = 0; i < sizes[b]; ++i) {
      Json visit = topic_visit(vocab[topic], position + 1, rng);
      const TopicSet got = assign_topics(build_visit_text(parse_visit(visit, static_cast<int>(position))));
      if (got != TopicSet{vocab[topic].topic}) {
        throw InvariantViolation(std::string("synthetic visit leaks outside topic ") + vocab[topic].topic);
      }
      list.push_back(std::move(visit));
      ++position;
    }
  }
  patient["primary_conditions"] = conditions;
  patient["visits"] = std::move(list);
  patient["synthetic_blocks"] = std::move(spans);
  return patient;
}

Json planted_patient(std::size_t p, Rng& rng) {
  static constexpr std::array<const char*, 6> hidden{"relapsed aml",      "sarcoidosis",
                                                     "amyloidosis",       "hemochromatosis",
                                                     "myasthenia gravis", "whipple disease"};
  static constexpr std::array<const char*, 5> complaints{"fatigue", "joint aches", "low energy",
                                                         "poor appetite", "mild dizziness"};
  static constexpr std::array<const char*, 4> notes{
      "symptoms unchanged since the last visit", "workup so far unrevealing",
      "patient asks for an explanation", "no new exposures reported"};
  Json patient = patient_header(p, rng);
  patient["primary_conditions"] = "unexplained recurring symptoms";
  const char* truth = hidden[p % hidden.size()];
  const std::size_t visits = rng.between(6, 8);
  Json list = Json::array();
  for (std::size_t i = 0; i < visits; ++i) {
    Json visit = Json::object();
    visit["visit_index"] = i + 1;
    visit["chief_complaint"] = rng.pick(complaints);
    visit["sections"] = Json{{"history_present_illness", rng.pick(notes)}, {"vitals", vitals(rng)}};
    visit["allergies"] = "none reported";
    visit["ground_truth_diagnoses"] = Json::array({truth});
    list.push_back(std::move(visit));
  }
  patient["visits"] = std::move(list);
  return patient;
}

SyntheticDataset weather(const SyntheticSpec& spec, Rng& rng) {
  static constexpr std::array<const char*, 5> labels{"clear", "partly cloudy", "overcast", "rain",
                                                     "fog"};
  static constexpr std::array<double, 5> cloud{5, 40, 90, 85, 70};
  SyntheticDataset out;
  out.kind = spec.kind;
  out.schema.task = TaskKind::weather_summary;
  out.schema.numeric = {"temperature", "humidity", "cloud_cover", "precipitation", "wind_speed"};
  out.schema.text = {"summary"};
  out.schema.target = "summary";
  out.schema.window = 5;
  out.schema.sequence_length = 10;
  std::vector<std::vector<std::string>> rows{
      {"date", "temperature", "humidity", "cloud_cover", "precipitation", "wind_speed", "summary"}};
  std::size_t label = rng.below(labels.size());
  for (std::size_t d = 0; d < spec.size; ++d) {
    if (d > 0 && !rng.chance(0.8)) label = (label + 1 + rng.below(labels.size() - 1)) % labels.size();
    const double temperature = 12.0 + 8.0 * rng.normal() / 3.0 - (label == 3 ? 3.0 : 0.0);
    const double humidity = std::clamp((label == 4 ? 95.0 : label == 3 ? 85.0 : 60.0) + 4.0 * rng.normal(), 10.0, 100.0);
    const double cover = std::clamp(cloud[label] + 5.0 * rng.normal(), 0.0, 100.0);
    const double rain = label == 3 ? 2.0 + 6.0 * rng.unit() : 0.0;
    const double wind = std::max(0.0, 12.0 + 5.0 * rng.normal());
    rows.push_back({date_after(static_cast<int>(d)), fmt2(temperature), fmt2(humidity), fmt2(cover),
                    fmt2(rain), fmt2(wind), labels[label]});
  }
  out.csv = write_csv(rows);
  return out;
}

SyntheticDataset finance(const SyntheticSpec& spec, Rng& rng) {
  static constexpr std::array<const char*, 4> up{
      "Stocks rally as earnings beat estimates", "Index climbs on upbeat jobs data",
      "Tech shares lead broad gains", "Investors cheer softer inflation print"};
  static constexpr std::array<const char*, 4> down{
      "Shares slide on rate worries", "Index falls as bond yields jump",
      "Selloff deepens on weak guidance", "Markets retreat amid trade tensions"};
  SyntheticDataset out;
  out.kind = spec.kind;
  out.schema.task = TaskKind::price_forecast;
  out.schema.numeric = {"open", "high", "low", "close", "volume"};
  out.schema.text = {"headline"};
  out.schema.target = "close";
  out.schema.withhold = {"close", "high", "low"};
  out.schema.window = 5;
  out.schema.sequence_length = 10;
  std::vector<std::vector<std::string>> rows{
      {"date", "open", "high", "low", "close", "volume", "headline"}};
  double close = 4000.0;
  for (std::size_t d = 0; d < spec.size; ++d) {
    const double open = close;
    close = open * (1.0 + 0.0003 + 0.01 * rng.normal());
    const double high = std::max(open, close) * (1.0 + 0.004 * rng.unit());
    const double low = std::min(open, close) * (1.0 - 0.004 * rng.unit());
    const std::size_t volume = 2000000 + rng.below(1000000);
    rows.push_back({date_after(static_cast<int>(d)), fmt2(open), fmt2(high), fmt2(low), fmt2(close),
                    std::to_string(volume), close >= open ? rng.pick(up) : rng.pick(down)});
  }
  out.csv = write_csv(rows);
  return out;
}

}  // namespace

std::string_view to_string(SyntheticKind kind) {
  switch (kind) {
    case SyntheticKind::clinical: return "clinical";
    case SyntheticKind::planted_rule: return "planted_rule";
    case SyntheticKind::weather: return "weather";
    case SyntheticKind::finance: return "finance";
  }
  return "clinical";
}

SyntheticKind parse_synthetic_kind(std::string_view text) {
  for (auto k : {SyntheticKind::clinical, SyntheticKind::planted_rule, SyntheticKind::weather,
                 SyntheticKind::finance}) {
    if (to_string(k) == text) return k;
  }
  throw ConfigError("unknown synthetic kind '" + std::string(text) +
                    "' (expected clinical, planted_rule, weather or finance)");
}

SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.size == 0) throw ConfigError("synthetic size must be positive");
  Rng rng(spec.seed);
  switch (spec.kind) {
    case SyntheticKind::weather: return weather(spec, rng);
    case SyntheticKind::finance: return finance(spec, rng);
    case SyntheticKind::clinical:
    case SyntheticKind::planted_rule: break;
  }
  SyntheticDataset out;
  out.kind = spec.kind;
  out.patients = Json::array();
  for (std::size_t p = 0; p < spec.size; ++p) {
    out.patients.push_back(spec.kind == SyntheticKind::clinical ? clinical_patient(p, rng)
                                                                : planted_patient(p, rng));
  }
  return out;
}

std::filesystem::path SyntheticDataset::write(const std::filesystem::path& dir,
                                              const std::string& name) const {
  std::filesystem::create_directories(dir);
  auto put = [](const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DatasetError("cannot write " + path.string());
    f << text;
  };
  if (kind == SyntheticKind::clinical || kind == SyntheticKind::planted_rule) {
    const auto path = dir / (name + ".json");
    put(path, patients.dump(2) + "\n");
    return path;
  }
  const auto path = dir / (name + ".csv");
  put(path, csv);
  put(dir / (name + ".schema.json"), schema.to_json().dump(2) + "\n");
  return path;
}

std::vector<VisitGroup> planted_blocks(const Json& patient) {
  if (!patient.is_object() || !patient.contains("synthetic_blocks")) {
    throw MalformedRecord("patient has no 'synthetic_blocks'");
  }
  std::vector<VisitGroup> out;
  for (const auto& span : patient.at("synthetic_blocks")) {
    out.push_back({span.at(0).get<std::size_t>(), span.at(1).get<std::size_t>()});
  }
  return out;
}

}  // namespace llmrnn
