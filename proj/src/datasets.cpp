#include "llmrnn/datasets.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "llmrnn/errors.hpp"
#include "llmrnn/hashing.hpp"

namespace llmrnn {

namespace {

std::string shortest(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return ec == std::errc() ? std::string(buf, end) : std::string("nan");
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i != 0) out += sep;
    out += items[i];
  }
  return out;
}

bool has_text(std::string_view s) {
  return std::any_of(s.begin(), s.end(),
                     [](char c) { return !std::isspace(static_cast<unsigned char>(c)); });
}

// Strings, numbers and lists of them; anything else is serialized.
std::vector<std::string> text_values(const Json& v) {
  std::vector<std::string> out;
  if (v.is_null()) return out;
  if (v.is_string()) {
    out.push_back(v.get<std::string>());
  } else if (v.is_array()) {
    for (const auto& e : v) {
      auto inner = text_values(e);
      out.insert(out.end(), inner.begin(), inner.end());
    }
  } else if (v.is_object() && v.contains("text")) {
    return text_values(v.at("text"));
  } else {
    out.push_back(v.dump());
  }
  return out;
}

std::optional<std::string> optional_text(const Json& visit, const char* key) {
  if (!visit.contains(key)) return std::nullopt;
  auto values = text_values(visit.at(key));
  if (values.empty()) return std::nullopt;
  return join(values, "; ");
}

std::string humanize(std::string_view name) {
  std::string out;
  bool start = true;
  for (char c : name) {
    if (c == '_') {
      out += ' ';
      start = true;
    } else {
      out += start ? static_cast<char>(std::toupper(static_cast<unsigned char>(c))) : c;
      start = false;
    }
  }
  return out;
}

std::string diagnosis_name(const Json& d) {
  if (d.is_string()) return d.get<std::string>();
  if (d.is_object()) {
    for (const char* key : {"name", "long_title", "title"}) {
      if (d.contains(key) && d.at(key).is_string()) return d.at(key).get<std::string>();
    }
  }
  throw MalformedRecord("diagnosis entry is neither a string nor an object with a name");
}

const Json* patients_array(const Json& dataset) {
  if (dataset.is_array()) return &dataset;
  if (dataset.is_object() && dataset.contains("patients") && dataset.at("patients").is_array()) {
    return &dataset.at("patients");
  }
  return nullptr;
}

std::string patient_id(const Json& patient, std::size_t position) {
  for (const char* key : {"patient_id", "subject_id", "id"}) {
    if (!patient.contains(key)) continue;
    const Json& v = patient.at(key);
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number()) return v.dump();
  }
  return "patient-" + std::to_string(position + 1);
}

std::string metadata_field(const Json& patient, std::initializer_list<const char*> keys) {
  for (const char* key : keys) {
    if (!patient.contains(key)) continue;
    auto values = text_values(patient.at(key));
    if (!values.empty()) return join(values, "; ");
  }
  return "unknown";
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Reference make_reference(GroundTruth truth, const RunConfig& config) {
  Reference ref;
  ref.mode = config.supervision;
  ref.ground_truth = std::move(truth);
  if (config.supervision == SupervisionMode::open_ended) ref.criteria = config.criteria;
  return ref;
}

}  // namespace

// ---------------------------------------------------------------------------
// Visits and topics

std::string build_visit_text(const VisitRecord& visit) {
  std::vector<std::string> parts;
  for (const auto& section : visit.sections) {
    for (const auto& value : section.values) parts.push_back(value);
  }
  for (const auto* field : {&visit.notes, &visit.chief_complaint, &visit.allergies, &visit.service}) {
    if (*field) parts.push_back(**field);
  }
  std::vector<std::string> kept;
  for (auto& p : parts) {
    if (has_text(p)) kept.push_back(std::move(p));
  }
  if (kept.empty()) {
    throw EmptyVisit("visit " + std::to_string(visit.visit_index) + " has no text");
  }
  return to_lower(join(kept, " "));
}

TopicLexicon::TopicLexicon(std::vector<Entry> topics) : topics_(std::move(topics)) {
  for (auto& [name, keywords] : topics_) {
    for (auto& k : keywords) k = to_lower(k);
  }
}

const TopicLexicon& TopicLexicon::standard() {
  static const TopicLexicon lexicon({
      {"cardiovascular",
       {"heart", "cardiac", "cardiovascular", "hypertension", "chf", "myocardial", "coronary",
        "artery", "atrial", "ventricular", "angina", "infarction", "fibrillation",
        "blood pressure"}},
      {"respiratory",
       {"lung", "pulmonary", "respiratory", "pneumonia", "copd", "asthma", "bronchitis", "dyspnea",
        "breathing", "oxygen"}},
      {"diabetes",
       {"diabetes", "diabetic", "glucose", "insulin", "hyperglycemia", "hypoglycemia", "hba1c",
        "blood sugar"}},
      {"renal",
       {"kidney", "renal", "nephro", "dialysis", "creatinine", "ckd", "aki", "urinary", "urine"}},
      {"neurological",
       {"neuro", "brain", "stroke", "seizure", "dementia", "alzheimer", "parkinson", "headache",
        "migraine"}},
      {"gastrointestinal",
       {"gastro", "intestinal", "liver", "stomach", "bowel", "gi", "hepatic", "cirrhosis",
        "abdominal"}},
      {"oncology",
       {"cancer", "tumor", "malignancy", "metastasis", "oncology", "chemotherapy", "radiation",
        "neoplasm"}},
      {"infectious",
       {"infection", "sepsis", "bacterial", "viral", "antibiotic", "fever", "inflammatory"}},
  });
  return lexicon;
}

std::size_t TopicLexicon::order_of(std::string_view topic) const {
  for (std::size_t i = 0; i < topics_.size(); ++i) {
    if (topics_[i].first == topic) return i;
  }
  throw ConfigError("unknown topic '" + std::string(topic) + "'");
}

std::size_t topic_score(std::string_view text, const TopicLexicon::Entry& topic) {
  std::size_t score = 0;
  for (const auto& keyword : topic.second) {
    if (text.find(keyword) != std::string_view::npos) ++score;
  }
  return score;
}

TopicSet assign_topics(std::string_view text, const TopicLexicon& lexicon) {
  std::vector<std::pair<std::size_t, std::size_t>> scored;  // (score, lexicon order)
  const auto& topics = lexicon.topics();
  for (std::size_t i = 0; i < topics.size(); ++i) {
    if (const std::size_t s = topic_score(text, topics[i]); s > 0) scored.emplace_back(s, i);
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  TopicSet out;
  for (std::size_t i = 0; i < scored.size() && i < 3; ++i) out.insert(topics[scored[i].second].first);
  return out;
}

double topic_similarity(const TopicSet& a, const TopicSet& b) {
  if (a.empty() || b.empty()) return 0.0;
  std::size_t common = 0;
  for (const auto& t : a) common += b.count(t);
  const std::size_t united = a.size() + b.size() - common;
  return static_cast<double>(common) / static_cast<double>(united);
}

void FilterParams::validate() const {
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("filter: tau must be in (0, 1]");
  if (min_group < 1) throw ConfigError("filter: min_group must be at least 1");
  if (min_retained < 1) throw ConfigError("filter: min_retained must be at least 1");
  if (cohort_min > cohort_max) throw ConfigError("filter: cohort_min exceeds cohort_max");
}

std::vector<VisitGroup> discover_groups(const std::vector<TopicSet>& visits,
                                        const FilterParams& params) {
  if (visits.empty()) return {};
  std::vector<VisitGroup> all;
  VisitGroup current{0, 1};
  for (std::size_t i = 1; i < visits.size(); ++i) {
    double sum = 0.0;
    for (std::size_t j = current.begin; j < current.end; ++j) {
      sum += topic_similarity(visits[i], visits[j]);
    }
    if (sum / static_cast<double>(current.size()) >= params.tau) {
      current.end = i + 1;
    } else {
      all.push_back(current);
      current = {i, i + 1};
    }
  }
  all.push_back(current);
  std::vector<VisitGroup> kept;
  for (const auto& g : all) {
    if (g.size() >= params.min_group) kept.push_back(g);
  }
  if (kept.empty()) kept.push_back({0, visits.size()});
  return kept;
}

VisitGroup largest_group(const std::vector<VisitGroup>& groups) {
  if (groups.empty()) throw EmptyInput("largest_group: no groups");
  VisitGroup best = groups.front();
  for (const auto& g : groups) {
    if (g.size() > best.size()) best = g;
  }
  return best;
}

FilterResult filter_cohort(const Json& dataset, const FilterParams& params,
                           const TopicLexicon& lexicon) {
  params.validate();
  const Json* patients = patients_array(dataset);
  if (patients == nullptr) {
    throw MalformedRecord("dataset must be a JSON array of patients or an object with 'patients'");
  }
  FilterResult result;
  Json kept = Json::array();
  std::size_t position = 0;
  for (const auto& patient : *patients) {
    ++result.stats.patients_in;
    const std::size_t index = position++;
    try {
      if (!patient.is_object()) throw MalformedRecord("patient is not an object");
      if (!patient.contains("visits") || !patient.at("visits").is_array()) {
        throw MalformedRecord("patient has no 'visits' array");
      }
      const Json& visits = patient.at("visits");
      result.stats.visits_in += visits.size();

      // Valid visits are those with any text to match topics against.
      std::vector<std::size_t> valid;
      std::vector<TopicSet> topics;
      for (std::size_t v = 0; v < visits.size(); ++v) {
        try {
          const std::string text = build_visit_text(parse_visit(visits[v], static_cast<int>(v)));
          valid.push_back(v);
          topics.push_back(assign_topics(text, lexicon));
        } catch (const EmptyVisit&) {
        }
      }
      std::size_t valid_count = valid.size();
      if (patient.contains("valid_visits")) {
        const Json& declared = patient.at("valid_visits");
        if (!declared.is_number_integer() || declared.get<std::int64_t>() < 0) {
          throw MalformedRecord("'valid_visits' is not a non-negative integer");
        }
        valid_count = declared.get<std::size_t>();
      }
      if (valid_count < params.cohort_min || valid_count > params.cohort_max) {
        ++result.stats.outside_cohort;
        continue;
      }
      const VisitGroup group = largest_group(discover_groups(topics, params));
      if (group.size() < params.min_retained) {
        ++result.stats.below_min_retained;
        continue;
      }
      Json out = Json::object();
      for (const auto& [key, value] : patient.items()) {
        if (key != "visits") {
          out[key] = value;
          continue;
        }
        Json retained = Json::array();
        for (std::size_t g = group.begin; g < group.end; ++g) retained.push_back(visits[valid[g]]);
        out[key] = std::move(retained);
      }
      if (!out.contains("valid_visits")) out["valid_visits"] = valid_count;
      result.stats.visits_out += group.size();
      ++result.stats.patients_out;
      kept.push_back(std::move(out));
    } catch (const MalformedRecord& e) {
      ++result.stats.malformed;
      result.warnings.push_back("patient " + std::to_string(index + 1) + " skipped: " + e.what());
    }
  }
  if (dataset.is_array()) {
    result.dataset = std::move(kept);
  } else {
    result.dataset = dataset;
    result.dataset["patients"] = std::move(kept);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Parsing and rendering

VisitRecord parse_visit(const Json& visit, int position) {
  if (!visit.is_object()) throw MalformedRecord("visit is not an object");
  VisitRecord v;
  v.visit_index = position + 1;
  if (visit.contains("visit_index")) {
    if (!visit.at("visit_index").is_number_integer()) {
      throw MalformedRecord("'visit_index' is not an integer");
    }
    v.visit_index = visit.at("visit_index").get<int>();
  }
  if (visit.contains("sections")) {
    const Json& sections = visit.at("sections");
    if (!sections.is_object()) throw MalformedRecord("'sections' is not an object");
    for (const auto& [name, value] : sections.items()) {
      v.sections.push_back({name, text_values(value), value.is_array()});
    }
  }
  v.notes = optional_text(visit, "notes");
  v.chief_complaint = optional_text(visit, "chief_complaint");
  v.allergies = optional_text(visit, "allergies");
  v.service = optional_text(visit, "service");
  for (const char* key : {"ground_truth_diagnoses", "diagnoses", "discharge_diagnoses"}) {
    if (!visit.contains(key)) continue;
    const Json& list = visit.at(key);
    if (!list.is_array()) throw MalformedRecord(std::string("'") + key + "' is not an array");
    for (const auto& d : list) v.ground_truth_diagnoses.push_back(normalize_space(diagnosis_name(d)));
    break;
  }
  return v;
}

std::string render_visit(const VisitRecord& visit) {
  std::string out = "Visit " + std::to_string(visit.visit_index);
  if (visit.chief_complaint) out += "\nChief Complaint: " + *visit.chief_complaint;
  for (const auto& section : visit.sections) {
    if (section.values.empty()) continue;
    out += "\n" + humanize(section.name) + ": " + join(section.values, "; ");
  }
  if (visit.notes) out += "\nNotes: " + *visit.notes;
  if (visit.allergies) out += "\nAllergies: " + *visit.allergies;
  if (visit.service) out += "\nService: " + *visit.service;
  return out;
}

std::string render_window(const TimeWindow& window, const std::vector<std::string>& withheld) {
  std::string out;
  for (std::size_t i = 0; i < window.rows.size(); ++i) {
    const DailyRecord& row = window.rows[i];
    const bool target = i + 1 == window.rows.size();
    if (i != 0) out += '\n';
    out += "Date: " + row.date + (target ? " (target day)" : "");
    auto hidden = [&](const std::string& field) {
      return target && std::find(withheld.begin(), withheld.end(), field) != withheld.end();
    };
    for (const auto& [field, value] : row.numeric) {
      out += " | " + field + ": " + (hidden(field) ? std::string("[withheld]") : shortest(value));
    }
    for (const auto& [field, value] : row.text) {
      out += " | " + field + ": " + (hidden(field) ? std::string("[withheld]") : value);
    }
  }
  return out;
}

Bindings observation_bindings(const Observation& x) {
  Bindings b;
  if (const auto* window = std::get_if<TimeWindow>(&x.payload)) {
    b.emplace("observation", x.rendered_text);
    b.emplace("target_date", window->target_date);
    return b;
  }
  const auto& visit = std::get<VisitRecord>(x.payload);
  auto first_of = [&](std::initializer_list<std::string_view> names) -> std::string {
    for (auto name : names) {
      if (auto s = visit.section(name); s && has_text(*s)) return *s;
    }
    return "Not documented";
  };
  const std::string vitals = first_of({"vitals", "vital_signs"});
  const std::string labs = first_of({"labs", "lab_results"});
  b.emplace("chief_complaint",
            visit.chief_complaint ? *visit.chief_complaint : first_of({"chief_complaint"}));
  b.emplace("allergies", visit.allergies ? *visit.allergies : first_of({"allergies"}));
  b.emplace("vitals", vitals);
  b.emplace("vital_signs", vitals);
  b.emplace("labs", labs);
  b.emplace("lab_results", labs);
  b.emplace("medications", first_of({"medications", "medications_on_admission"}));
  b.emplace("procedures", first_of({"procedures"}));
  b.emplace("history_present_illness",
            first_of({"history_present_illness", "history_of_present_illness", "hpi"}));
  b.emplace("past_medical_history", first_of({"past_medical_history", "pmh"}));
  b.emplace("social_history", first_of({"social_history"}));
  b.emplace("family_history", first_of({"family_history"}));
  b.emplace("physical_exam", first_of({"physical_exam"}));
  b.emplace("pertinent_results", first_of({"pertinent_results"}));
  b.emplace("hospital_course", first_of({"hospital_course"}));
  return b;
}

// ---------------------------------------------------------------------------
// Sequences

std::vector<Sequence> visit_sequences(const Json& dataset, const RunConfig& config) {
  const Json* patients = patients_array(dataset);
  if (patients == nullptr) {
    throw MalformedRecord("dataset must be a JSON array of patients or an object with 'patients'");
  }
  std::vector<Sequence> out;
  for (std::size_t p = 0; p < patients->size(); ++p) {
    const Json& patient = (*patients)[p];
    if (!patient.is_object() || !patient.contains("visits") || !patient.at("visits").is_array()) {
      throw MalformedRecord("patient " + std::to_string(p + 1) + " has no 'visits' array");
    }
    Sequence seq;
    seq.id = patient_id(patient, p);
    seq.task = TaskKind::diagnosis;
    seq.metadata = {{"patient_id", seq.id},
                    {"age", metadata_field(patient, {"age", "anchor_age"})},
                    {"gender", metadata_field(patient, {"gender", "sex"})},
                    {"primary_conditions", metadata_field(patient, {"primary_conditions"})}};
    const Json& visits = patient.at("visits");
    int step = 0;
    for (std::size_t v = 0; v < visits.size(); ++v) {
      VisitRecord record = parse_visit(visits[v], static_cast<int>(v));
      try {
        build_visit_text(record);
      } catch (const EmptyVisit&) {
        continue;
      }
      if (record.ground_truth_diagnoses.empty()) {
        throw MalformedRecord("patient " + seq.id + " visit " + std::to_string(v + 1) +
                              " has no ground-truth diagnoses");
      }
      SequenceStep s;
      s.observation.sequence_id = seq.id;
      s.observation.step_index = ++step;
      s.observation.rendered_text = render_visit(record);
      GroundTruth truth = DiagnosisTruth{record.ground_truth_diagnoses};
      s.observation.payload = std::move(record);
      s.reference = make_reference(std::move(truth), config);
      seq.steps.push_back(std::move(s));
    }
    if (!seq.steps.empty()) out.push_back(std::move(seq));
  }
  return out;
}

std::vector<Sequence> window_sequences(const std::vector<DailyRecord>& series,
                                       const SeriesSchema& schema, const RunConfig& config,
                                       const std::string& series_id) {
  auto windows = sliding_windows(series, schema.window, schema);
  const std::size_t chunk =
      schema.sequence_length > 0 ? static_cast<std::size_t>(schema.sequence_length) : windows.size();
  const std::vector<std::string> withheld = schema.withheld_fields();
  std::vector<Sequence> out;
  for (std::size_t start = 0; start < windows.size(); start += chunk) {
    Sequence seq;
    seq.task = schema.task;
    if (chunk == windows.size()) {
      seq.id = series_id;
    } else {
      char suffix[16];
      std::snprintf(suffix, sizeof suffix, "-%03zu", start / chunk + 1);
      seq.id = series_id + suffix;
    }
    const std::size_t end = std::min(windows.size(), start + chunk);
    for (std::size_t i = start; i < end; ++i) {
      SequenceStep s;
      s.observation.sequence_id = seq.id;
      s.observation.step_index = static_cast<int>(i - start) + 1;
      s.observation.rendered_text = render_window(windows[i].first, withheld);
      s.observation.payload = std::move(windows[i].first);
      s.reference = make_reference(std::move(windows[i].second), config);
      seq.steps.push_back(std::move(s));
    }
    out.push_back(std::move(seq));
  }
  return out;
}

LoadedDataset load_dataset(const std::filesystem::path& path, const RunConfig& config,
                           const std::optional<std::filesystem::path>& schema_path) {
  LoadedDataset out;
  const std::string ext = to_lower(path.extension().string());
  std::string bytes = read_file(path);
  out.files.push_back(path);
  std::string hashed = bytes;

  if (ext == ".csv") {
    std::filesystem::path manifest = schema_path.value_or(
        path.parent_path() / (path.stem().string() + ".schema.json"));
    const std::string manifest_text = read_file(manifest);
    out.files.push_back(manifest);
    hashed += '\0';
    hashed += manifest_text;
    SeriesSchema schema;
    try {
      schema = SeriesSchema::from_json(Json::parse(manifest_text, nullptr, true, true));
    } catch (const Json::exception& e) {
      throw DatasetError("schema " + manifest.string() + " is not valid JSON: " + e.what());
    }
    out.task = schema.task;
    if (out.task != config.task) {
      throw DatasetError("dataset task is " + std::string(to_string(out.task)) +
                         " but the run is configured for " + std::string(to_string(config.task)));
    }
    out.sequences = window_sequences(read_series(bytes, schema), schema, config, path.stem().string());
  } else {
    Json dataset;
    try {
      dataset = Json::parse(bytes);
    } catch (const Json::exception& e) {
      throw DatasetError(path.string() + " is not valid JSON: " + e.what());
    }
    out.task = TaskKind::diagnosis;
    if (config.task != TaskKind::diagnosis) {
      throw DatasetError("patient datasets need task diagnosis, the run is configured for " +
                         std::string(to_string(config.task)));
    }
    out.sequences = visit_sequences(dataset, config);
  }
  if (out.sequences.empty()) throw DatasetError(path.string() + " yields no sequences");
  out.fingerprint = sha256_hex(hashed);
  return out;
}

}  // namespace llmrnn
