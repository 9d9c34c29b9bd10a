#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "llmrnn/domain.hpp"

namespace llmrnn {

// ---------------------------------------------------------------------------
// Visits and topics

/// Lowercased concatenation of every section value (lists flattened), the
/// notes, chief complaint, allergies and service, in that order, joined by
/// single spaces. Throws EmptyVisit when no source has text.
std::string build_visit_text(const VisitRecord& visit);

/// Topic name -> keywords, in a fixed order that also breaks score ties.
class TopicLexicon {
 public:
  using Entry = std::pair<std::string, std::vector<std::string>>;

  explicit TopicLexicon(std::vector<Entry> topics);

  /// The eight coarse clinical topics (cardiovascular, respiratory,
  /// diabetes, renal, neurological, gastrointestinal, oncology, infectious).
  static const TopicLexicon& standard();

  const std::vector<Entry>& topics() const noexcept { return topics_; }
  /// Position of `topic` in the lexicon order; throws ConfigError if absent.
  std::size_t order_of(std::string_view topic) const;

 private:
  std::vector<Entry> topics_;
};

using TopicSet = std::set<std::string>;

/// Number of the topic's keywords occurring as substrings of `text`.
std::size_t topic_score(std::string_view text, const TopicLexicon::Entry& topic);

/// Up to three topics with the highest non-zero score; ties go to the topic
/// listed first. `text` must already be lowercase.
TopicSet assign_topics(std::string_view text, const TopicLexicon& lexicon = TopicLexicon::standard());

/// Jaccard similarity; 0 when either set is empty.
double topic_similarity(const TopicSet& a, const TopicSet& b);

struct FilterParams {
  double tau = 0.6;
  std::size_t min_group = 2;
  std::size_t min_retained = 3;
  std::size_t cohort_min = 5;
  std::size_t cohort_max = 20;

  void validate() const;
};

/// Half-open [begin, end) range of visit positions.
struct VisitGroup {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - begin; }
  friend bool operator==(const VisitGroup&, const VisitGroup&) = default;
};

/// Single left-to-right pass: a visit joins the current group when its mean
/// similarity to the group's members is at least tau, otherwise it starts a
/// new group. Groups shorter than min_group are discarded; if none remain
/// the whole sequence is returned as one group. Empty input yields no groups.
std::vector<VisitGroup> discover_groups(const std::vector<TopicSet>& visits,
                                        const FilterParams& params);

/// The largest group, earliest on ties.
VisitGroup largest_group(const std::vector<VisitGroup>& groups);

struct FilterStats {
  std::size_t patients_in = 0;
  std::size_t patients_out = 0;
  std::size_t visits_in = 0;
  std::size_t visits_out = 0;
  std::size_t outside_cohort = 0;
  std::size_t below_min_retained = 0;
  std::size_t malformed = 0;
};

struct FilterResult {
  /// Same layout as the input (array, or object with "patients").
  Json dataset;
  FilterStats stats;
  /// One message per skipped malformed patient.
  std::vector<std::string> warnings;
};

/// Cohort filtering over a patient dataset: a JSON array of patients (or an
/// object holding one under "patients"), each with a "visits" array.
///
/// Patients are restricted to cohort_min <= valid_visits <= cohort_max. The
/// patient's own "valid_visits" field is used when present; otherwise the
/// count of visits with text is used and written back so that filtering the
/// output again is a no-op. Topic groups are discovered over the valid
/// visits, the largest is kept, and patients retaining fewer than
/// min_retained visits are dropped. Retained visit objects and all other
/// patient fields are copied unchanged.
FilterResult filter_cohort(const Json& dataset, const FilterParams& params,
                           const TopicLexicon& lexicon = TopicLexicon::standard());

// ---------------------------------------------------------------------------
// Parsing and rendering

/// Visit object -> VisitRecord. "sections" maps names to strings or string
/// lists; "notes" is a string or an object with "text". Diagnoses come from
/// "ground_truth_diagnoses" (or "diagnoses"), primary first.
VisitRecord parse_visit(const Json& visit, int position);

/// Text form of a visit as shown to the model.
std::string render_visit(const VisitRecord& visit);
/// Text form of a window; the target field of the last row is withheld.
std::string render_window(const TimeWindow& window, const std::vector<std::string>& withheld);

/// Template bindings for an observation: the clinical prompt fields for
/// visits (missing ones read "Not documented"), or `observation` and
/// `target_date` for windows.
Bindings observation_bindings(const Observation& x);

// ---------------------------------------------------------------------------
// Time series

/// Declares how a CSV maps onto DailyRecords.
struct SeriesSchema {
  TaskKind task = TaskKind::price_forecast;
  std::string date_column = "date";
  std::vector<std::string> numeric;
  std::vector<std::string> text;
  std::string target;
  /// Fields hidden on the target day; defaults to the target alone.
  std::vector<std::string> withhold;
  int window = 5;
  /// Windows per sequence; 0 keeps the whole series as one sequence.
  int sequence_length = 0;

  static SeriesSchema from_json(const Json& json);
  Json to_json() const;
  std::vector<std::string> withheld_fields() const;
};

/// RFC 4180 subset: comma separated, double-quoted fields, "" escapes,
/// embedded newlines inside quotes. The first row is the header.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);
std::string write_csv(const std::vector<std::vector<std::string>>& rows);

/// Rows in file order. Throws MalformedRecord on missing columns or
/// non-numeric values, DatasetError on unordered dates.
std::vector<DailyRecord> read_series(std::string_view csv_text, const SeriesSchema& schema);

/// Window t covers rows t-w+1..t; its reference is row t's target. Yields
/// n-w+1 windows in order. Throws InsufficientHistory when n < w.
std::vector<std::pair<TimeWindow, GroundTruth>> sliding_windows(
    const std::vector<DailyRecord>& series, int w, const SeriesSchema& schema);

// ---------------------------------------------------------------------------
// Sequences

/// Patient JSON -> one sequence per patient.
std::vector<Sequence> visit_sequences(const Json& dataset, const RunConfig& config);
/// Series -> sequences of windows (split by schema.sequence_length).
std::vector<Sequence> window_sequences(const std::vector<DailyRecord>& series,
                                       const SeriesSchema& schema, const RunConfig& config,
                                       const std::string& series_id);

struct LoadedDataset {
  TaskKind task = TaskKind::diagnosis;
  std::vector<Sequence> sequences;
  /// SHA-256 over the bytes of every file read.
  std::string fingerprint;
  std::vector<std::filesystem::path> files;
};

/// Loads a patient JSON file, or a CSV with its schema manifest (the
/// `schema` path, else `<stem>.schema.json` beside the CSV). Throws
/// DatasetError subclasses.
LoadedDataset load_dataset(const std::filesystem::path& path, const RunConfig& config,
                           const std::optional<std::filesystem::path>& schema = std::nullopt);

// ---------------------------------------------------------------------------
// Synthetic data

enum class SyntheticKind { clinical, planted_rule, weather, finance };
std::string_view to_string(SyntheticKind kind);
SyntheticKind parse_synthetic_kind(std::string_view text);

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::clinical;
  /// Patients for visit data, days for series.
  std::size_t size = 10;
  std::uint64_t seed = 0;
};

struct SyntheticDataset {
  SyntheticKind kind = SyntheticKind::clinical;
  /// Patient array for clinical kinds.
  Json patients;
  /// CSV and schema for series kinds.
  std::string csv;
  SeriesSchema schema;

  /// Writes <dir>/<name>.json or <dir>/<name>.csv + <name>.schema.json and
  /// returns the dataset path.
  std::filesystem::path write(const std::filesystem::path& dir, const std::string& name) const;
};

/// Deterministic for a given spec on every platform.
///
/// clinical: patients of 5-15 visits built from 2-4 consecutive single-topic
/// blocks, so that topic groups are exactly the blocks. planted_rule: each
/// patient carries one fixed primary diagnosis that the visit text never
/// names; it can only be learned from feedback. weather: daily rows whose
/// summary label persists from the previous day with probability 0.8.
/// finance: a drifting price series whose daily headline sentiment matches
/// the sign of that day's move.
SyntheticDataset generate_synthetic(const SyntheticSpec& spec);

/// Topic blocks of a generated clinical patient, as visit-position ranges.
std::vector<VisitGroup> planted_blocks(const Json& patient);

}  // namespace llmrnn
