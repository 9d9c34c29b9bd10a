#include <algorithm>
#include <charconv>
#include <cmath>

#include "llmrnn/datasets.hpp"
#include "llmrnn/errors.hpp"

namespace llmrnn {

namespace {

std::vector<std::string> string_list(const Json& json, const char* key) {
  if (!json.contains(key)) return {};
  const Json& v = json.at(key);
  if (!v.is_array()) throw MalformedRecord(std::string("schema '") + key + "' is not a list");
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string()) throw MalformedRecord(std::string("schema '") + key + "' holds a non-string");
    out.push_back(e.get<std::string>());
  }
  return out;
}

std::optional<double> parse_number(std::string_view text) {
  const std::string trimmed = normalize_space(text);
  if (trimmed.empty()) return std::nullopt;
  double value = 0.0;
  const char* begin = trimmed.data();
  const char* end = begin + trimmed.size();
  if (*begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) return std::nullopt;
  return value;
}

}  // namespace

SeriesSchema SeriesSchema::from_json(const Json& json) {
  if (!json.is_object()) throw MalformedRecord("schema is not an object");
  SeriesSchema s;
  if (json.contains("task")) s.task = parse_task_kind(json.at("task").get<std::string>());
  if (s.task == TaskKind::diagnosis) throw MalformedRecord("series schema cannot use task diagnosis");
  s.date_column = json.value("date_column", s.date_column);
  s.numeric = string_list(json, "numeric");
  s.text = string_list(json, "text");
  if (!json.contains("target") || !json.at("target").is_string()) {
    throw MalformedRecord("schema needs a string 'target'");
  }
  s.target = json.at("target").get<std::string>();
  s.withhold = string_list(json, "withhold");
  s.window = json.value("window", s.window);
  s.sequence_length = json.value("sequence_length", s.sequence_length);
  if (s.window < 1) throw MalformedRecord("schema 'window' must be at least 1");
  if (s.sequence_length < 0) throw MalformedRecord("schema 'sequence_length' must be >= 0");
  const auto& pool = s.task == TaskKind::price_forecast ? s.numeric : s.text;
  if (std::find(pool.begin(), pool.end(), s.target) == pool.end()) {
    throw MalformedRecord("target '" + s.target + "' must be a " +
                          (s.task == TaskKind::price_forecast ? "numeric" : "text") + " column");
  }
  return s;
}

Json SeriesSchema::to_json() const {
  Json j = Json::object();
  j["task"] = std::string(to_string(task));
  j["date_column"] = date_column;
  j["numeric"] = numeric;
  j["text"] = text;
  j["target"] = target;
  if (!withhold.empty()) j["withhold"] = withhold;
  j["window"] = window;
  j["sequence_length"] = sequence_length;
  return j;
}

std::vector<std::string> SeriesSchema::withheld_fields() const {
  std::vector<std::string> out = withhold;
  if (std::find(out.begin(), out.end(), target) == out.end()) out.insert(out.begin(), target);
  return out;
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool row_has_content = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        quoted = true;
        row_has_content = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        row_has_content = true;
        break;
      case '\r':
        break;
      case '\n':
        if (row_has_content || !field.empty()) {
          row.push_back(std::move(field));
          rows.push_back(std::move(row));
        }
        field.clear();
        row.clear();
        row_has_content = false;
        break;
      default:
        field += c;
        row_has_content = true;
    }
  }
  if (quoted) throw MalformedRecord("csv: unterminated quoted field");
  if (row_has_content || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string write_csv(const std::vector<std::vector<std::string>>& rows) {
  std::string out;
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i != 0) out += ',';
      const std::string& f = row[i];
      if (f.find_first_of(",\"\n\r") == std::string::npos) {
        out += f;
        continue;
      }
      out += '"';
      for (char c : f) {
        if (c == '"') out += '"';
        out += c;
      }
      out += '"';
    }
    out += '\n';
  }
  return out;
}

std::vector<DailyRecord> read_series(std::string_view csv_text, const SeriesSchema& schema) {
  const auto rows = parse_csv(csv_text);
  if (rows.empty()) throw MalformedRecord("csv: no header row");
  const auto& header = rows.front();
  auto column = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw MalformedRecord("csv: missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t date_col = column(schema.date_column);
  std::vector<std::pair<std::string, std::size_t>> numeric, text;
  for (const auto& n : schema.numeric) numeric.emplace_back(n, column(n));
  for (const auto& t : schema.text) text.emplace_back(t, column(t));

  std::vector<DailyRecord> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::string where = "csv row " + std::to_string(r + 1);
    if (row.size() != header.size()) {
      throw MalformedRecord(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                            std::to_string(row.size()));
    }
    DailyRecord rec;
    rec.date = normalize_space(row[date_col]);
    if (rec.date.empty()) throw MalformedRecord(where + ": empty date");
    if (!out.empty() && rec.date <= out.back().date) {
      throw DatasetError(where + ": date " + rec.date + " does not follow " + out.back().date);
    }
    for (const auto& [name, col] : numeric) {
      auto value = parse_number(row[col]);
      if (!value) throw MalformedRecord(where + ": '" + name + "' is not a number");
      rec.numeric.emplace_back(name, *value);
    }
    for (const auto& [name, col] : text) rec.text.emplace_back(name, row[col]);
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<std::pair<TimeWindow, GroundTruth>> sliding_windows(
    const std::vector<DailyRecord>& series, int w, const SeriesSchema& schema) {
  if (w < 1) throw ConfigError("window length must be at least 1");
  const std::size_t width = static_cast<std::size_t>(w);
  if (series.size() < width) {
    throw InsufficientHistory("series has " + std::to_string(series.size()) +
                              " rows, the window needs " + std::to_string(w));
  }
  std::vector<std::pair<TimeWindow, GroundTruth>> out;
  out.reserve(series.size() - width + 1);
  for (std::size_t t = width - 1; t < series.size(); ++t) {
    TimeWindow window;
    window.rows.assign(series.begin() + static_cast<std::ptrdiff_t>(t + 1 - width),
                       series.begin() + static_cast<std::ptrdiff_t>(t + 1));
    window.window_length = w;
    window.target_date = series[t].date;
    window.target_field = schema.target;
    GroundTruth truth;
    if (schema.task == TaskKind::price_forecast) {
      auto v = series[t].number(schema.target);
      if (!v) throw MalformedRecord("row " + series[t].date + " lacks '" + schema.target + "'");
      truth = PriceForecast{*v};
    } else {
      auto v = series[t].string(schema.target);
      if (!v) throw MalformedRecord("row " + series[t].date + " lacks '" + schema.target + "'");
      truth = SummaryText{*v};
    }
    out.emplace_back(std::move(window), std::move(truth));
  }
  return out;
}

}  // namespace llmrnn
