#include "llmrnn/structured_output.hpp"

#include <cmath>

#include "llmrnn/errors.hpp"

namespace llmrnn {

namespace {

std::optional<Json> try_parse(std::string_view text) {
  Json value = Json::parse(text.begin(), text.end(), nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) return std::nullopt;
  return value;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

// Inner text of the first ``` fenced block, or nullopt when there is none.
std::optional<std::string> strip_fences(std::string_view text) {
  const auto open = text.find("```");
  if (open == std::string_view::npos) return std::nullopt;
  auto body_start = text.find('\n', open + 3);
  if (body_start == std::string_view::npos) {
    body_start = open + 3;
  } else {
    ++body_start;
  }
  const auto close = text.find("```", body_start);
  if (close == std::string_view::npos) return std::string(text.substr(body_start));
  return std::string(text.substr(body_start, close - body_start));
}

// Index one past the brace that closes the object opened at `start`, or npos.
std::size_t balanced_end(std::string_view text, std::size_t start) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = start; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{' || c == '[') {
      ++depth;
    } else if (c == '}' || c == ']') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

struct ScanState {
  std::string closers;  // pending closers, innermost last
  bool in_string = false;
  std::vector<std::size_t> commas;  // comma offsets outside strings
};

ScanState scan(std::string_view text) {
  ScanState st;
  bool escaped = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (st.in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        st.in_string = false;
      }
      continue;
    }
    switch (c) {
      case '"': st.in_string = true; break;
      case '{': st.closers.push_back('}'); break;
      case '[': st.closers.push_back(']'); break;
      case '}':
      case ']':
        if (!st.closers.empty()) st.closers.pop_back();
        break;
      case ',': st.commas.push_back(i); break;
      default: break;
    }
  }
  return st;
}

std::string close_open_structures(std::string_view text) {
  const ScanState st = scan(text);
  std::string out(text);
  if (st.in_string) {
    // A dangling backslash would escape the closing quote.
    if (!out.empty() && out.back() == '\\') out.pop_back();
    out.push_back('"');
  }
  out.append(st.closers.rbegin(), st.closers.rend());
  return remove_trailing_commas(out);
}

// Appends closers to truncated text; when the cut fell inside a key or
// before a value, retries from earlier element boundaries.
std::optional<Json> balance(std::string_view text, std::string& repaired_text) {
  constexpr int kMaxCutbacks = 16;
  std::string candidate = close_open_structures(text);
  if (auto v = try_parse(candidate)) {
    repaired_text = candidate;
    return v;
  }
  const ScanState st = scan(text);
  int attempts = 0;
  for (auto it = st.commas.rbegin(); it != st.commas.rend() && attempts < kMaxCutbacks;
       ++it, ++attempts) {
    candidate = close_open_structures(text.substr(0, *it));
    if (auto v = try_parse(candidate)) {
      repaired_text = candidate;
      return v;
    }
  }
  return std::nullopt;
}

void push_stage(std::vector<std::string>& stages, std::string_view stage) {
  for (const auto& s : stages) {
    if (s == stage) return;
  }
  stages.emplace_back(stage);
}

}  // namespace

std::string remove_trailing_commas(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      out.push_back(c);
      continue;
    }
    if (c == '"') in_string = true;
    if (c == ',') {
      std::size_t j = i + 1;
      while (j < text.size() && (text[j] == ' ' || text[j] == '\n' || text[j] == '\t' ||
                                 text[j] == '\r')) {
        ++j;
      }
      if (j < text.size() && (text[j] == '}' || text[j] == ']')) continue;
    }
    out.push_back(c);
  }
  return out;
}

ExtractedJson extract_json(std::string_view raw, bool truncated) {
  if (auto v = try_parse(raw)) return {std::move(*v), {}};

  std::vector<std::string> attempted;
  std::vector<std::string> applied;

  std::string text(raw);
  attempted.emplace_back(repair_stage::strip_fences);
  if (auto inner = strip_fences(text)) {
    text = std::move(*inner);
    applied.emplace_back(repair_stage::strip_fences);
    if (auto v = try_parse(text)) return {std::move(*v), applied};
  }

  attempted.emplace_back(repair_stage::strip_prose);
  attempted.emplace_back(repair_stage::trailing_commas);
  if (truncated) attempted.emplace_back(repair_stage::balance_braces);

  const std::string_view view = text;
  for (std::size_t start = view.find('{'); start != std::string_view::npos;
       start = view.find('{', start + 1)) {
    std::vector<std::string> stages = applied;
    const std::size_t end = balanced_end(view, start);
    const bool complete = end != std::string_view::npos;
    std::string segment(complete ? view.substr(start, end - start) : view.substr(start));
    if (segment.size() != trim(view).size()) push_stage(stages, repair_stage::strip_prose);
    if (auto v = try_parse(segment)) return {std::move(*v), stages};

    std::string decomma = remove_trailing_commas(segment);
    if (decomma != segment) {
      push_stage(stages, repair_stage::trailing_commas);
      if (auto v = try_parse(decomma)) return {std::move(*v), stages};
    }

    if (complete) {
      // Skip objects nested in the rejected candidate.
      start = end - 1;
      continue;
    }
    // An unterminated object runs to the end of the text. Close it when the
    // output was cut off, else look for a complete object starting later.
    if (truncated) {
      std::string repaired;
      if (auto v = balance(decomma, repaired)) {
        push_stage(stages, repair_stage::balance_braces);
        return {std::move(*v), stages};
      }
    }
  }
  throw UnparseableOutput(std::string(raw), attempted);
}

// ---------------------------------------------------------------------------

namespace {

std::optional<std::string> name_of(const Json& entry) {
  if (entry.is_string()) return entry.get<std::string>();
  if (entry.is_object()) {
    auto it = entry.find("name");
    if (it != entry.end() && it->is_string()) return it->get<std::string>();
  }
  return std::nullopt;
}

std::optional<bool> as_flag(const Json& v) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_string()) {
    const auto s = match_key(v.get<std::string>());
    if (s == "true" || s == "yes") return true;
    if (s == "false" || s == "no") return false;
  }
  return std::nullopt;
}

std::string flatten(const Json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_array()) {
    std::string out;
    for (const auto& e : v) {
      if (!out.empty()) out += "\n";
      out += "- " + flatten(e);
    }
    return out;
  }
  if (v.is_object()) {
    std::string out;
    for (const auto& [k, x] : v.items()) {
      if (!out.empty()) out += "\n";
      out += k + ": " + flatten(x);
    }
    return out;
  }
  return v.dump();
}

using KeyList = std::vector<std::string_view>;

const Json* find_member(const Json& obj, const KeyList& keys) {
  if (!obj.is_object()) return nullptr;
  for (auto key : keys) {
    auto it = obj.find(std::string(key));
    if (it != obj.end() && !it->is_null()) return &*it;
  }
  return nullptr;
}

Prediction validate_diagnosis(const Json& json, std::string raw_text) {
  if (!json.is_object()) throw SchemaViolation("$", "expected an object");
  const Json* list = find_member(json, {"top_5_diagnoses"});
  if (list == nullptr) throw SchemaViolation("top_5_diagnoses", "missing");
  if (!list->is_array()) throw SchemaViolation("top_5_diagnoses", "expected an array");
  if (list->size() != 5) {
    throw SchemaViolation("top_5_diagnoses",
                          "expected 5, got " + std::to_string(list->size()));
  }
  DiagnosisList out;
  for (std::size_t i = 0; i < list->size(); ++i) {
    auto name = name_of((*list)[i]);
    const std::string path = "top_5_diagnoses[" + std::to_string(i) + "]";
    if (!name) throw SchemaViolation(path, "expected a name");
    auto normalized = normalize_space(*name);
    if (normalized.empty()) throw SchemaViolation(path, "empty name");
    out.ranked.push_back(std::move(normalized));
  }
  const Json* primary = find_member(json, {"primary_diagnosis"});
  if (primary == nullptr) throw SchemaViolation("primary_diagnosis", "missing");
  auto primary_name = name_of(*primary);
  if (!primary_name || normalize_space(*primary_name).empty()) {
    throw SchemaViolation("primary_diagnosis", "expected a name");
  }
  const auto key = match_key(*primary_name);
  std::size_t rank = out.ranked.size();
  for (std::size_t i = 0; i < out.ranked.size(); ++i) {
    if (match_key(out.ranked[i]) == key) {
      rank = i;
      break;
    }
  }
  if (rank == out.ranked.size()) {
    throw SchemaViolation("primary_diagnosis", "not among top_5_diagnoses");
  }
  if (rank != 0) {
    auto moved = out.ranked[rank];
    out.ranked.erase(out.ranked.begin() + static_cast<std::ptrdiff_t>(rank));
    out.ranked.insert(out.ranked.begin(), std::move(moved));
  }
  return Prediction{TaskKind::diagnosis, std::move(out), std::move(raw_text)};
}

Prediction validate_summary(const Json& json, std::string raw_text) {
  const Json* value = json.is_string() ? &json : find_member(json, {"summary", "weather_summary"});
  if (value == nullptr) throw SchemaViolation("summary", "missing");
  if (!value->is_string()) throw SchemaViolation("summary", "expected a string");
  auto text = normalize_space(value->get<std::string>());
  if (text.empty()) throw SchemaViolation("summary", "empty");
  return Prediction{TaskKind::weather_summary, SummaryText{std::move(text)}, std::move(raw_text)};
}

Prediction validate_price(const Json& json, std::string raw_text) {
  const Json* value =
      json.is_number() ? &json : find_member(json, {"close_price", "close", "predicted_close"});
  if (value == nullptr) throw SchemaViolation("close_price", "missing");
  if (!value->is_number()) throw SchemaViolation("close_price", "expected a number");
  const double price = value->get<double>();
  if (!std::isfinite(price)) throw SchemaViolation("close_price", "not finite");
  return Prediction{TaskKind::price_forecast, PriceForecast{price}, std::move(raw_text)};
}

}  // namespace

Prediction validate_prediction(const Json& json, TaskKind kind, std::string raw_text) {
  switch (kind) {
    case TaskKind::diagnosis: return validate_diagnosis(json, std::move(raw_text));
    case TaskKind::weather_summary: return validate_summary(json, std::move(raw_text));
    case TaskKind::price_forecast: return validate_price(json, std::move(raw_text));
  }
  throw SchemaViolation("$", "unknown task kind");
}

JudgeVerdict parse_judge_verdict(const Json& json, TaskKind kind) {
  if (!json.is_object()) throw SchemaViolation("$", "expected an object");
  JudgeVerdict verdict;
  verdict.raw = json;

  std::string_view section_key;
  KeyList flag_keys = {"primary_correct"};
  KeyList missed_keys = {"missed_diagnoses"};
  const KeyList why_keys = {"why_missed", "why"};
  switch (kind) {
    case TaskKind::diagnosis:
      section_key = "diagnosis_evaluation";
      break;
    case TaskKind::weather_summary:
      section_key = "alignment_evaluation";
      flag_keys = {"aligned", "primary_correct"};
      missed_keys = {"contradicted_variables", "missed_diagnoses"};
      break;
    case TaskKind::price_forecast:
      section_key = "forecast_evaluation";
      flag_keys = {"reasonable", "primary_correct"};
      missed_keys = {"issues", "missed_diagnoses"};
      break;
  }
  const Json* section = find_member(json, {section_key});
  if (section == nullptr || !section->is_object()) section = &json;

  const Json* flag = find_member(*section, flag_keys);
  std::optional<bool> primary = flag ? as_flag(*flag) : std::nullopt;
  if (!primary) {
    throw SchemaViolation(std::string(section_key) + "." + std::string(flag_keys.front()),
                          "missing boolean verdict");
  }
  verdict.primary_correct = *primary;
  if (const Json* top5 = find_member(*section, {"any_top5_correct"})) {
    verdict.any_top5_correct = as_flag(*top5);
  }
  if (const Json* missed = find_member(*section, missed_keys)) {
    if (missed->is_array()) {
      for (const auto& m : *missed) {
        if (auto name = name_of(m)) verdict.missed.push_back(normalize_space(*name));
      }
    } else if (missed->is_string() && !missed->get<std::string>().empty()) {
      verdict.missed.push_back(normalize_space(missed->get<std::string>()));
    }
  }
  if (const Json* why = find_member(*section, why_keys); why && why->is_string()) {
    verdict.why = why->get<std::string>();
  }
  if (const Json* s = find_member(json, {"improvement_suggestions"}); s && s->is_string()) {
    verdict.suggestion = s->get<std::string>();
  }
  return verdict;
}

std::string text_field(const Json& json, std::initializer_list<std::string_view> keys) {
  if (json.is_string()) return json.get<std::string>();
  if (!json.is_object()) throw SchemaViolation("$", "expected an object or string");
  if (const Json* v = find_member(json, KeyList(keys))) {
    if (v->is_string() || v->is_object() || v->is_array()) return flatten(*v);
  }
  for (const auto& [k, v] : json.items()) {
    if (v.is_string()) return v.get<std::string>();
  }
  throw SchemaViolation(keys.size() ? std::string(*keys.begin()) : std::string("$"),
                        "no text field");
}

}  // namespace llmrnn
