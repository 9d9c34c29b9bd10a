#include "llmrnn/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "llmrnn/engine.hpp"
#include "llmrnn/errors.hpp"
#include "llmrnn/runner.hpp"
#include "llmrnn/templates.hpp"

#ifndef LLMRNN_VERSION
#define LLMRNN_VERSION "unknown"
#endif

namespace llmrnn {

namespace fs = std::filesystem;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

fs::path resolve(const fs::path& base, const fs::path& p) {
  return p.empty() || p.is_absolute() ? p : base / p;
}

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Maps the error hierarchy onto process exit codes.
int classify(const std::exception& e) {
  if (dynamic_cast<const BackendError*>(&e)) return kExitBackend;
  if (dynamic_cast<const DatasetError*>(&e)) return kExitDataset;
  if (dynamic_cast<const ObservationTooLarge*>(&e)) return kExitDataset;
  return kExitConfig;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

BackendSpec BackendSpec::from_json(const Json& json, const fs::path& base_dir) {
  if (!json.is_object()) throw ConfigError("backend entry must be an object");
  BackendSpec s;
  s.kind = json.value("kind", s.kind);
  if (s.kind != "scripted" && s.kind != "http" && s.kind != "replay") {
    throw ConfigError("backend kind '" + s.kind + "' is not one of scripted, http, replay");
  }
  s.script = resolve(base_dir, json.value("script", std::string()));
  s.base_url = json.value("base_url", s.base_url);
  s.path = json.value("path", s.path);
  s.model = json.value("model", s.model);
  s.api_key_env = json.value("api_key_env", s.api_key_env);
  s.timeout_ms = json.value("timeout_ms", s.timeout_ms);
  s.max_retries = json.value("max_retries", s.max_retries);
  s.cassette = resolve(base_dir, json.value("cassette", std::string()));
  if (s.kind == "scripted" && s.script.empty()) throw ConfigError("scripted backend needs 'script'");
  if (s.kind == "http" && s.base_url.empty()) throw ConfigError("http backend needs 'base_url'");
  if (s.kind == "replay" && s.cassette.empty()) throw ConfigError("replay backend needs 'cassette'");
  if (s.max_retries < 0) throw ConfigError("max_retries must be non-negative");
  return s;
}

Json BackendSpec::to_json() const {
  Json j = Json::object();
  j["kind"] = kind;
  if (kind == "scripted") j["script"] = script.generic_string();
  if (kind == "http") {
    j["base_url"] = base_url;
    j["path"] = path;
    j["model"] = model;
    j["api_key_env"] = api_key_env;
    j["timeout_ms"] = timeout_ms;
    j["max_retries"] = max_retries;
  }
  if (kind == "replay") j["cassette"] = cassette.generic_string();
  return j;
}

AppConfig AppConfig::load(const fs::path& path) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const std::runtime_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  Json json;
  try {
    json = Json::parse(text, nullptr, true, true);
  } catch (const Json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(json, path.parent_path());
}

AppConfig AppConfig::from_json(const Json& json, const fs::path& base_dir) {
  if (!json.is_object()) throw ConfigError("config must be a JSON object");
  AppConfig c;
  try {
    if (json.contains("run")) c.run = json.at("run").get<RunConfig>();
    if (json.contains("backends")) {
      for (const auto& [name, spec] : json.at("backends").items()) {
        c.backends.emplace(name, BackendSpec::from_json(spec, base_dir));
      }
    }
    c.generator = json.value("generator", std::string());
    if (json.contains("updater")) c.updater = json.at("updater").get<std::string>();
    if (json.contains("judge")) c.judge = json.at("judge").get<std::string>();
    c.workers = json.value("workers", c.workers);
    c.lambda_sweep = json.value("lambda_sweep", c.lambda_sweep);
    if (json.contains("templates")) {
      c.templates = resolve(base_dir, json.at("templates").get<std::string>());
    }
    if (json.contains("schema")) c.schema = resolve(base_dir, json.at("schema").get<std::string>());
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (c.generator.empty() && c.backends.size() == 1) c.generator = c.backends.begin()->first;
  if (c.generator.empty()) throw ConfigError("config: \"generator\" is required");
  for (const auto* role : {&c.generator, c.updater ? &*c.updater : nullptr, c.judge ? &*c.judge : nullptr}) {
    if (role != nullptr) resolve_backend(c, *role);
  }
  return c;
}

Json AppConfig::to_json() const {
  Json j = Json::object();
  j["run"] = run;
  Json b = Json::object();
  for (const auto& [name, spec] : backends) b[name] = spec.to_json();
  j["backends"] = std::move(b);
  j["generator"] = generator;
  if (updater) j["updater"] = *updater;
  if (judge) j["judge"] = *judge;
  j["workers"] = workers;
  if (!lambda_sweep.empty()) j["lambda_sweep"] = lambda_sweep;
  if (templates) j["templates"] = templates->generic_string();
  if (schema) j["schema"] = schema->generic_string();
  return j;
}

std::optional<std::string> process_env(const std::string& name) {
  if (const char* v = std::getenv(name.c_str()); v != nullptr && *v != '\0') return std::string(v);
  return std::nullopt;
}

std::shared_ptr<const ChatBackend> make_backend(const std::string& name, const BackendSpec& spec,
                                                const BackendLimits& limits, const EnvLookup& env) {
  if (spec.kind == "scripted") {
    ScriptTable table;
    try {
      table = ScriptTable::load(spec.script);
    } catch (const BackendError&) {
      throw;
    } catch (const std::exception& e) {
      throw BackendConfigError("backend '" + name + "': cannot load script " +
                               spec.script.string() + ": " + e.what());
    }
    return std::make_shared<ScriptedBackend>(name, std::move(table), limits);
  }
  if (spec.kind == "replay") return std::make_shared<ReplayBackend>(name, spec.cassette, limits);
  if (spec.kind == "http") {
    auto key = env(spec.api_key_env);
    if (!key) {
      throw BackendConfigError("backend '" + name + "' needs an API key: set the environment variable " +
                               spec.api_key_env + " (for example `export " + spec.api_key_env +
                               "=...`) or switch to a scripted backend");
    }
    HttpBackendOptions o;
    o.base_url = spec.base_url;
    o.path = spec.path;
    o.model = spec.model;
    o.api_key = *key;
    o.timeout = std::chrono::milliseconds(spec.timeout_ms);
    o.retry.max_retries = spec.max_retries;
    return std::make_shared<HttpBackend>(name, std::move(o), limits);
  }
  throw BackendConfigError("backend '" + name + "' has unknown kind '" + spec.kind + "'");
}

BackendSpec resolve_backend(const AppConfig& config, const std::string& reference) {
  if (auto it = config.backends.find(reference); it != config.backends.end()) return it->second;
  const auto colon = reference.find(':');
  if (colon == std::string::npos) {
    throw ConfigError("unknown backend '" + reference + "'; define it under \"backends\"");
  }
  const std::string kind = reference.substr(0, colon);
  const std::string arg = reference.substr(colon + 1);
  BackendSpec s;
  s.kind = kind;
  if (kind == "scripted") {
    s.script = arg;
  } else if (kind == "replay") {
    s.cassette = arg;
  } else if (kind == "http") {
    s.base_url = arg;
  } else {
    throw ConfigError("backend reference '" + reference + "' has unknown kind '" + kind + "'");
  }
  return s;
}

std::string trace_file_name(const std::string& sequence_id) {
  std::string out;
  for (char c : sequence_id) {
    const bool safe = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    out += safe ? c : '_';
  }
  if (out.empty() || out.front() == '.') out.insert(out.begin(), '_');
  return out + ".jsonl";
}

// ---------------------------------------------------------------------------
// Reports

RunDirectory read_run_directory(const fs::path& run_dir) {
  RunDirectory rd;
  const fs::path manifest = run_dir / "manifest.json";
  if (!fs::exists(manifest)) throw DatasetError("no manifest.json in " + run_dir.string());
  try {
    rd.manifest = Json::parse(read_text(manifest));
    rd.config = rd.manifest.at("config").at("run").get<RunConfig>();
  } catch (const Json::exception& e) {
    throw DatasetError("manifest " + manifest.string() + " is unreadable: " + e.what());
  }
  for (const auto& entry : rd.manifest.at("sequences")) {
    const fs::path file = run_dir / "traces" / entry.at("file").get<std::string>();
    if (!fs::exists(file)) throw DatasetError("missing trace file " + file.string());
    std::vector<StepTrace> traces;
    std::istringstream lines(read_text(file));
    std::string line;
    while (std::getline(lines, line)) {
      if (line.empty()) continue;
      try {
        traces.push_back(step_trace_from_json(Json::parse(line)));
      } catch (const Json::exception& e) {
        throw DatasetError("trace " + file.string() + " is unreadable: " + e.what());
      }
    }
    rd.traces.push_back(std::move(traces));
  }
  if (rd.traces.empty()) throw DatasetError("run directory " + run_dir.string() + " has no traces");
  return rd;
}

Report write_report(const fs::path& run_dir) {
  const RunDirectory rd = read_run_directory(run_dir);
  Report report = build_report(rd.traces, rd.config);
  write_text(run_dir / "report.json", report_json(report).dump(2) + "\n");
  write_text(run_dir / "report.txt", report_table({report}));
  write_text(run_dir / "curves.csv", curves_csv(report));
  write_text(run_dir / "transitions.txt", transitions_text(report));
  return report;
}

// ---------------------------------------------------------------------------
// run

namespace {

struct Backends {
  std::map<std::string, std::shared_ptr<const ChatBackend>> built;
  std::shared_ptr<const ChatBackend> generator;
  std::shared_ptr<const ChatBackend> updater;
  std::shared_ptr<const ChatBackend> judge;
};

Backends build_backends(AppConfig& config, const RunOptions& options, const BackendLimits& limits) {
  std::optional<std::pair<std::string, fs::path>> cassette;
  if (options.cassette) {
    const auto colon = options.cassette->find(':');
    const std::string mode = options.cassette->substr(0, colon);
    if (colon == std::string::npos || (mode != "record" && mode != "replay")) {
      throw ConfigError("--cassette expects record:<path> or replay:<path>");
    }
    cassette.emplace(mode, options.cassette->substr(colon + 1));
  }
  if (options.backend) {
    config.backends.insert_or_assign(*options.backend, resolve_backend(config, *options.backend));
    config.generator = *options.backend;
  }
  if (options.judge_backend) {
    config.backends.insert_or_assign(*options.judge_backend,
                                     resolve_backend(config, *options.judge_backend));
    config.judge = *options.judge_backend;
  }
  if (config.generator.empty()) throw ConfigError("no generator backend configured");

  Backends out;
  auto get = [&](const std::string& name) {
    if (auto it = out.built.find(name); it != out.built.end()) return it->second;
    auto spec = config.backends.find(name);
    if (spec == config.backends.end()) throw ConfigError("unknown backend '" + name + "'");
    std::shared_ptr<const ChatBackend> b;
    if (cassette && cassette->first == "replay") {
      b = std::make_shared<ReplayBackend>(name, cassette->second, limits);
    } else {
      b = make_backend(name, spec->second, limits, options.env);
      if (cassette) b = std::make_shared<RecordingBackend>(b, cassette->second);
    }
    out.built.emplace(name, b);
    return b;
  };
  out.generator = get(config.generator);
  if (config.updater) out.updater = get(*config.updater);
  if (config.judge) out.judge = get(*config.judge);
  return out;
}

Json backend_entry(const std::string& name, const AppConfig& config, const ChatBackend& b) {
  Json j = Json::object();
  j["id"] = b.id();
  j["model"] = b.model_name();
  if (auto it = config.backends.find(name); it != config.backends.end()) {
    j["kind"] = it->second.kind;
  }
  return j;
}

// Runs sequences on a bounded pool. Results land in dataset order; the first
// failure (by sequence position) is rethrown after all workers stop.
std::vector<std::vector<StepTrace>> run_pool(const std::vector<Sequence>& sequences,
                                             const EngineContext& engine, std::size_t workers) {
  std::vector<std::vector<StepTrace>> results(sequences.size());
  std::vector<std::exception_ptr> errors(sequences.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  auto work = [&] {
    for (std::size_t i = next++; i < sequences.size() && !failed; i = next++) {
      try {
        results[i] = run_sequence(sequences[i], engine);
      } catch (...) {
        errors[i] = std::current_exception();
        failed = true;
      }
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(workers, sequences.size()));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < n; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

struct RunOutcome {
  int code = kExitOk;
  std::optional<Report> report;
};

RunOutcome run_once(AppConfig config, const RunOptions& options, const fs::path& out_dir,
                    std::ostream& out, std::ostream& err) {
  std::optional<TemplateRegistry> custom_templates;
  try {
    config.run.validate();
    if (config.templates) custom_templates = TemplateRegistry::from_directory(*config.templates);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return {kExitConfig, std::nullopt};
  }

  LoadedDataset dataset;
  try {
    dataset = load_dataset(options.dataset_path, config.run, config.schema);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return {kExitConfig, std::nullopt};
  } catch (const std::exception& e) {
    err << "dataset error: " << e.what() << "\n";
    return {kExitDataset, std::nullopt};
  }

  EngineContext engine;
  Backends backends;
  try {
    engine.counter = make_token_counter(config.run.token_counter);
    BackendLimits limits{engine.counter, 0};
    backends = build_backends(config, options, limits);
    engine.generator = backends.generator;
    engine.updater = backends.updater;
    engine.feedback_judge = backends.judge;
    engine.evaluation_judge = backends.judge;
    if (config.updater) config.run.updater_model = backends.updater->model_name();
    if (config.judge) config.run.judge_model = backends.judge->model_name();
    engine.config = config.run;
    if (custom_templates) engine.templates = &*custom_templates;
    engine.validate();
  } catch (const std::exception& e) {
    err << (dynamic_cast<const BackendError*>(&e) ? "backend error: " : "error: ") << e.what()
        << "\n";
    return {classify(e), std::nullopt};
  }

  // The manifest is complete before the first model call.
  Json manifest = Json::object();
  manifest["format_version"] = 1;
  manifest["code_version"] = LLMRNN_VERSION;
  manifest["started_at"] = utc_now();
  manifest["config"] = config.to_json();
  Json files = Json::array();
  for (const auto& f : dataset.files) files.push_back(f.generic_string());
  manifest["dataset"] = {{"path", options.dataset_path.generic_string()},
                         {"fingerprint", dataset.fingerprint},
                         {"task", std::string(to_string(dataset.task))},
                         {"files", files}};
  Json roles = Json::object();
  roles["generator"] = backend_entry(config.generator, config, *backends.generator);
  if (backends.updater) roles["updater"] = backend_entry(*config.updater, config, *backends.updater);
  if (backends.judge) roles["judge"] = backend_entry(*config.judge, config, *backends.judge);
  manifest["backends"] = std::move(roles);
  if (options.cassette) manifest["cassette"] = *options.cassette;
  Json sequences = Json::array();
  std::set<std::string> used;
  for (const auto& s : dataset.sequences) {
    std::string file = trace_file_name(s.id);
    for (int k = 2; used.count(file) != 0; ++k) {
      file = trace_file_name(s.id + "-" + std::to_string(k));
    }
    used.insert(file);
    sequences.push_back({{"id", s.id}, {"file", file}, {"steps", s.steps.size()}});
  }
  manifest["sequences"] = sequences;
  try {
    fs::create_directories(out_dir / "traces");
    write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return {kExitConfig, std::nullopt};
  }

  const std::size_t workers =
      options.workers.value_or(config.workers != 0 ? config.workers
                                                   : std::max(1u, std::thread::hardware_concurrency()));
  std::vector<std::vector<StepTrace>> traces;
  try {
    traces = run_pool(dataset.sequences, engine, workers);
  } catch (const std::exception& e) {
    const int code = classify(e);
    err << (code == kExitBackend ? "backend failure: " : "error: ") << e.what() << "\n";
    write_text(out_dir / "completion.json",
               Json{{"finished_at", utc_now()}, {"status", "failed"}, {"error", e.what()}}.dump(2) +
                   "\n");
    return {code, std::nullopt};
  }

  for (std::size_t i = 0; i < traces.size(); ++i) {
    std::string body;
    for (const auto& t : traces[i]) body += to_jsonl_line(t);
    write_text(out_dir / "traces" / sequences[i].at("file").get<std::string>(), body);
  }
  Report report = write_report(out_dir);
  write_text(out_dir / "completion.json",
             Json{{"finished_at", utc_now()}, {"status", "ok"}}.dump(2) + "\n");
  out << report_table({report});
  return {kExitOk, std::move(report)};
}

}  // namespace

int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err) {
  AppConfig config;
  try {
    config = AppConfig::load(options.config_path);
    if (options.strategy) config.run.strategy = *options.strategy;
    if (options.lambda) config.run.budget_lambda = *options.lambda;
    if (options.seed) config.run.seed = *options.seed;
  } catch (const std::exception& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  if (!options.lambda_sweep) return run_once(config, options, options.out_dir, out, err).code;

  const std::vector<std::size_t> lambdas =
      config.lambda_sweep.empty() ? kDefaultLambdaSweep : config.lambda_sweep;
  Json sweep = Json::array();
  std::vector<Report> reports;
  for (std::size_t lambda : lambdas) {
    AppConfig c = config;
    c.run.budget_lambda = lambda;
    const std::string dir = "lambda_" + std::to_string(lambda);
    out << "== lambda " << lambda << "\n";
    RunOutcome r = run_once(c, options, options.out_dir / dir, out, err);
    if (r.code != kExitOk) return r.code;
    sweep.push_back({{"lambda", lambda},
                     {"dir", dir},
                     {"max_memory_tokens", r.report->max_memory_tokens},
                     {"max_context_tokens", r.report->max_context_tokens}});
    reports.push_back(std::move(*r.report));
  }
  write_text(options.out_dir / "sweep.json", sweep.dump(2) + "\n");
  write_text(options.out_dir / "sweep.txt", report_table(reports));
  return kExitOk;
}

// ---------------------------------------------------------------------------
// filter, report, synth

int cmd_filter(const fs::path& input, const FilterParams& params, const fs::path& output,
               std::ostream& out, std::ostream& err) {
  try {
    params.validate();
  } catch (const std::exception& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  FilterResult result;
  try {
    result = filter_cohort(Json::parse(read_text(input)), params);
  } catch (const std::exception& e) {
    err << "dataset error: " << input.string() << ": " << e.what() << "\n";
    return kExitDataset;
  }
  for (const auto& w : result.warnings) err << "warning: " << w << "\n";
  try {
    write_text(output, result.dataset.dump(2) + "\n");
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  const FilterStats& s = result.stats;
  out << "patients in: " << s.patients_in << "\n"
      << "patients out: " << s.patients_out << "\n"
      << "visits in: " << s.visits_in << "\n"
      << "visits out: " << s.visits_out << "\n"
      << "outside cohort: " << s.outside_cohort << "\n"
      << "below min retained: " << s.below_min_retained << "\n"
      << "malformed: " << s.malformed << "\n";
  return kExitOk;
}

int cmd_report(const fs::path& run_dir, std::ostream& out, std::ostream& err) {
  try {
    const Report report = write_report(run_dir);
    out << report_table({report}) << "\n" << transitions_text(report);
    return kExitOk;
  } catch (const std::exception& e) {
    err << "report error: " << e.what() << "\n";
    return kExitDataset;
  }
}

int cmd_synth(const SyntheticSpec& spec, const fs::path& out_dir, const std::string& name,
              std::ostream& out, std::ostream& err) {
  try {
    out << generate_synthetic(spec).write(out_dir, name).generic_string() << "\n";
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return classify(e);
  }
}

// ---------------------------------------------------------------------------
// Command line

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Recurrent-memory prediction runner"};
  app.require_subcommand(1);

  RunOptions run;
  std::string strategy;
  auto* run_cmd = app.add_subcommand("run", "Run a strategy over a dataset");
  run_cmd->add_option("--config", run.config_path, "Run configuration (JSON)")->required();
  run_cmd->add_option("--dataset", run.dataset_path, "Patient JSON or series CSV")->required();
  run_cmd->add_option("--out", run.out_dir, "Output directory")->required();
  run_cmd->add_option("--strategy", strategy, "zero_shot | fhc | memprompt | llm_as_rnn");
  run_cmd->add_option("--lambda", run.lambda, "Memory token budget");
  run_cmd->add_flag("--lambda-sweep", run.lambda_sweep, "One run per lambda value");
  run_cmd->add_option("--seed", run.seed, "Run seed");
  run_cmd->add_option("--backend", run.backend, "Generator backend name or kind:argument");
  run_cmd->add_option("--judge-backend", run.judge_backend, "Judge backend name or kind:argument");
  run_cmd->add_option("--workers", run.workers, "Concurrent sequences")->check(CLI::PositiveNumber);
  run_cmd->add_option("--cassette", run.cassette, "record:<path> or replay:<path>");

  std::string filter_in, filter_out;
  FilterParams params;
  auto* filter_cmd = app.add_subcommand("filter", "Cohort-filter a patient dataset");
  filter_cmd->add_option("--input", filter_in, "Patient JSON")->required();
  filter_cmd->add_option("--output", filter_out, "Filtered JSON")->required();
  filter_cmd->add_flag("--defaults", "Use the default parameters (tau 0.6, m 2, r 3)");
  filter_cmd->add_option("--tau", params.tau, "Similarity threshold");
  filter_cmd->add_option("--min-group", params.min_group, "Minimum group size m");
  filter_cmd->add_option("--min-retained", params.min_retained, "Minimum retained visits r");
  filter_cmd->add_option("--cohort-min", params.cohort_min, "Fewest valid visits");
  filter_cmd->add_option("--cohort-max", params.cohort_max, "Most valid visits");

  std::string report_dir;
  auto* report_cmd = app.add_subcommand("report", "Rebuild the report of a run directory");
  report_cmd->add_option("dir", report_dir, "Run directory")->required();

  SyntheticSpec synth;
  std::string synth_kind = "clinical", synth_out, synth_name = "synthetic";
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic dataset");
  synth_cmd->add_option("--kind", synth_kind, "clinical | planted_rule | weather | finance");
  synth_cmd->add_option("--size", synth.size, "Patients or days");
  synth_cmd->add_option("--seed", synth.seed, "Generator seed");
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--name", synth_name, "File stem");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run_cmd) {
      if (!strategy.empty()) run.strategy = parse_strategy(strategy);
      return cmd_run(run, out, err);
    }
    if (*filter_cmd) return cmd_filter(filter_in, params, filter_out, out, err);
    if (*report_cmd) return cmd_report(report_dir, out, err);
    synth.kind = parse_synthetic_kind(synth_kind);
    return cmd_synth(synth, synth_out, synth_name, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return classify(e);
  }
}

}  // namespace llmrnn
