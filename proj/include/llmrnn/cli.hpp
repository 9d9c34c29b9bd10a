#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "llmrnn/backend.hpp"
#include "llmrnn/datasets.hpp"
#include "llmrnn/domain.hpp"
#include "llmrnn/evaluation.hpp"

namespace llmrnn {

/// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitDataset = 2;
inline constexpr int kExitBackend = 3;

/// Lambda values run by --lambda-sweep when the config lists none.
inline const std::vector<std::size_t> kDefaultLambdaSweep = {512, 1024, 2048, 4096, 8192};

/// How to build one chat backend.
///
///   {"kind": "scripted", "script": "path.json"}
///   {"kind": "http", "base_url": "https://...", "model": "...",
///    "api_key_env": "OPENAI_API_KEY", "path": "/v1/chat/completions",
///    "timeout_ms": 120000, "max_retries": 3}
///   {"kind": "replay", "cassette": "path.jsonl"}
struct BackendSpec {
  std::string kind = "scripted";
  std::filesystem::path script;
  std::string base_url;
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string api_key_env = "OPENAI_API_KEY";
  std::int64_t timeout_ms = 120000;
  int max_retries = 3;
  std::filesystem::path cassette;

  /// Relative paths are resolved against `base_dir`.
  static BackendSpec from_json(const Json& json, const std::filesystem::path& base_dir);
  /// Never contains credentials.
  Json to_json() const;
};

/// Parsed run configuration file (JSON, comments allowed).
///
///   {
///     "run": { ...RunConfig fields... },
///     "backends": { "<name>": BackendSpec, ... },
///     "generator": "<name>",          // required
///     "updater": "<name>",            // optional, defaults to the generator
///     "judge": "<name>",              // optional; enables LLM evaluation
///     "workers": 0,                   // 0 = hardware concurrency
///     "lambda_sweep": [512, ...],     // optional
///     "templates": "dir",             // optional template directory
///     "schema": "file.schema.json"    // optional CSV schema
///   }
struct AppConfig {
  RunConfig run;
  std::map<std::string, BackendSpec> backends;
  std::string generator;
  std::optional<std::string> updater;
  std::optional<std::string> judge;
  std::size_t workers = 0;
  std::vector<std::size_t> lambda_sweep;
  std::optional<std::filesystem::path> templates;
  std::optional<std::filesystem::path> schema;

  /// Throws ConfigError on unreadable files, bad JSON or unknown backends.
  static AppConfig load(const std::filesystem::path& path);
  static AppConfig from_json(const Json& json, const std::filesystem::path& base_dir);
  Json to_json() const;
};

/// Reads an environment variable; injectable for tests.
using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
std::optional<std::string> process_env(const std::string& name);

/// Builds a backend. HTTP backends need their api_key_env variable set;
/// otherwise BackendConfigError explains which variable to export.
std::shared_ptr<const ChatBackend> make_backend(const std::string& name, const BackendSpec& spec,
                                                const BackendLimits& limits,
                                                const EnvLookup& env = process_env);

/// Parses "<name>" or "<kind>:<argument>" (scripted:<script>, replay:<cassette>,
/// http:<base_url>) against the config's named backends.
BackendSpec resolve_backend(const AppConfig& config, const std::string& reference);

struct RunOptions {
  std::filesystem::path config_path;
  std::filesystem::path dataset_path;
  std::filesystem::path out_dir;
  std::optional<StrategyKind> strategy;
  std::optional<std::size_t> lambda;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> backend;
  std::optional<std::string> judge_backend;
  std::optional<std::size_t> workers;
  /// "record:<path>" or "replay:<path>".
  std::optional<std::string> cassette;
  bool lambda_sweep = false;
  EnvLookup env = process_env;
};

/// Runs the configured strategy over every sequence and writes
/// out_dir/manifest.json, out_dir/traces/<sequence_id>.jsonl and the report
/// files. With lambda_sweep, one such directory per lambda under
/// out_dir/lambda_<value>/ plus out_dir/sweep.json.
int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err);

/// Filters a patient dataset and prints retention statistics.
int cmd_filter(const std::filesystem::path& input, const FilterParams& params,
               const std::filesystem::path& output, std::ostream& out, std::ostream& err);

/// Rebuilds the report files of a run directory from its manifest and traces.
int cmd_report(const std::filesystem::path& run_dir, std::ostream& out, std::ostream& err);

/// Writes a synthetic dataset and prints its path.
int cmd_synth(const SyntheticSpec& spec, const std::filesystem::path& out_dir,
              const std::string& name, std::ostream& out, std::ostream& err);

/// Reads a run directory back: traces per sequence in manifest order.
struct RunDirectory {
  Json manifest;
  RunConfig config;
  std::vector<std::vector<StepTrace>> traces;
};
RunDirectory read_run_directory(const std::filesystem::path& run_dir);

/// Writes report.json, report.txt, curves.csv and transitions.txt.
Report write_report(const std::filesystem::path& run_dir);

/// File-name-safe form of a sequence id.
std::string trace_file_name(const std::string& sequence_id);

/// Full command-line entry point (subcommands run, filter, report, synth).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace llmrnn
