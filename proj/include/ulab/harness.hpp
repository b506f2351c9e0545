#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "ulab/algebra.hpp"

namespace ulab {

inline constexpr int kSchemaVersion = 1;
const char* code_version();

// Config file layout (JSON object):
//   schema_version, experiment, model, seed, output_dir, criterion (optional tag)
// and every other key is a numeric/choice parameter of the experiment.
struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  std::string experiment;
  std::string model = "ProductRR";
  std::uint64_t seed = 1;
  std::string output_dir;
  int criterion = 0;  // acceptance tag, 0 = none
  nlohmann::json params = nlohmann::json::object();

  nlohmann::json to_json() const;
};

const std::vector<std::string>& experiment_names();

// ParseError on malformed JSON or a non-object document.  Field-level
// problems are left to validate_config.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Every violated precondition, as "field: message".  Empty when valid.
std::vector<std::string> validate_config(const ExperimentConfig& cfg);
// params with defaults filled in (config assumed valid).
nlohmann::json resolved_params(const ExperimentConfig& cfg);

struct Assertion {
  std::string name;
  bool pass = false;
  double value = 0;
  double bound = 0;
};

struct ExperimentOutput {
  std::string csv;  // header plus one row per grid point
  nlohmann::json aggregates = nlohmann::json::object();
  std::vector<Assertion> assertions;
  bool pass() const;
};

// Pure computation; module errors propagate.
ExperimentOutput execute(const ExperimentConfig& cfg);

enum RunStatus { kRunPass = 0, kRunError = 1, kRunInvalid = 2, kRunAssertFail = 3 };

// Writes results.csv, summary.json and manifest.json into out_dir (each by
// atomic rename).  Returns a RunStatus.
int run_experiment(const ExperimentConfig& cfg, const std::string& out_dir);

// Writes an already computed output (acceptance checks that are not config
// driven use this directly).
void write_run(const std::string& out_dir, const nlohmann::json& config_echo, const ExperimentOutput& out,
               double wall_seconds, int criterion);

struct Report {
  nlohmann::json doc;
  int exit_code = 1;
};

// Merges every summary under run_dir into run_dir/report.json.
// MissingManifest when no manifest exists, ParseError naming a bad file.
Report emit_report(const std::string& run_dir);

// Throws ParseError when the text lacks a header, has ragged rows, or holds a
// non-finite numeric cell.
void check_csv(const std::string& text, const std::string& name);

void atomic_write(const std::string& path, const std::string& content);

// Markdown description of every experiment's parameters and CSV columns.
std::string schema_markdown();

}  // namespace ulab
