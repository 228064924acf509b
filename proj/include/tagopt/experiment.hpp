#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tagopt/data.hpp"
#include "tagopt/stream.hpp"

namespace tagopt {

/// One `key = value` entry. A bracketed value `[a, b, c]` is a list, i.e. a grid dimension.
struct ConfigValue {
  std::vector<std::string> items;
  bool is_list = false;
  std::size_t line = 0;  // 0 for command-line overrides
};

/// Sectioned key/value experiment config. Keys are globally unique and each belongs to
/// one section; unknown keys are rejected. `[override NAME]` sections hold settings
/// that apply only when the method is NAME.
class ConfigDoc {
 public:
  using Entries = std::vector<std::pair<std::string, ConfigValue>>;

  static ConfigDoc parse(std::istream& in, std::string_view source = "config");
  static ConfigDoc parse_file(const std::filesystem::path& path);

  /// Applies a `key=value` or `section.key=value` override.
  void set(std::string_view assignment);
  void set(std::string_view key, ConfigValue value);

  [[nodiscard]] const ConfigValue* find(std::string_view key) const;
  [[nodiscard]] const Entries& entries() const noexcept { return entries_; }
  [[nodiscard]] const std::vector<std::pair<std::string, Entries>>& overrides() const noexcept {
    return overrides_;
  }

  /// Keys whose values are lists, in file order.
  [[nodiscard]] std::vector<std::string> list_keys() const;

  /// Copy with the overrides for `method` merged in and override sections dropped.
  [[nodiscard]] ConfigDoc for_method(std::string_view method) const;

  /// Canonical text form, sections in a fixed order.
  [[nodiscard]] std::string echo() const;

 private:
  Entries entries_;
  std::vector<std::pair<std::string, Entries>> overrides_;
};

/// One cell of the cross product over all list-valued keys.
struct GridCell {
  std::vector<std::pair<std::string, std::string>> assignment;  // list keys only
  ConfigDoc doc;                                               // scalar-only
};

/// Cross product over list-valued keys, last key varying fastest. A doc without lists
/// yields a single cell.
std::vector<GridCell> expand_grid(const ConfigDoc& doc);

enum class StreamSourceKind { kSynthetic, kCsv, kIdx };

struct StreamSource {
  StreamSourceKind kind = StreamSourceKind::kSynthetic;
  SyntheticStreamSpec synthetic;
  std::filesystem::path train_path;
  std::filesystem::path test_path;
  std::filesystem::path train_labels_path;
  std::filesystem::path test_labels_path;
  std::size_t num_tasks = 5;
  std::size_t classes_per_task = 2;
  std::size_t train_cap = 0;
  std::size_t test_cap = 0;
  std::uint64_t data_seed = 0;
};

struct ExperimentConfig {
  StreamSource stream;
  RunConfig run;
  std::vector<std::uint64_t> seeds{0};
  double validation_fraction = 0.9;
};

/// Builds a validated experiment from a scalar-only doc. Errors name the offending key.
ExperimentConfig resolve_config(const ConfigDoc& doc);

TaskStream build_stream(const StreamSource& source);

// ---------------------------------------------------------------------------
// Result files

/// `# `-prefixed copy of a config echo, placed at the top of every emitted file.
std::string comment_block(std::string_view echo);

void write_summary(std::ostream& out, const RunResult& r, std::string_view echo);

/// Writes summary.txt, accuracy_matrix.csv and, when present, alpha_trace.csv,
/// alpha_steps.csv, knowledge_base.csv and memory.csv into `dir`.
void write_run_bundle(const std::filesystem::path& dir, const RunResult& r, std::string_view echo);

struct MetricStats {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 for a single value
  std::size_t n = 0;
};

MetricStats summarize(const std::vector<double>& values);

// ---------------------------------------------------------------------------
// Commands

struct CommandOptions {
  std::filesystem::path config_path;
  std::filesystem::path out_dir = "results";
  std::vector<std::uint64_t> seeds;     // replaces the config's seeds when non-empty
  std::vector<std::string> overrides;   // key=value
  std::optional<AlphaTraceMode> alpha_trace;
};

AlphaTraceMode parse_alpha_trace_mode(std::string_view text);

/// Loads the config and applies --set, --seed and --alpha-trace.
ConfigDoc load_command_config(const CommandOptions& opts);

/// Runs every seed of a list-free config. Returns the results in seed order.
std::vector<RunResult> cmd_run(const CommandOptions& opts, std::ostream& log);

/// Grid search over all list-valued keys on the 90/10 validation split.
GridResult cmd_grid(const CommandOptions& opts, std::ostream& log);

/// Runs each method (and each combination of other list values) on the same stream
/// and seeds. Writes comparison.csv, aggregate.csv and one bundle per (variant, seed).
std::vector<RunResult> cmd_compare(const CommandOptions& opts, std::ostream& log);

/// Writes every task's splits of the configured stream as CSV files.
void cmd_export(const CommandOptions& opts, std::ostream& log);

}  // namespace tagopt
