#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "fedlwf/data_io.hpp"
#include "fedlwf/federated.hpp"
#include "fedlwf/metrics.hpp"

namespace fedlwf {

struct SyntheticEventSpec {
  std::string name;
  std::size_t n_per_class = 50;
  double center_scale = 3.0;
  double noise_sigma = 1.0;
  std::uint64_t center_seed = 0;
  std::uint64_t sample_seed = 0;
  std::uint64_t split_seed = 0;
  SplitFractions fractions{0.6, 0.2, 0.2};
};

struct FileEventSpec {
  std::string name;
  std::filesystem::path train;
  std::filesystem::path valid;
  std::filesystem::path test;
};

/// Exactly one of the two lists is non-empty.
struct DataConfig {
  std::vector<SyntheticEventSpec> synthetic;
  std::vector<FileEventSpec> files;
};

struct OutputConfig {
  std::filesystem::path dir = "out";
  std::vector<ExportFormat> formats{ExportFormat::csv};
};

struct ExperimentConfig {
  Mode mode = Mode::central_cl;
  ModelSpec model;
  FedConfig fed;  // fed.train carries the shared training settings
  DataConfig data;
  OutputConfig output;

  /// Strict parse: unknown keys, wrong types and invalid values raise
  /// ConfigError naming the dot-path of the key. Relative data paths are
  /// resolved against `base_dir`.
  [[nodiscard]] static ExperimentConfig from_json(const nlohmann::json& j,
                                                  const std::filesystem::path& base_dir = {});
  /// Full effective configuration; from_json(to_json()) round-trips.
  [[nodiscard]] nlohmann::json to_json() const;
  void validate() const;
};

/// Desk-scale profile: three synthetic events, depth 3, 20 epochs per event.
[[nodiscard]] nlohmann::json default_config_json();

/// Applies "dot.path=value" to `config`. The value is parsed as JSON when it
/// parses, otherwise taken as a string. Numeric segments index arrays. Throws
/// ConfigError if the key does not already exist.
void apply_override(nlohmann::json& config, std::string_view assignment);

/// Defaults merged with the file at `path` (if any), then overrides, then the
/// optional seed shorthand.
[[nodiscard]] ExperimentConfig load_experiment_config(const std::optional<std::filesystem::path>& path,
                                                      std::span<const std::string> overrides,
                                                      std::optional<std::uint64_t> seed = {});

[[nodiscard]] std::vector<EventSplits> load_events(const ExperimentConfig& config);

struct ExperimentResult {
  SequenceResult sequence;
  std::vector<std::string> event_names;
  double train_accuracy = 0.0;  // cumulative mean after the last event
  double test_accuracy = 0.0;
  double test_loss = 0.0;       // mean over events after the last event
  std::optional<double> forgetting;

  [[nodiscard]] nlohmann::json summary_json(const ExperimentConfig& config) const;
};

[[nodiscard]] ExperimentResult run_experiment(const ExperimentConfig& config,
                                              std::span<const EventSplits> events);

/// Writes metrics.csv / metrics.json (per output.formats), summary.json and
/// resolved-config.json into `dir`.
void write_run_outputs(const ExperimentConfig& config, const ExperimentResult& result,
                       const std::filesystem::path& dir);

enum class SweepAxis { depth, clients };

[[nodiscard]] SweepAxis parse_sweep_axis(std::string_view text);

struct SweepRow {
  std::size_t axis_value = 0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  double test_loss = 0.0;
};

/// One experiment per axis value; with several seeds each row is the mean
/// over seeds.
[[nodiscard]] std::vector<SweepRow> sweep(const ExperimentConfig& base, std::span<const EventSplits> events,
                                          SweepAxis axis, std::span<const std::size_t> values,
                                          std::span<const std::uint64_t> seeds);
[[nodiscard]] std::string sweep_to_csv(std::span<const SweepRow> rows);

struct BaselineRow {
  Mode mode = Mode::central_only;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
};

/// Runs all four modes on the same data and seed.
[[nodiscard]] std::vector<BaselineRow> baselines(const ExperimentConfig& base,
                                                 std::span<const EventSplits> events);
[[nodiscard]] std::string baselines_to_csv(std::span<const BaselineRow> rows);

/// Writes every synthetic event's splits as <dir>/<name>_{train,valid,test}.csv
/// and returns the files written.
std::vector<std::filesystem::path> generate_synthetic_files(const ExperimentConfig& config,
                                                            const std::filesystem::path& dir);

}  // namespace fedlwf
