// fedlwf: experiment runner for federated continual learning over embeddings.
//
//   fedlwf run        --config cfg.json [--set key=value ...] [--out dir] [--seed n]
//   fedlwf sweep      --axis depth|clients --values 3,5,10 [--seeds 1,2,3] ...
//   fedlwf baselines  ...
//   fedlwf gen-synth  --out dir ...
//
// Exit status: 0 success, 2 configuration error, 1 any other failure.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedlwf/errors.hpp"
#include "fedlwf/experiment.hpp"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct CommonOptions {
  std::string config;
  std::vector<std::string> overrides;
  std::string out;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config, "Experiment config (JSON); defaults to the desk profile")
      ->check(CLI::ExistingFile);
  cmd->add_option("--set", opts.overrides, "Override a config key, e.g. --set fed.n_clients=5")
      ->take_all()
      ->allow_extra_args(false);
  cmd->add_option("--out", opts.out, "Output directory (overrides output.dir)");
  cmd->add_option("--seed", opts.seed, "Shorthand for --set train.seed=<n>");
}

fedlwf::ExperimentConfig resolve_config(const CommonOptions& opts) {
  std::optional<std::filesystem::path> path;
  if (!opts.config.empty()) path = opts.config;
  auto cfg = fedlwf::load_experiment_config(path, opts.overrides, opts.seed);
  if (!opts.out.empty()) cfg.output.dir = opts.out;
  return cfg;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw fedlwf::IoError("cannot write " + path.string());
  out << text;
}

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(static_cast<T>(v));
    } catch (const std::logic_error&) {
      throw fedlwf::ConfigError(std::string(what) + ": '" + item + "' is not a non-negative integer");
    }
  }
  if (out.empty()) throw fedlwf::ConfigError(std::string(what) + " is empty");
  return out;
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

int cmd_run(const CommonOptions& opts) {
  const auto cfg = resolve_config(opts);
  const auto events = fedlwf::load_events(cfg);
  const auto result = fedlwf::run_experiment(cfg, events);
  print_warnings(result.sequence.warnings);
  fedlwf::write_run_outputs(cfg, result, cfg.output.dir);
  std::cout << "mode=" << fedlwf::to_string(cfg.mode) << " events=" << events.size()
            << " test_accuracy=" << fedlwf::format_double(result.test_accuracy, 6)
            << " train_accuracy=" << fedlwf::format_double(result.train_accuracy, 6);
  if (result.forgetting) std::cout << " forgetting=" << fedlwf::format_double(*result.forgetting, 6);
  std::cout << "\nwrote " << cfg.output.dir.string() << "/{metrics.csv,summary.json,resolved-config.json}\n";
  return 0;
}

int cmd_sweep(const CommonOptions& opts, const std::string& axis_text, const std::string& values_text,
              const std::string& seeds_text) {
  const auto cfg = resolve_config(opts);
  const auto axis = fedlwf::parse_sweep_axis(axis_text);
  const auto values = parse_list<std::size_t>(values_text, "--values");
  std::vector<std::uint64_t> seeds;
  if (!seeds_text.empty()) seeds = parse_list<std::uint64_t>(seeds_text, "--seeds");
  for (std::size_t v : values) {
    if (axis == fedlwf::SweepAxis::depth && v < 2) throw fedlwf::ConfigError("depth values must be >= 2");
    if (axis == fedlwf::SweepAxis::clients && v < 1) throw fedlwf::ConfigError("client counts must be >= 1");
  }
  const auto events = fedlwf::load_events(cfg);
  const auto rows = fedlwf::sweep(cfg, events, axis, values, seeds);
  const auto path = cfg.output.dir / "sweep.csv";
  const std::string csv = fedlwf::sweep_to_csv(rows);
  write_text(path, csv);
  std::cout << csv << "wrote " << path.string() << '\n';
  return 0;
}

int cmd_baselines(const CommonOptions& opts) {
  const auto cfg = resolve_config(opts);
  const auto events = fedlwf::load_events(cfg);
  const auto rows = fedlwf::baselines(cfg, events);
  const auto path = cfg.output.dir / "baselines.csv";
  const std::string csv = fedlwf::baselines_to_csv(rows);
  write_text(path, csv);
  std::cout << csv << "wrote " << path.string() << '\n';
  return 0;
}

int cmd_gen_synth(const CommonOptions& opts) {
  const auto cfg = resolve_config(opts);
  for (const auto& p : fedlwf::generate_synthetic_files(cfg, cfg.output.dir)) {
    std::cout << p.string() << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated averaging with learning-without-forgetting over sentence embeddings"};
  app.require_subcommand(1);

  CommonOptions opts;
  auto* run = app.add_subcommand("run", "Run one event sequence and write metrics");
  add_common(run, opts);

  std::string axis;
  std::string values;
  std::string seeds;
  auto* sweep = app.add_subcommand("sweep", "Sweep model depth or client count; writes sweep.csv");
  add_common(sweep, opts);
  sweep->add_option("--axis", axis, "depth or clients")->required();
  sweep->add_option("--values", values, "Comma-separated axis values, e.g. 3,5,10,15,25")->required();
  sweep->add_option("--seeds", seeds, "Comma-separated seeds to average over (default: train.seed)");

  auto* base = app.add_subcommand("baselines", "Run all four modes; writes baselines.csv");
  add_common(base, opts);

  auto* gen = app.add_subcommand("gen-synth", "Write the synthetic events as embedding CSVs");
  add_common(gen, opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return cmd_run(opts);
    if (*sweep) return cmd_sweep(opts, axis, values, seeds);
    if (*base) return cmd_baselines(opts);
    if (*gen) return cmd_gen_synth(opts);
  } catch (const fedlwf::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitRuntime;
}
