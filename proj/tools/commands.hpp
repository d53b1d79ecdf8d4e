#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "bfl/datagen.hpp"
#include "bfl/federation.hpp"
#include "config.hpp"

namespace bflsim {

/// Exit codes shared by every subcommand.
enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kConfigError = 2,
  kDivergence = 3,
  kIoError = 4,
  kBadArtifacts = 5,
};

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::vector<bfl::Strategy>> strategies;
  std::optional<std::filesystem::path> output_dir;
  std::optional<std::size_t> threads;
  bool quiet = false;
};

/// Applies command-line overrides to a parsed config and revalidates it.
void apply_overrides(ExperimentConfig& config, const RunOptions& options);

/// Materializes every day's shards and validation split.
std::vector<bfl::DayDataset> build_days(const ExperimentConfig& config);

/// Results of every configured strategy, in config order.
std::vector<bfl::ContinualResult> run_experiment(const ExperimentConfig& config,
                                                 std::ostream* log = nullptr);

/// Writes report.json, curves.csv, reliability.csv, posterior/*.bfl and
/// metadata.json into config.output_dir.
void write_artifacts(const ExperimentConfig& config,
                     const std::vector<bfl::ContinualResult>& results);

nlohmann::json make_report(const ExperimentConfig& config,
                           const std::vector<bfl::ContinualResult>& results);

/// File name of the posterior samples for one (strategy, day) cell.
std::string posterior_file_name(bfl::Strategy s, std::uint32_t day);

int cmd_run(const std::filesystem::path& config_path, const RunOptions& options,
            std::ostream& err);
int cmd_gen_data(const std::filesystem::path& config_path, const std::filesystem::path& out_dir,
                 const RunOptions& options, std::ostream& err);
/// Prints a per-day summary table of a finished run, derived from report.json.
int cmd_report(const std::filesystem::path& run_dir, std::ostream& out, std::ostream& err);

/// Percentage reduction of P-CL iterations relative to Retrain,
/// round(100 * (retrain - pcl) / retrain).
long iteration_reduction_percent(std::size_t retrain, std::size_t pcl);

}  // namespace bflsim
