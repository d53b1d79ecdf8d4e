#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bfl/datagen.hpp"
#include "bfl/federation.hpp"
#include "bfl/metrics.hpp"
#include "bfl/model.hpp"

namespace bflsim {

/// Where each day's data comes from.
struct DataSource {
  /// Synthetic generator; used when `tabular_days` is empty.
  bfl::ShiftSpec shift;
  /// One tabular file per day (resolved against the config file's directory).
  std::vector<std::filesystem::path> tabular_days;
  std::size_t tabular_classes = 0;
  double tabular_validation_fraction = 0.2;

  bool is_tabular() const noexcept { return !tabular_days.empty(); }
  std::size_t num_classes() const noexcept {
    return is_tabular() ? tabular_classes : shift.num_classes;
  }
  double validation_fraction() const noexcept {
    return is_tabular() ? tabular_validation_fraction : shift.validation_fraction;
  }
};

struct ExperimentConfig {
  bfl::ModelSpec model;
  bfl::FederationConfig federation;  // strategy field is ignored; see strategies
  std::vector<bfl::Strategy> strategies;
  DataSource data;
  bfl::MetricsConfig metrics;
  std::filesystem::path output_dir = "bflsim_run";
  std::optional<std::filesystem::path> initial_posterior;
  std::uint64_t seed = 0;

  /// Cross-field checks; throws bfl::ConfigError naming the field.
  void validate() const;
};

ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical JSON form, echoed into run reports.
nlohmann::json to_json(const ExperimentConfig& config);

}  // namespace bflsim
