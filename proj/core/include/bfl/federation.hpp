#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bfl/datagen.hpp"
#include "bfl/likelihood.hpp"
#include "bfl/metrics.hpp"
#include "bfl/prior.hpp"
#include "bfl/rng.hpp"
#include "bfl/sgld.hpp"

namespace bfl {

enum class Strategy { transfer_learning, retrain, posterior_continual };
enum class AggregationWeights { uniform, data_proportional };
/// How a day's starting point is drawn from that day's prior.
enum class InitMode { prior_sample, prior_mean };

Strategy parse_strategy(const std::string& name);
std::string to_string(Strategy s);
AggregationWeights parse_aggregation_weights(const std::string& name);
std::string to_string(AggregationWeights w);
InitMode parse_init_mode(const std::string& name);
std::string to_string(InitMode m);

struct FederationConfig {
  std::size_t num_nodes = 10;
  std::size_t per_node_samples = 50;
  SgldConfig sgld;
  std::size_t num_days = 3;
  Strategy strategy = Strategy::posterior_continual;
  AggregationWeights aggregation_weights = AggregationWeights::uniform;
  InitMode init_mode = InitMode::prior_sample;
  std::uint64_t seed = 0;
  /// Worker threads for node updates inside a round; results do not depend on it.
  std::size_t threads = 1;

  void validate() const;
};

/// Seeds of the per-day streams. Depend only on (seed, day, node).
std::uint64_t node_stream_seed(std::uint64_t seed, std::uint32_t day, std::size_t node);
std::uint64_t init_stream_seed(std::uint64_t seed, std::uint32_t day);

struct RoundRecord {
  std::uint32_t day = 1;
  std::size_t iteration = 0;  // 1..T
  ParamVector global_params;  // after aggregation
  double train_loss = 0.0;    // mean per-sample NLL over all training shards
  double val_accuracy = 0.0;  // single current global vector
};

/// Weighted mean sum_n (w_n / sum w) * params_n.
ParamVector aggregate(std::span<const ParamVector> node_params, std::span<const double> weights);

std::vector<double> node_weights(AggregationWeights mode, std::span<const LabeledBatch> shards);

/// One synchronous round: every node takes one SGLD step from `global` on its
/// own shard with its own stream, then the parameter server averages.
/// Node n only touches streams[n], so the result is independent of scheduling.
ParamVector federated_round(const Likelihood& model, std::span<const double> global,
                            std::span<const LabeledBatch> shards, const GaussianDiagPrior& prior,
                            const SgldConfig& config, std::span<RngStream> streams,
                            std::span<const double> weights, std::size_t iteration,
                            std::size_t threads = 1);

struct DayRun {
  PosteriorSamples posterior;
  std::vector<RoundRecord> records;
};

/// T federated rounds from an init drawn from `prior`; aggregated global
/// vectors of rounds T_b+1..T become the day's posterior samples.
DayRun run_day(const ModelSpec& spec, const DayDataset& data, const GaussianDiagPrior& prior,
               const FederationConfig& config);

struct DayOutcome {
  std::uint32_t day = 1;
  /// False for transfer-learning days after the first.
  bool trained = true;
  double accuracy = 0.0;  // posterior-predictive accuracy on validation
  double ece = 0.0;
  CalibrationBins bins;
  std::optional<std::size_t> iterations_to_threshold;
  std::vector<RoundRecord> records;
  PosteriorSamples posterior;  // samples used for this day's predictive
};

struct ContinualResult {
  Strategy strategy = Strategy::retrain;
  std::vector<DayOutcome> days;
};

/// Runs config.strategy over every day. `initial_prior`, when given, replaces
/// the standard prior on the first day of the posterior-continual strategy.
ContinualResult run_continual(const ModelSpec& spec, std::span<const DayDataset> days,
                              const FederationConfig& config, const MetricsConfig& metrics,
                              const GaussianDiagPrior* initial_prior = nullptr);

}  // namespace bfl
