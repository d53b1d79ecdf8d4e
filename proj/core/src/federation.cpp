#include "bfl/federation.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <string>
#include <thread>

#include "bfl/errors.hpp"

namespace bfl {

Strategy parse_strategy(const std::string& name) {
  if (name == "transfer_learning" || name == "tl") return Strategy::transfer_learning;
  if (name == "retrain") return Strategy::retrain;
  if (name == "posterior_continual" || name == "pcl") return Strategy::posterior_continual;
  throw ConfigError("unknown strategy '" + name +
                    "' (expected transfer_learning, retrain or posterior_continual)");
}

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::transfer_learning: return "transfer_learning";
    case Strategy::retrain: return "retrain";
    case Strategy::posterior_continual: return "posterior_continual";
  }
  return "unknown";
}

AggregationWeights parse_aggregation_weights(const std::string& name) {
  if (name == "uniform") return AggregationWeights::uniform;
  if (name == "data_proportional") return AggregationWeights::data_proportional;
  throw ConfigError("unknown aggregation weights '" + name +
                    "' (expected uniform or data_proportional)");
}

std::string to_string(AggregationWeights w) {
  return w == AggregationWeights::uniform ? "uniform" : "data_proportional";
}

InitMode parse_init_mode(const std::string& name) {
  if (name == "prior_sample") return InitMode::prior_sample;
  if (name == "prior_mean") return InitMode::prior_mean;
  throw ConfigError("unknown init mode '" + name + "' (expected prior_sample or prior_mean)");
}

std::string to_string(InitMode m) {
  return m == InitMode::prior_sample ? "prior_sample" : "prior_mean";
}

void FederationConfig::validate() const {
  if (num_nodes == 0) throw ConfigError("federation.num_nodes must be at least 1");
  if (num_days == 0) throw ConfigError("federation.num_days must be at least 1");
  if (per_node_samples == 0) throw ConfigError("federation.per_node_samples must be positive");
  if (per_node_samples < sgld.effective_batch_size(per_node_samples)) {
    throw ConfigError("federation.per_node_samples must be at least sgld.batch_size");
  }
  if (threads == 0) throw ConfigError("federation.threads must be at least 1");
  sgld.validate();
}

std::uint64_t node_stream_seed(std::uint64_t seed, std::uint32_t day, std::size_t node) {
  return derive_seed(seed, "node", day, node);
}

std::uint64_t init_stream_seed(std::uint64_t seed, std::uint32_t day) {
  return derive_seed(seed, "init", day);
}

ParamVector aggregate(std::span<const ParamVector> node_params, std::span<const double> weights) {
  if (node_params.empty()) throw ConfigError("aggregate: no node parameters");
  if (weights.size() != node_params.size()) {
    throw ShapeError("aggregate: " + std::to_string(node_params.size()) + " vectors but " +
                     std::to_string(weights.size()) + " weights");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ConfigError("aggregate: weights must be nonnegative");
    total += w;
  }
  if (!(total > 0.0)) throw ConfigError("aggregate: weights sum to zero");
  const auto len = node_params.front().size();
  for (const auto& p : node_params) {
    if (p.size() != len) throw ShapeError("aggregate: parameter vectors differ in length");
  }

  const double w0 = weights[0] / total;
  ParamVector out(len);
  for (std::size_t j = 0; j < len; ++j) out[j] = w0 * node_params[0][j];
  for (std::size_t n = 1; n < node_params.size(); ++n) {
    const double w = weights[n] / total;
    const auto& p = node_params[n];
    for (std::size_t j = 0; j < len; ++j) out[j] += w * p[j];
  }
  return out;
}

std::vector<double> node_weights(AggregationWeights mode, std::span<const LabeledBatch> shards) {
  std::vector<double> w(shards.size(), 1.0);
  if (mode == AggregationWeights::data_proportional) {
    for (std::size_t n = 0; n < shards.size(); ++n) w[n] = static_cast<double>(shards[n].size());
  }
  return w;
}

ParamVector federated_round(const Likelihood& model, std::span<const double> global,
                            std::span<const LabeledBatch> shards, const GaussianDiagPrior& prior,
                            const SgldConfig& config, std::span<RngStream> streams,
                            std::span<const double> weights, std::size_t iteration,
                            std::size_t threads) {
  const auto num_nodes = shards.size();
  if (num_nodes == 0) throw ConfigError("federated_round: no nodes");
  if (streams.size() != num_nodes) {
    throw ConfigError("federated_round: need one rng stream per node");
  }

  std::vector<ParamVector> updated(num_nodes);
  std::vector<std::exception_ptr> errors(num_nodes);
  const ParamVector zeros(config.inject_noise ? 0 : global.size(), 0.0);

  auto update_node = [&](std::size_t n) {
    try {
      auto& rng = streams[n];
      const auto grad = local_gradient(model, global, shards[n], prior, config, rng);
      if (config.inject_noise) {
        const auto xi = draw_noise(global.size(), rng);
        updated[n] = sgld_step(global, grad, config.eta, xi, iteration);
      } else {
        updated[n] = sgld_step(global, grad, config.eta, zeros, iteration);
      }
    } catch (const DivergenceError& e) {
      errors[n] = std::make_exception_ptr(
          DivergenceError("node " + std::to_string(n) + ": " + e.detail(), e.iteration()));
    } catch (const std::exception& e) {
      errors[n] = std::make_exception_ptr(NodeError(e.what(), n));
    }
  };

  const auto workers = std::min(threads, num_nodes);
  if (workers <= 1) {
    for (std::size_t n = 0; n < num_nodes; ++n) update_node(n);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) {
      pool.emplace_back([&] {
        for (auto n = next.fetch_add(1); n < num_nodes; n = next.fetch_add(1)) update_node(n);
      });
    }
  }  // jthreads join here

  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return aggregate(updated, weights);
}

namespace {

double validation_accuracy(const ModelSpec& spec, std::span<const double> params,
                           const LabeledBatch& validation) {
  auto pred = PredictionSet::from_probs(forward(spec, params, validation.features),
                                        validation.labels);
  return accuracy(pred);
}

}  // namespace

DayRun run_day(const ModelSpec& spec, const DayDataset& data, const GaussianDiagPrior& prior,
               const FederationConfig& config) {
  config.validate();
  const MlpLikelihood model(spec);
  const auto num_nodes = data.train_shards.size();
  if (num_nodes != config.num_nodes) {
    throw ConfigError("day " + std::to_string(data.day) + " has " + std::to_string(num_nodes) +
                      " shards, federation expects " + std::to_string(config.num_nodes));
  }
  if (data.validation.size() == 0) {
    throw ConfigError("day " + std::to_string(data.day) + " has an empty validation split");
  }
  data.validation.validate(spec);
  for (const auto& s : data.train_shards) s.validate(spec);

  SgldConfig sgld = config.sgld;
  sgld.num_nodes = num_nodes;

  ParamVector theta;
  if (config.init_mode == InitMode::prior_sample) {
    RngStream init_rng(init_stream_seed(config.seed, data.day));
    theta = init_params(spec, prior, init_rng);
  } else {
    if (prior.size() != model.param_count()) throw ShapeError("prior length mismatch");
    theta = prior.mean();
  }

  std::vector<RngStream> streams;
  streams.reserve(num_nodes);
  for (std::size_t n = 0; n < num_nodes; ++n) {
    streams.emplace_back(node_stream_seed(config.seed, data.day, n));
  }
  const auto weights = node_weights(config.aggregation_weights, data.train_shards);

  std::size_t train_count = 0;
  for (const auto& s : data.train_shards) train_count += s.size();

  DayRun run;
  run.posterior.day = data.day;
  run.posterior.total_iters = sgld.total_iters;
  run.posterior.burn_in = sgld.burn_in;
  run.posterior.seed = config.seed;
  run.posterior.samples = Matrix(sgld.retained(), theta.size());
  run.records.reserve(sgld.total_iters);

  for (std::size_t k = 1; k <= sgld.total_iters; ++k) {
    try {
      theta = federated_round(model, theta, data.train_shards, prior, sgld, streams, weights, k,
                              config.threads);
    } catch (const DivergenceError& e) {
      throw DivergenceError("day " + std::to_string(data.day) + ", " + e.detail(), e.iteration());
    }
    RoundRecord rec;
    rec.day = data.day;
    rec.iteration = k;
    double loss = 0.0;
    for (const auto& s : data.train_shards) loss += model.nll(theta, s);
    rec.train_loss = loss / static_cast<double>(train_count);
    rec.val_accuracy = validation_accuracy(spec, theta, data.validation);
    if (k > sgld.burn_in) {
      std::copy(theta.begin(), theta.end(), run.posterior.samples.row(k - sgld.burn_in - 1).begin());
    }
    rec.global_params = theta;
    run.records.push_back(std::move(rec));
  }
  return run;
}

namespace {

void evaluate(const ModelSpec& spec, const PosteriorSamples& posterior,
              const LabeledBatch& validation, const MetricsConfig& metrics, DayOutcome& out) {
  const auto s = metrics.predictive_samples == 0 ? posterior.num_samples()
                                                 : metrics.predictive_samples;
  auto pred = PredictionSet::from_probs(predictive(spec, posterior, validation.features, s),
                                        validation.labels);
  out.accuracy = accuracy(pred);
  out.bins = calibration_bins(pred, metrics.num_bins);
  out.ece = ece(out.bins, pred.size());
}

DayOutcome trained_outcome(const ModelSpec& spec, const DayDataset& data, DayRun run,
                           const MetricsConfig& metrics) {
  DayOutcome out;
  out.day = data.day;
  out.trained = true;
  std::vector<double> curve;
  curve.reserve(run.records.size());
  for (const auto& r : run.records) curve.push_back(r.val_accuracy);
  out.iterations_to_threshold = iterations_to_threshold(curve, metrics.threshold);
  out.records = std::move(run.records);
  out.posterior = std::move(run.posterior);
  evaluate(spec, out.posterior, data.validation, metrics, out);
  return out;
}

}  // namespace

ContinualResult run_continual(const ModelSpec& spec, std::span<const DayDataset> days,
                              const FederationConfig& config, const MetricsConfig& metrics,
                              const GaussianDiagPrior* initial_prior) {
  if (days.empty()) throw ConfigError("run_continual: no days");
  config.validate();
  metrics.validate();
  const auto n_params = param_count(spec);
  const auto standard = standard_prior(n_params);

  ContinualResult result;
  result.strategy = config.strategy;

  switch (config.strategy) {
    case Strategy::transfer_learning: {
      auto first = trained_outcome(spec, days[0], run_day(spec, days[0], standard, config), metrics);
      for (std::size_t d = 1; d < days.size(); ++d) {
        DayOutcome out;
        out.day = days[d].day;
        out.trained = false;
        out.posterior = first.posterior;
        evaluate(spec, out.posterior, days[d].validation, metrics, out);
        result.days.push_back(std::move(out));
      }
      result.days.insert(result.days.begin(), std::move(first));
      break;
    }
    case Strategy::retrain:
      for (const auto& day : days) {
        result.days.push_back(trained_outcome(spec, day, run_day(spec, day, standard, config), metrics));
      }
      break;
    case Strategy::posterior_continual: {
      GaussianDiagPrior prior = initial_prior ? *initial_prior : standard;
      for (std::size_t d = 0; d < days.size(); ++d) {
        if (d > 0) prior = fit_from_samples(result.days.back().posterior);
        result.days.push_back(
            trained_outcome(spec, days[d], run_day(spec, days[d], prior, config), metrics));
      }
      break;
    }
  }
  return result;
}

}  // namespace bfl
