#include "bfl/prior.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "bfl/errors.hpp"

namespace bfl {

GaussianDiagPrior::GaussianDiagPrior(std::vector<double> mean, std::vector<double> variance)
    : mean_(std::move(mean)), variance_(std::move(variance)) {
  if (mean_.size() != variance_.size()) {
    throw ShapeError("prior mean has length " + std::to_string(mean_.size()) +
                     " but variance has length " + std::to_string(variance_.size()));
  }
  for (std::size_t j = 0; j < mean_.size(); ++j) {
    if (!std::isfinite(mean_[j]) || !std::isfinite(variance_[j])) {
      throw ConfigError("prior component " + std::to_string(j) + " is not finite");
    }
    variance_[j] = std::max(variance_[j], kVarianceFloor);
  }
}

GaussianDiagPrior standard_prior(std::size_t n_params) {
  return GaussianDiagPrior(std::vector<double>(n_params, 0.0),
                           std::vector<double>(n_params, 1.0));
}

namespace {

void check_length(const GaussianDiagPrior& prior, std::span<const double> params) {
  if (prior.size() != params.size()) {
    throw ShapeError("prior has " + std::to_string(prior.size()) + " components, got " +
                     std::to_string(params.size()) + " parameters");
  }
}

}  // namespace

double log_prior(const GaussianDiagPrior& prior, std::span<const double> params) {
  check_length(prior, params);
  const auto& mu = prior.mean();
  const auto& var = prior.variance();
  double lp = 0.0;
  for (std::size_t j = 0; j < params.size(); ++j) {
    const double d = params[j] - mu[j];
    lp -= d * d / (2.0 * var[j]) + 0.5 * std::log(2.0 * std::numbers::pi * var[j]);
  }
  return lp;
}

ParamVector log_prior_grad(const GaussianDiagPrior& prior, std::span<const double> params) {
  check_length(prior, params);
  ParamVector g(params.size());
  for (std::size_t j = 0; j < params.size(); ++j) {
    g[j] = -(params[j] - prior.mean()[j]) / prior.variance()[j];
  }
  return g;
}

GaussianDiagPrior fit_from_samples(const PosteriorSamples& samples) {
  const auto rows = samples.num_samples();
  const auto cols = samples.num_params();
  if (rows < 2) {
    throw InsufficientSamplesError("fitting a prior needs at least 2 posterior samples, got " +
                                   std::to_string(rows));
  }
  std::vector<double> mean(cols, 0.0);
  std::vector<double> var(cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = samples.samples.row(r);
    for (std::size_t j = 0; j < cols; ++j) mean[j] += row[j];
  }
  for (double& m : mean) m /= static_cast<double>(rows);
  // Two-pass variance.
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = samples.samples.row(r);
    for (std::size_t j = 0; j < cols; ++j) {
      const double d = row[j] - mean[j];
      var[j] += d * d;
    }
  }
  for (double& v : var) v /= static_cast<double>(rows - 1);
  return GaussianDiagPrior(std::move(mean), std::move(var));
}

}  // namespace bfl
