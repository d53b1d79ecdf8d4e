#include "bfl/sgld.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "bfl/errors.hpp"

namespace bfl {

std::size_t SgldConfig::effective_batch_size(std::size_t shard_size) const noexcept {
  return batch_size == 0 ? std::min<std::size_t>(32, shard_size) : batch_size;
}

void SgldConfig::validate() const {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigError("sgld.eta must be positive");
  if (burn_in >= total_iters) throw ConfigError("sgld.burn_in must be below sgld.total_iters");
  if (total_iters - burn_in < 2) {
    throw ConfigError("sgld.total_iters - sgld.burn_in must be at least 2");
  }
  if (num_batches == 0) throw ConfigError("sgld.num_batches must be at least 1");
  if (num_nodes == 0) throw ConfigError("sgld.num_nodes must be at least 1");
}

ParamVector sgld_step(std::span<const double> params, std::span<const double> grad, double eta,
                      std::span<const double> noise, std::size_t iteration) {
  if (grad.size() != params.size() || noise.size() != params.size()) {
    throw ShapeError("sgld_step: params, gradient and noise lengths differ");
  }
  const double scale = std::sqrt(2.0 * eta);
  ParamVector next(params.size());
  for (std::size_t j = 0; j < params.size(); ++j) {
    if (!std::isfinite(grad[j])) {
      throw DivergenceError("non-finite gradient at component " + std::to_string(j), iteration);
    }
    next[j] = params[j] - eta * grad[j] + scale * noise[j];
    if (!std::isfinite(next[j])) {
      throw DivergenceError("non-finite parameter at component " + std::to_string(j),
                            iteration);
    }
  }
  return next;
}

ParamVector draw_noise(std::size_t n, RngStream& rng) {
  ParamVector xi(n);
  for (double& v : xi) v = rng.normal();
  return xi;
}

namespace {

// Partial Fisher-Yates: the first k entries of a uniform random permutation.
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k,
                                                    RngStream& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.uniform_index(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

}  // namespace

ParamVector local_gradient(const Likelihood& model, std::span<const double> params,
                           const LabeledBatch& shard, const GaussianDiagPrior& prior,
                           const SgldConfig& config, RngStream& rng) {
  const std::size_t n = shard.size();
  if (n == 0) throw ShapeError("local_gradient: empty shard");
  const std::size_t b = config.effective_batch_size(n);
  if (b == 0 || b > n) {
    throw ConfigError("batch size " + std::to_string(b) + " exceeds shard size " +
                      std::to_string(n));
  }
  if (params.size() != model.param_count()) {
    throw ShapeError("local_gradient: parameter vector has the wrong length");
  }

  ParamVector grad(params.size(), 0.0);
  if (b == n) {
    for (std::size_t m = 0; m < config.num_batches; ++m) {
      model.accumulate_nll_grad(params, shard, grad);
    }
  } else {
    for (std::size_t m = 0; m < config.num_batches; ++m) {
      const auto rows = sample_without_replacement(n, b, rng);
      model.accumulate_nll_grad(params, select_rows(shard, rows), grad);
    }
  }
  const double inv_m = 1.0 / static_cast<double>(config.num_batches);
  const double inv_n = 1.0 / static_cast<double>(config.num_nodes);
  const auto prior_grad = log_prior_grad(prior, params);
  for (std::size_t j = 0; j < grad.size(); ++j) {
    grad[j] = grad[j] * inv_m - inv_n * prior_grad[j];
  }
  return grad;
}

PosteriorSamples run_chain(const Likelihood& model, std::span<const double> init,
                           const LabeledBatch& data, const GaussianDiagPrior& prior,
                           const SgldConfig& config, RngStream& rng) {
  config.validate();
  PosteriorSamples out;
  out.total_iters = config.total_iters;
  out.burn_in = config.burn_in;
  out.samples = Matrix(config.retained(), init.size());

  ParamVector theta(init.begin(), init.end());
  const ParamVector zeros(theta.size(), 0.0);
  for (std::size_t k = 1; k <= config.total_iters; ++k) {
    const auto grad = local_gradient(model, theta, data, prior, config, rng);
    if (config.inject_noise) {
      const auto xi = draw_noise(theta.size(), rng);
      theta = sgld_step(theta, grad, config.eta, xi, k);
    } else {
      theta = sgld_step(theta, grad, config.eta, zeros, k);
    }
    if (k > config.burn_in) {
      std::copy(theta.begin(), theta.end(), out.samples.row(k - config.burn_in - 1).begin());
    }
  }
  return out;
}

}  // namespace bfl
