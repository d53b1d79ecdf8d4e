#pragma once

#include <cstddef>
#include <span>

#include "bfl/likelihood.hpp"
#include "bfl/prior.hpp"
#include "bfl/rng.hpp"
#include "bfl/tensor.hpp"

namespace bfl {

struct SgldConfig {
  double eta = 1e-4;            // learning rate
  std::size_t total_iters = 100;  // T
  std::size_t burn_in = 50;       // T_b
  std::size_t num_batches = 1;    // M
  /// Minibatch size B; 0 selects min(32, shard size).
  std::size_t batch_size = 0;
  /// N in the 1/N prior scaling of the local loss.
  std::size_t num_nodes = 1;
  /// When false the Langevin noise is skipped entirely (no draws consumed).
  bool inject_noise = true;

  std::size_t retained() const noexcept { return total_iters - burn_in; }
  std::size_t effective_batch_size(std::size_t shard_size) const noexcept;

  /// Throws ConfigError unless eta > 0, T - T_b >= 2, M >= 1, N >= 1.
  void validate() const;
};

/// params - eta * grad + sqrt(2 eta) * noise. Throws DivergenceError tagged
/// with `iteration` if the gradient or the result is non-finite.
ParamVector sgld_step(std::span<const double> params, std::span<const double> grad,
                      double eta, std::span<const double> noise, std::size_t iteration = 0);

/// n independent standard normal draws.
ParamVector draw_noise(std::size_t n, RngStream& rng);

/// Stochastic gradient of the local loss:
///   (1/M) sum_m grad nll(batch_m) - (1/N) grad log p(params).
/// Each batch is drawn uniformly without replacement from the shard; when the
/// batch size equals the shard size the shard is used as-is without drawing.
ParamVector local_gradient(const Likelihood& model, std::span<const double> params,
                           const LabeledBatch& shard, const GaussianDiagPrior& prior,
                           const SgldConfig& config, RngStream& rng);

/// Single-chain SGLD: T steps from `init`, keeping iterates T_b+1..T.
/// Each step draws its minibatches, then its noise, from `rng`.
PosteriorSamples run_chain(const Likelihood& model, std::span<const double> init,
                           const LabeledBatch& data, const GaussianDiagPrior& prior,
                           const SgldConfig& config, RngStream& rng);

}  // namespace bfl
