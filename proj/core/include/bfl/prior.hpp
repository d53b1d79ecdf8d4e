#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bfl/tensor.hpp"

namespace bfl {

/// Every fitted or user-supplied variance is floored at this value.
inline constexpr double kVarianceFloor = 1e-6;

/// Independent Gaussian over each parameter: N(mean_j, variance_j).
class GaussianDiagPrior {
 public:
  GaussianDiagPrior() = default;

  /// Variances below kVarianceFloor are raised to it. Throws ShapeError on a
  /// length mismatch and ConfigError on non-finite entries.
  GaussianDiagPrior(std::vector<double> mean, std::vector<double> variance);

  std::size_t size() const noexcept { return mean_.size(); }
  const std::vector<double>& mean() const noexcept { return mean_; }
  const std::vector<double>& variance() const noexcept { return variance_; }

  friend bool operator==(const GaussianDiagPrior&, const GaussianDiagPrior&) = default;

 private:
  std::vector<double> mean_;
  std::vector<double> variance_;
};

/// Retained post-burn-in parameter vectors of one day's chain, one per row.
struct PosteriorSamples {
  Matrix samples;  // T_s x N_p
  std::uint32_t day = 1;
  std::uint64_t total_iters = 0;  // T
  std::uint64_t burn_in = 0;      // T_b
  std::uint64_t seed = 0;

  std::size_t num_samples() const noexcept { return samples.rows(); }
  std::size_t num_params() const noexcept { return samples.cols(); }

  friend bool operator==(const PosteriorSamples&, const PosteriorSamples&) = default;
};

/// N(0, I) over n_params parameters.
GaussianDiagPrior standard_prior(std::size_t n_params);

/// Full normalized log-density, sum_j -(x_j - mu_j)^2 / (2 s_j) - log(2 pi s_j) / 2.
double log_prior(const GaussianDiagPrior& prior, std::span<const double> params);

/// Component j: -(x_j - mu_j) / s_j.
ParamVector log_prior_grad(const GaussianDiagPrior& prior, std::span<const double> params);

/// Per-column sample mean and unbiased sample variance (floored). Requires at
/// least two rows.
GaussianDiagPrior fit_from_samples(const PosteriorSamples& samples);

}  // namespace bfl
