#pragma once

#include <cstddef>
#include <span>

#include "bfl/model.hpp"

namespace bfl {

/// What the sampler needs from a model: a negative log-likelihood over a
/// labeled batch and its gradient. The MLP is the production implementation;
/// tests plug in closed-form models with known posteriors.
class Likelihood {
 public:
  virtual ~Likelihood() = default;

  virtual std::size_t param_count() const = 0;
  virtual double nll(std::span<const double> params, const LabeledBatch& batch) const = 0;
  /// Adds d nll / d params into `out`.
  virtual void accumulate_nll_grad(std::span<const double> params, const LabeledBatch& batch,
                                   std::span<double> out) const = 0;
};

class MlpLikelihood final : public Likelihood {
 public:
  explicit MlpLikelihood(ModelSpec spec);

  const ModelSpec& spec() const noexcept { return spec_; }

  std::size_t param_count() const override { return count_; }
  double nll(std::span<const double> params, const LabeledBatch& batch) const override;
  void accumulate_nll_grad(std::span<const double> params, const LabeledBatch& batch,
                           std::span<double> out) const override;

 private:
  ModelSpec spec_;
  std::size_t count_;
};

}  // namespace bfl
