#include "bfl/likelihood.hpp"

namespace bfl {

MlpLikelihood::MlpLikelihood(ModelSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  count_ = bfl::param_count(spec_);
}

double MlpLikelihood::nll(std::span<const double> params, const LabeledBatch& batch) const {
  return nll_loss(spec_, params, batch);
}

void MlpLikelihood::accumulate_nll_grad(std::span<const double> params,
                                        const LabeledBatch& batch,
                                        std::span<double> out) const {
  bfl::accumulate_nll_grad(spec_, params, batch, out);
}

}  // namespace bfl
