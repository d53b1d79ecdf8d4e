#include <benchmark/benchmark.h>

#include <cmath>

#include "bfl/datagen.hpp"
#include "bfl/federation.hpp"
#include "bfl/likelihood.hpp"
#include "bfl/metrics.hpp"

using namespace bfl;

namespace {

LabeledBatch batch_for(const ModelSpec& spec, std::size_t n, std::uint64_t seed) {
  ShiftSpec shift;
  shift.num_classes = spec.num_classes();
  shift.input_dim = spec.input_dim();
  shift.samples_per_day = n;
  return gen_day(shift, 1, seed);
}

void BM_NllGrad(benchmark::State& state) {
  const auto hidden = static_cast<std::size_t>(state.range(0));
  const ModelSpec spec{{2, hidden, hidden, 10}};
  RngStream rng(1);
  const auto params = init_params(spec, standard_prior(param_count(spec)), rng);
  const auto batch = batch_for(spec, 32, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(nll_grad(spec, params, batch));
  }
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_NllGrad)->Arg(16)->Arg(64)->Arg(128);

void BM_FederatedRound(benchmark::State& state) {
  const auto threads = static_cast<std::size_t>(state.range(0));
  const ModelSpec spec{{2, 64, 64, 10}};
  const MlpLikelihood model(spec);
  std::vector<LabeledBatch> shards;
  for (std::uint64_t n = 0; n < 10; ++n) shards.push_back(batch_for(spec, 50, 10 + n));
  const auto prior = standard_prior(param_count(spec));
  RngStream init_rng(3);
  auto theta = init_params(spec, prior, init_rng);
  SgldConfig cfg;
  cfg.eta = 1e-3;
  cfg.num_nodes = 10;
  std::vector<RngStream> streams;
  for (std::size_t n = 0; n < 10; ++n) streams.emplace_back(node_stream_seed(7, 1, n));
  const std::vector<double> weights(10, 1.0);
  std::size_t k = 0;
  for (auto _ : state) {
    theta = federated_round(model, theta, shards, prior, cfg, streams, weights, ++k, threads);
    benchmark::DoNotOptimize(theta.data());
  }
}
BENCHMARK(BM_FederatedRound)->Arg(1)->Arg(4)->UseRealTime();

void BM_Ece(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  RngStream rng(5);
  Matrix probs(n, 10);
  std::vector<int> truth(n);
  for (std::size_t i = 0; i < n; ++i) {
    double z = 0.0;
    for (std::size_t c = 0; c < 10; ++c) z += probs(i, c) = std::exp(2.0 * rng.normal());
    for (std::size_t c = 0; c < 10; ++c) probs(i, c) /= z;
    truth[i] = static_cast<int>(rng.uniform_index(10));
  }
  const auto pred = PredictionSet::from_probs(std::move(probs), std::move(truth));
  for (auto _ : state) {
    benchmark::DoNotOptimize(ece(calibration_bins(pred, 10), n));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Ece)->Arg(125)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
