#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>

#include "bfl/datagen.hpp"
#include "bfl/errors.hpp"
#include "bfl/federation.hpp"
#include "bfl/likelihood.hpp"
#include "oracles.hpp"

using namespace bfl;

namespace {

LabeledBatch points(std::initializer_list<std::pair<double, int>> xs) {
  LabeledBatch b;
  for (const auto& [x, y] : xs) {
    b.features.push_row(std::vector<double>{x});
    b.labels.push_back(y);
  }
  return b;
}

std::vector<DayDataset> small_days(const ShiftSpec& shift, std::size_t days, std::size_t nodes,
                                   std::size_t per_node, std::uint64_t seed) {
  std::vector<DayDataset> out;
  for (std::uint32_t d = 1; d <= days; ++d) {
    out.push_back(make_day_dataset(gen_day(shift, d, seed), d, shift.validation_fraction, nodes,
                                   per_node, seed));
  }
  return out;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("aggregate examples") {
  const std::vector<ParamVector> two{{0.0, 2.0}, {2.0, 0.0}};
  CHECK(aggregate(two, std::vector<double>{1.0, 1.0}) == ParamVector{1.0, 1.0});
  const std::vector<ParamVector> one{{0.3, -7.25, 1e-9}};
  CHECK(aggregate(one, std::vector<double>{42.0}) == one[0]);
  const std::vector<ParamVector> scalars{{0.0}, {4.0}};
  CHECK(aggregate(scalars, std::vector<double>{1.0, 3.0})[0] == doctest::Approx(3.0));
}

TEST_CASE("aggregate errors") {
  CHECK_THROWS_AS((void)aggregate(std::vector<ParamVector>{}, std::vector<double>{}), ConfigError);
  const std::vector<ParamVector> two{{0.0}, {1.0}};
  CHECK_THROWS_AS((void)aggregate(two, std::vector<double>{0.0, 0.0}), ConfigError);
  CHECK_THROWS_AS((void)aggregate(two, std::vector<double>{1.0}), ShapeError);
  const std::vector<ParamVector> ragged{{0.0}, {1.0, 2.0}};
  CHECK_THROWS_AS((void)aggregate(ragged, std::vector<double>{1.0, 1.0}), ShapeError);
}

TEST_CASE("aggregate: permutation invariance, idempotence, convex hull") {
  RngStream rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(8);
    std::vector<ParamVector> params;
    std::vector<double> weights;
    for (std::size_t i = 0; i < n; ++i) {
      params.push_back(bfl::testing::random_params(5, rng, 3.0));
      weights.push_back(0.1 + std::abs(rng.normal()));
    }
    const auto out = aggregate(params, weights);
    for (std::size_t j = 0; j < 5; ++j) {
      double lo = params[0][j], hi = params[0][j];
      for (const auto& p : params) {
        lo = std::min(lo, p[j]);
        hi = std::max(hi, p[j]);
      }
      CHECK(out[j] >= lo - 1e-12);
      CHECK(out[j] <= hi + 1e-12);
    }

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng.engine());
    std::vector<ParamVector> p2;
    std::vector<double> w2;
    for (auto i : order) {
      p2.push_back(params[i]);
      w2.push_back(weights[i]);
    }
    const auto permuted = aggregate(p2, w2);
    for (std::size_t j = 0; j < 5; ++j) CHECK(permuted[j] == doctest::Approx(out[j]).epsilon(1e-12));

    const std::vector<ParamVector> same(n, params[0]);
    const auto flat = aggregate(same, weights);
    for (std::size_t j = 0; j < 5; ++j) CHECK(flat[j] == doctest::Approx(params[0][j]).epsilon(1e-14));
  }
}

TEST_CASE("node weights") {
  std::vector<LabeledBatch> shards(2);
  shards[0] = points({{0.0, 0}, {1.0, 1}});
  shards[1] = points({{0.0, 0}});
  CHECK(node_weights(AggregationWeights::uniform, shards) == std::vector<double>{1.0, 1.0});
  CHECK(node_weights(AggregationWeights::data_proportional, shards) == std::vector<double>{2.0, 1.0});
}

TEST_CASE("a one-node round is one run_chain iteration") {
  const ModelSpec spec{{2, 4, 3}};
  const MlpLikelihood model(spec);
  RngStream data_rng(10);
  const std::vector<LabeledBatch> shards{bfl::testing::random_batch(spec, 12, data_rng)};
  const auto init = bfl::testing::random_params(param_count(spec), data_rng, 0.5);
  const auto prior = standard_prior(init.size());
  SgldConfig cfg;
  cfg.eta = 1e-2;
  cfg.total_iters = 2;
  cfg.burn_in = 0;
  cfg.batch_size = 5;

  std::vector<RngStream> streams{RngStream(77)};
  const auto round = federated_round(model, init, shards, prior, cfg, streams, std::vector<double>{1.0}, 1);
  RngStream chain_rng(77);
  const auto chain = run_chain(model, init, shards[0], prior, cfg, chain_rng);
  const auto first = chain.samples.row(0);
  CHECK(same_bits(round, {first.begin(), first.end()}));
}

TEST_CASE("identical nodes with identical streams aggregate to any single node's update") {
  const ModelSpec spec{{2, 3, 2}};
  const MlpLikelihood model(spec);
  RngStream data_rng(21);
  const auto shard = bfl::testing::random_batch(spec, 8, data_rng);
  const std::vector<LabeledBatch> shards(4, shard);
  const auto init = bfl::testing::random_params(param_count(spec), data_rng, 0.5);
  const auto prior = standard_prior(init.size());
  SgldConfig cfg;
  cfg.eta = 1e-2;
  cfg.batch_size = 4;
  cfg.num_nodes = 4;
  std::vector<RngStream> streams(4, RngStream(5));
  const auto agg = federated_round(model, init, shards, prior, cfg, streams, std::vector<double>(4, 1.0), 1);

  std::vector<RngStream> single{RngStream(5)};
  const auto one = federated_round(model, init, std::vector<LabeledBatch>{shard}, prior, cfg, single,
                                   std::vector<double>{1.0}, 1);
  for (std::size_t j = 0; j < agg.size(); ++j) CHECK(agg[j] == doctest::Approx(one[j]).epsilon(1e-14));
}

TEST_CASE("two-node noise-free round matches hand-computed gradient steps") {
  // Logistic model [1, 2]: params {w0, w1, b0, b1}, logits z_c = w_c x + b_c.
  const ModelSpec spec{{1, 2}};
  const MlpLikelihood model(spec);
  const std::vector<double> theta{0.5, -0.5, 0.1, -0.1};
  const std::vector<LabeledBatch> shards{points({{1.0, 0}, {-2.0, 1}}), points({{0.5, 1}, {3.0, 0}})};
  SgldConfig cfg;
  cfg.eta = 0.05;
  cfg.batch_size = 2;
  cfg.num_nodes = 2;
  cfg.inject_noise = false;
  std::vector<RngStream> streams{RngStream(1), RngStream(2)};
  const auto got = federated_round(model, theta, shards, standard_prior(4), cfg, streams,
                                   std::vector<double>{1.0, 1.0}, 1);

  // dNLL/dz_c = p_c - [c = y]; p_0 = sigmoid(z_0 - z_1). Prior term: +theta / N.
  auto node_step = [&](const LabeledBatch& s) {
    std::vector<double> g(4, 0.0);
    for (std::size_t i = 0; i < 2; ++i) {
      const double x = s.features(i, 0);
      const double z0 = theta[0] * x + theta[2];
      const double z1 = theta[1] * x + theta[3];
      const double p0 = 1.0 / (1.0 + std::exp(-(z0 - z1)));
      const double r0 = p0 - (s.labels[i] == 0 ? 1.0 : 0.0);
      const double r1 = (1.0 - p0) - (s.labels[i] == 1 ? 1.0 : 0.0);
      g[0] += r0 * x;
      g[1] += r1 * x;
      g[2] += r0;
      g[3] += r1;
    }
    std::vector<double> next(4);
    for (std::size_t j = 0; j < 4; ++j) next[j] = theta[j] - 0.05 * (g[j] + 0.5 * theta[j]);
    return next;
  };
  const auto a = node_step(shards[0]);
  const auto b = node_step(shards[1]);
  for (std::size_t j = 0; j < 4; ++j) CHECK(got[j] == doctest::Approx(0.5 * (a[j] + b[j])).epsilon(1e-13));
}

TEST_CASE("round result does not depend on thread count or scheduling") {
  const ModelSpec spec{{2, 6, 4}};
  const MlpLikelihood model(spec);
  RngStream data_rng(4);
  std::vector<LabeledBatch> shards;
  for (int n = 0; n < 7; ++n) shards.push_back(bfl::testing::random_batch(spec, 20, data_rng));
  const auto init = bfl::testing::random_params(param_count(spec), data_rng, 0.5);
  const auto prior = standard_prior(init.size());
  SgldConfig cfg;
  cfg.eta = 1e-3;
  cfg.batch_size = 8;
  cfg.num_batches = 2;
  cfg.num_nodes = 7;
  const std::vector<double> w(7, 1.0);

  auto run = [&](std::size_t threads) {
    std::vector<RngStream> streams;
    for (std::size_t n = 0; n < 7; ++n) streams.emplace_back(node_stream_seed(9, 1, n));
    ParamVector theta = init;
    for (std::size_t k = 1; k <= 10; ++k) {
      theta = federated_round(model, theta, shards, prior, cfg, streams, w, k, threads);
    }
    return theta;
  };
  const auto serial = run(1);
  for (std::size_t threads : {2, 3, 7, 16}) CHECK(same_bits(run(threads), serial));
}

TEST_CASE("node failures carry the node id") {
  const ModelSpec spec{{1, 2}};
  const MlpLikelihood model(spec);
  std::vector<LabeledBatch> shards{points({{1.0, 0}}), points({{1.0, 1}}), points({{1.0, 0}})};
  shards[1].features(0, 0) = std::numeric_limits<double>::quiet_NaN();
  SgldConfig cfg;
  cfg.batch_size = 1;
  cfg.num_nodes = 3;
  std::vector<RngStream> streams(3, RngStream(1));
  try {
    (void)federated_round(model, std::vector<double>(4, 0.0), shards, standard_prior(4), cfg, streams,
                          std::vector<double>(3, 1.0), 6, 2);
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    CHECK(std::string(e.what()).find("node 1") != std::string::npos);
    CHECK(e.iteration() == 6);
  }

  std::vector<LabeledBatch> bad{points({{1.0, 0}}), points({{1.0, 5}})};
  std::vector<RngStream> two(2, RngStream(1));
  cfg.num_nodes = 2;
  try {
    (void)federated_round(model, std::vector<double>(4, 0.0), bad, standard_prior(4), cfg, two,
                          std::vector<double>(2, 1.0), 1);
    FAIL("expected NodeError");
  } catch (const NodeError& e) {
    CHECK(e.node() == 1);
  }
}

TEST_CASE("run_day bookkeeping and determinism") {
  ShiftSpec shift;
  shift.num_classes = 3;
  shift.samples_per_day = 100;
  const auto days = small_days(shift, 1, 4, 20, 5);
  const ModelSpec spec{{2, 5, 3}};
  FederationConfig cfg;
  cfg.num_nodes = 4;
  cfg.per_node_samples = 20;
  cfg.sgld.eta = 1e-3;
  cfg.sgld.total_iters = 12;
  cfg.sgld.burn_in = 4;
  cfg.seed = 5;
  const auto prior = standard_prior(param_count(spec));
  const auto a = run_day(spec, days[0], prior, cfg);
  CHECK(a.records.size() == 12);
  CHECK(a.posterior.num_samples() == 8);
  for (std::size_t k = 0; k < 12; ++k) {
    CHECK(a.records[k].iteration == k + 1);
    CHECK(a.records[k].val_accuracy >= 0.0);
    CHECK(a.records[k].val_accuracy <= 1.0);
  }
  for (std::size_t r = 0; r < 8; ++r) {
    const auto row = a.posterior.samples.row(r);
    CHECK(same_bits({row.begin(), row.end()}, a.records[r + 4].global_params));
  }
  const auto b = run_day(spec, days[0], prior, cfg);
  CHECK(a.posterior == b.posterior);
  cfg.threads = 3;
  CHECK(run_day(spec, days[0], prior, cfg).posterior == a.posterior);

  cfg.num_nodes = 3;
  CHECK_THROWS_AS((void)run_day(spec, days[0], prior, cfg), ConfigError);
}

TEST_CASE("one-node run_day equals run_chain on the same derived stream") {
  ShiftSpec shift;
  shift.num_classes = 4;
  shift.samples_per_day = 60;
  const auto days = small_days(shift, 1, 1, 40, 13);
  const ModelSpec spec{{2, 6, 4}};
  FederationConfig cfg;
  cfg.num_nodes = 1;
  cfg.per_node_samples = 40;
  cfg.sgld.eta = 2e-3;
  cfg.sgld.total_iters = 30;
  cfg.sgld.burn_in = 10;
  cfg.sgld.batch_size = 16;
  cfg.seed = 13;
  const auto prior = standard_prior(param_count(spec));
  const auto fed = run_day(spec, days[0], prior, cfg);

  RngStream init_rng(init_stream_seed(13, 1));
  const auto init = init_params(spec, prior, init_rng);
  RngStream chain_rng(node_stream_seed(13, 1, 0));
  SgldConfig sgld = cfg.sgld;
  sgld.num_nodes = 1;
  const auto chain = run_chain(MlpLikelihood(spec), init, days[0].train_shards[0], prior, sgld, chain_rng);
  CHECK(fed.posterior.samples.data().size() == chain.samples.data().size());
  CHECK(same_bits(fed.posterior.samples.data(), chain.samples.data()));
}

TEST_CASE("run_day prior_mean init starts from the prior mean") {
  ShiftSpec shift;
  shift.num_classes = 2;
  shift.samples_per_day = 40;
  const auto days = small_days(shift, 1, 2, 10, 1);
  const ModelSpec spec{{2, 2}};
  FederationConfig cfg;
  cfg.num_nodes = 2;
  cfg.per_node_samples = 10;
  cfg.init_mode = InitMode::prior_mean;
  cfg.sgld.total_iters = 3;
  cfg.sgld.burn_in = 1;
  cfg.sgld.eta = 1e-12;
  cfg.sgld.inject_noise = false;
  const GaussianDiagPrior prior({1.0, 2.0, 3.0, 4.0, 5.0, 6.0}, std::vector<double>(6, 1.0));
  const auto run = run_day(spec, days[0], prior, cfg);
  for (std::size_t j = 0; j < 6; ++j) CHECK(run.records[0].global_params[j] == doctest::Approx(j + 1.0));
}

TEST_CASE("strategies agree on a single day and Retrain matches P-CL on day 1") {
  ShiftSpec shift;
  shift.num_classes = 3;
  shift.samples_per_day = 120;
  const ModelSpec spec{{2, 4, 3}};
  FederationConfig cfg;
  cfg.num_nodes = 3;
  cfg.per_node_samples = 30;
  cfg.sgld.eta = 1e-3;
  cfg.sgld.total_iters = 10;
  cfg.sgld.burn_in = 5;
  cfg.seed = 8;
  MetricsConfig metrics;
  metrics.threshold = 0.5;

  const auto one_day = small_days(shift, 1, 3, 30, 8);
  std::vector<ContinualResult> results;
  for (auto s : {Strategy::transfer_learning, Strategy::retrain, Strategy::posterior_continual}) {
    cfg.strategy = s;
    results.push_back(run_continual(spec, one_day, cfg, metrics));
  }
  for (const auto& r : results) {
    REQUIRE(r.days.size() == 1);
    CHECK(r.days[0].posterior == results[0].days[0].posterior);
    CHECK(r.days[0].accuracy == results[0].days[0].accuracy);
    CHECK(r.days[0].ece == results[0].days[0].ece);
    CHECK(r.days[0].iterations_to_threshold == results[0].days[0].iterations_to_threshold);
  }

  const auto three_days = small_days(shift, 3, 3, 30, 8);
  cfg.strategy = Strategy::retrain;
  const auto retrain = run_continual(spec, three_days, cfg, metrics);
  cfg.strategy = Strategy::posterior_continual;
  const auto pcl = run_continual(spec, three_days, cfg, metrics);
  cfg.strategy = Strategy::transfer_learning;
  const auto tl = run_continual(spec, three_days, cfg, metrics);
  REQUIRE(retrain.days.size() == 3);
  REQUIRE(pcl.days.size() == 3);
  CHECK(retrain.days[0].posterior == pcl.days[0].posterior);
  for (std::size_t k = 0; k < 10; ++k) {
    CHECK(same_bits(retrain.days[0].records[k].global_params, pcl.days[0].records[k].global_params));
  }
  CHECK_FALSE(retrain.days[1].posterior == pcl.days[1].posterior);

  REQUIRE(tl.days.size() == 3);
  CHECK(tl.days[0].trained);
  CHECK_FALSE(tl.days[1].trained);
  CHECK(tl.days[1].records.empty());
  CHECK_FALSE(tl.days[2].iterations_to_threshold.has_value());
  CHECK(tl.days[2].posterior == tl.days[0].posterior);
}

TEST_CASE("P-CL day 2 uses the fitted day-1 posterior as its prior") {
  ShiftSpec shift;
  shift.num_classes = 2;
  shift.samples_per_day = 60;
  const ModelSpec spec{{2, 2}};
  FederationConfig cfg;
  cfg.num_nodes = 2;
  cfg.per_node_samples = 20;
  cfg.sgld.eta = 1e-3;
  cfg.sgld.total_iters = 8;
  cfg.sgld.burn_in = 3;
  cfg.strategy = Strategy::posterior_continual;
  cfg.seed = 2;
  const auto days = small_days(shift, 2, 2, 20, 2);
  const auto pcl = run_continual(spec, days, cfg, MetricsConfig{});
  const auto expect = run_day(spec, days[1], fit_from_samples(pcl.days[0].posterior), cfg);
  CHECK(pcl.days[1].posterior == expect.posterior);

  const GaussianDiagPrior custom(std::vector<double>(6, 0.5), std::vector<double>(6, 0.1));
  const auto seeded = run_continual(spec, days, cfg, MetricsConfig{}, &custom);
  CHECK(seeded.days[0].posterior == run_day(spec, days[0], custom, cfg).posterior);
}

TEST_CASE("without drift, the frozen day-1 model keeps its accuracy on day 2") {
  ShiftSpec shift;
  shift.num_classes = 4;
  shift.rotation_per_day = 0.0;
  shift.samples_per_day = 625;
  const ModelSpec spec{{2, 16, 4}};
  FederationConfig cfg;
  cfg.num_nodes = 10;
  cfg.per_node_samples = 50;
  cfg.sgld.eta = 1e-3;
  cfg.sgld.total_iters = 100;
  cfg.sgld.burn_in = 50;
  cfg.strategy = Strategy::transfer_learning;
  cfg.seed = 3;
  const auto days = small_days(shift, 2, 10, 50, 3);
  const auto tl = run_continual(spec, days, cfg, MetricsConfig{});
  CHECK(tl.days[0].accuracy > 0.7);
  CHECK(std::abs(tl.days[1].accuracy - tl.days[0].accuracy) < 0.1);
}

TEST_CASE("federation config validation") {
  FederationConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.num_nodes = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = FederationConfig{};
  cfg.num_days = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = FederationConfig{};
  cfg.sgld.batch_size = 60;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK(parse_strategy("tl") == Strategy::transfer_learning);
  CHECK(parse_strategy("pcl") == Strategy::posterior_continual);
  CHECK_THROWS_AS(parse_strategy("bogus"), ConfigError);
  for (auto s : {Strategy::transfer_learning, Strategy::retrain, Strategy::posterior_continual}) {
    CHECK(parse_strategy(to_string(s)) == s);
  }
  CHECK(parse_init_mode("prior_mean") == InitMode::prior_mean);
  CHECK(parse_aggregation_weights("data_proportional") == AggregationWeights::data_proportional);
}
