#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numeric>

#include "bfl/errors.hpp"
#include "bfl/likelihood.hpp"
#include "bfl/sgld.hpp"
#include "oracles.hpp"

using namespace bfl;

namespace {

LabeledBatch separable_set() {
  // Two linearly separable clusters for a 2-class logistic regression.
  LabeledBatch b;
  const double pts[][2] = {{2.0, 1.0}, {1.5, 2.0}, {2.5, 0.5}, {-2.0, -1.0}, {-1.0, -2.5}, {-2.2, 0.3}};
  for (int i = 0; i < 6; ++i) {
    b.features.push_row(pts[i]);
    b.labels.push_back(i < 3 ? 0 : 1);
  }
  return b;
}

}  // namespace

TEST_CASE("sgld_step arithmetic") {
  CHECK(sgld_step(std::vector<double>{1.0, -2.0}, std::vector<double>{0.0, 0.0}, 0.1,
                  std::vector<double>{0.0, 0.0}) == std::vector<double>{1.0, -2.0});
  const auto next = sgld_step(std::vector<double>{1.0}, std::vector<double>{2.0}, 0.1,
                              std::vector<double>{0.5});
  CHECK(next[0] == doctest::Approx(1.023607).epsilon(1e-6));
  CHECK(next[0] == doctest::Approx(1.0 - 0.2 + std::sqrt(0.2) * 0.5).epsilon(1e-15));

  // Zero noise reduces to gradient descent.
  const auto gd = sgld_step(std::vector<double>{0.5, 0.25}, std::vector<double>{3.0, -1.0}, 0.01,
                            std::vector<double>{0.0, 0.0});
  CHECK(gd == std::vector<double>{0.5 - 0.03, 0.25 + 0.01});
}

TEST_CASE("sgld_step errors") {
  CHECK_THROWS_AS((void)sgld_step(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}, 0.1,
                                  std::vector<double>{0.0}),
                  ShapeError);
  try {
    (void)sgld_step(std::vector<double>{1.0}, std::vector<double>{NAN}, 0.1,
                    std::vector<double>{0.0}, 17);
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    CHECK(e.iteration() == 17);
  }
}

TEST_CASE("doubling eta scales the injected noise by sqrt(2)") {
  RngStream rng(5);
  const auto xi = draw_noise(50, rng);
  const std::vector<double> theta(50, 0.3);
  const std::vector<double> zero(50, 0.0);
  const auto a = sgld_step(theta, zero, 1e-3, xi);
  const auto b = sgld_step(theta, zero, 2e-3, xi);
  for (std::size_t j = 0; j < 50; ++j) {
    if (xi[j] == 0.0) continue;
    CHECK((b[j] - theta[j]) / (a[j] - theta[j]) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  }
}

TEST_CASE("local_gradient with the whole shard as one batch") {
  const ModelSpec spec{{2, 3, 2}};
  const MlpLikelihood model(spec);
  RngStream rng(9);
  const auto shard = bfl::testing::random_batch(spec, 6, rng);
  const auto theta = bfl::testing::random_params(param_count(spec), rng, 0.5);
  const GaussianDiagPrior prior(std::vector<double>(theta.size(), 0.1),
                                std::vector<double>(theta.size(), 2.0));
  SgldConfig cfg;
  cfg.batch_size = 6;
  cfg.num_nodes = 4;
  RngStream stream(1);
  const auto g = local_gradient(model, theta, shard, prior, cfg, stream);
  const auto nll = nll_grad(spec, theta, shard);
  const auto lp = log_prior_grad(prior, theta);
  for (std::size_t j = 0; j < g.size(); ++j) {
    CHECK(g[j] == doctest::Approx(nll[j] - 0.25 * lp[j]).epsilon(1e-14));
  }
}

TEST_CASE("local_gradient prior term vanishes at the mode of a standard prior") {
  const ModelSpec spec{{2, 2}};
  const MlpLikelihood model(spec);
  RngStream rng(2);
  const auto shard = bfl::testing::random_batch(spec, 5, rng);
  const std::vector<double> theta(param_count(spec), 0.0);
  SgldConfig cfg;
  cfg.batch_size = 5;
  RngStream stream(3);
  CHECK(local_gradient(model, theta, shard, standard_prior(theta.size()), cfg, stream) ==
        nll_grad(spec, theta, shard));
}

TEST_CASE("local_gradient is reproducible under a fixed stream") {
  const ModelSpec spec{{2, 4, 3}};
  const MlpLikelihood model(spec);
  RngStream rng(12);
  const auto shard = bfl::testing::random_batch(spec, 20, rng);
  const auto theta = bfl::testing::random_params(param_count(spec), rng, 0.5);
  SgldConfig cfg;
  cfg.num_batches = 2;
  cfg.batch_size = 7;
  RngStream s1(42), s2(42);
  const auto g1 = local_gradient(model, theta, shard, standard_prior(theta.size()), cfg, s1);
  const auto g2 = local_gradient(model, theta, shard, standard_prior(theta.size()), cfg, s2);
  CHECK(g1 == g2);
  CHECK(std::memcmp(g1.data(), g2.data(), g1.size() * sizeof(double)) == 0);
}

TEST_CASE("local_gradient errors") {
  const ModelSpec spec{{2, 2}};
  const MlpLikelihood model(spec);
  const std::vector<double> theta(param_count(spec), 0.0);
  SgldConfig cfg;
  RngStream rng(1);
  CHECK_THROWS_AS((void)local_gradient(model, theta, LabeledBatch{}, standard_prior(6), cfg, rng),
                  ShapeError);
  RngStream data_rng(2);
  const auto shard = bfl::testing::random_batch(spec, 4, data_rng);
  cfg.batch_size = 5;
  CHECK_THROWS_AS((void)local_gradient(model, theta, shard, standard_prior(6), cfg, rng),
                  ConfigError);
}

TEST_CASE("SgldConfig validation") {
  SgldConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.burn_in = 99;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);  // only one retained sample
  cfg = SgldConfig{};
  cfg.eta = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = SgldConfig{};
  cfg.burn_in = cfg.total_iters;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("run_chain keeps iterates T_b+1..T") {
  const ModelSpec spec{{2, 3, 2}};
  const MlpLikelihood model(spec);
  RngStream data_rng(4);
  const auto data = bfl::testing::random_batch(spec, 10, data_rng);
  const auto init = bfl::testing::random_params(param_count(spec), data_rng, 0.5);
  const auto prior = standard_prior(init.size());
  SgldConfig cfg;
  cfg.eta = 1e-2;
  cfg.total_iters = 3;
  cfg.burn_in = 1;
  cfg.batch_size = 4;

  RngStream rng(8);
  const auto samples = run_chain(model, init, data, prior, cfg, rng);
  REQUIRE(samples.num_samples() == 2);
  CHECK(samples.total_iters == 3);
  CHECK(samples.burn_in == 1);

  RngStream manual(8);
  std::vector<std::vector<double>> iterates;
  std::vector<double> theta = init;
  for (int k = 1; k <= 3; ++k) {
    const auto g = local_gradient(model, theta, data, prior, cfg, manual);
    const auto xi = draw_noise(theta.size(), manual);
    theta = sgld_step(theta, g, cfg.eta, xi);
    iterates.push_back(theta);
  }
  for (std::size_t j = 0; j < init.size(); ++j) {
    CHECK(samples.samples(0, j) == iterates[1][j]);
    CHECK(samples.samples(1, j) == iterates[2][j]);
  }
}

TEST_CASE("retained row count equals T - T_b") {
  const ModelSpec spec{{1, 2}};
  const MlpLikelihood model(spec);
  RngStream data_rng(1);
  const auto data = bfl::testing::random_batch(spec, 3, data_rng);
  const std::vector<double> init(param_count(spec), 0.0);
  for (std::size_t t : {2, 5, 17}) {
    for (std::size_t b = 0; b + 2 <= t; ++b) {
      SgldConfig cfg;
      cfg.total_iters = t;
      cfg.burn_in = b;
      RngStream rng(t * 100 + b);
      CHECK(run_chain(model, init, data, standard_prior(init.size()), cfg, rng).num_samples() == t - b);
    }
  }
}

TEST_CASE("noise-free full-batch chain descends the convex local loss") {
  const ModelSpec spec{{2, 2}};  // multinomial logistic regression
  const MlpLikelihood model(spec);
  const auto data = separable_set();
  const auto prior = standard_prior(param_count(spec));
  SgldConfig cfg;
  cfg.eta = 1e-2;
  cfg.total_iters = 200;
  cfg.burn_in = 0;
  cfg.batch_size = data.size();
  cfg.num_nodes = 2;
  cfg.inject_noise = false;

  const std::vector<double> init{0.8, -0.4, -0.3, 0.9, 0.5, -0.5};
  RngStream r1(1), r2(2);
  const auto a = run_chain(model, init, data, prior, cfg, r1);
  const auto b = run_chain(model, init, data, prior, cfg, r2);
  CHECK(a.samples == b.samples);  // no randomness consumed

  auto objective = [&](std::span<const double> theta) {
    return nll_loss(spec, theta, data) - 0.5 * log_prior(prior, theta);
  };
  double prev = objective(init);
  for (std::size_t k = 0; k < a.num_samples(); ++k) {
    const double cur = objective(a.samples.row(k));
    CHECK(cur <= prev + 1e-12);
    prev = cur;
  }
}

TEST_CASE("run_chain on a conjugate Gaussian tracks the analytic posterior") {
  const bfl::testing::GaussianMeanLikelihood model;
  RngStream data_rng(314);
  LabeledBatch data;
  double sum = 0.0;
  for (int i = 0; i < 20; ++i) {
    const double y = 1.5 + data_rng.normal();
    sum += y;
    data.features.push_row(std::vector<double>{y});
    data.labels.push_back(0);
  }
  const double post_var = 1.0 / 21.0;
  const double post_mean = sum / 21.0;
  SgldConfig cfg;
  cfg.eta = 1e-3;
  cfg.total_iters = 8000;
  cfg.burn_in = 2000;
  cfg.batch_size = 20;
  RngStream rng(1);
  const auto s = run_chain(model, std::vector<double>{0.0}, data, standard_prior(1), cfg, rng);
  double m = 0.0;
  for (std::size_t i = 0; i < s.num_samples(); ++i) m += s.samples(i, 0);
  m /= static_cast<double>(s.num_samples());
  CHECK(std::abs(m - post_mean) < 0.1);
  const auto fit = fit_from_samples(s);
  CHECK(fit.variance()[0] == doctest::Approx(post_var).epsilon(0.6));
}
