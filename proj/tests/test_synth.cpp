#include <doctest.h>

#include <cmath>

#include "emm/glmm.hpp"
#include "emm/nb.hpp"
#include "emm/rng.hpp"
#include "emm/simulate.hpp"

using namespace emm;

TEST_CASE("simulate is deterministic per seed") {
  SimulationSpec spec;
  spec.n_groups = 6;
  spec.n_per_group = 40;
  spec.beta = Eigen::Vector2d(0.5, 0.3);
  spec.sigma_u = 0.8;
  spec.theta = 2.0;
  spec.seed = 17;
  const Simulated a = simulate(spec);
  const Simulated b = simulate(spec);
  CHECK(a.design.y == b.design.y);
  CHECK(a.design.X == b.design.X);
  CHECK(a.true_u == b.true_u);

  spec.seed = 18;
  const Simulated c = simulate(spec);
  CHECK(a.design.y != c.design.y);
}

TEST_CASE("simulate moments follow the generative model") {
  SUBCASE("sigma_u = 0, huge theta, beta = (0): Poisson(1) mean") {
    SimulationSpec spec;
    spec.n_groups = 100;
    spec.n_per_group = 1000;
    spec.beta = Eigen::VectorXd::Zero(1);
    spec.sigma_u = 0.0;
    spec.theta = 1e8;
    spec.seed = 5;
    const Simulated sim = simulate(spec);
    CHECK(sim.design.y.mean() > 0.98);
    CHECK(sim.design.y.mean() < 1.02);
  }

  SUBCASE("sigma_u = 1: E[y] = exp(1/2) within 3%") {
    SimulationSpec spec;
    spec.n_groups = 8000;
    spec.n_per_group = 15;
    spec.beta = Eigen::VectorXd::Zero(1);
    spec.sigma_u = 1.0;
    spec.theta = 5.0;
    spec.seed = 9;
    const Simulated sim = simulate(spec);
    const double target = std::exp(0.5);
    CHECK(std::abs(sim.design.y.mean() - target) < 0.03 * target);
  }

  SUBCASE("dispersion: Var/E approaches 1 + mu/theta") {
    SimulationSpec spec;
    spec.n_groups = 50;
    spec.n_per_group = 4000;
    spec.beta = Eigen::VectorXd::Constant(1, std::log(2.0));
    spec.sigma_u = 0.0;
    spec.theta = 1.5;
    spec.seed = 21;
    const Simulated sim = simulate(spec);
    const double mean = sim.design.y.mean();
    const double var = (sim.design.y.array() - mean).square().mean();
    const double expected = 1.0 + 2.0 / 1.5;  // 1 + mu/theta at mu = 2
    CHECK(std::abs(var / mean - expected) < 0.05 * expected);
  }
}

TEST_CASE("brute_marginal_loglik properties") {
  Eigen::VectorXd y(4);
  y << 0, 1, 3, 7;
  Eigen::MatrixXd x(4, 2);
  x << 1, 0.2, 1, -0.5, 1, 1.1, 1, 0.0;
  Eigen::VectorXd beta(2);
  beta << 0.4, 0.3;

  SUBCASE("sigma_u = 0 returns the conditional log-likelihood exactly") {
    double expected = 0.0;
    for (int i = 0; i < 4; ++i)
      expected += nb_log_pmf(y(i), std::exp(x.row(i).dot(beta)), 1.2);
    CHECK(brute_marginal_loglik(y, x, beta, 0.0, 1.2) ==
          doctest::Approx(expected).epsilon(1e-14));
  }

  SUBCASE("doubling the node count changes the value below 1e-10") {
    const double a = brute_marginal_loglik(y, x, beta, 0.9, 1.2, 20001, 10.0);
    const double b = brute_marginal_loglik(y, x, beta, 0.9, 1.2, 40001, 10.0);
    CHECK(std::abs(a - b) < 1e-10);
  }

  SUBCASE("agrees with adaptive GHQ order 25 on random small instances") {
    Rng rng(123);
    for (int trial = 0; trial < 5; ++trial) {
      const int n = 1 + static_cast<int>(rng.uniform_index(5));
      Eigen::VectorXd yy(n);
      Eigen::MatrixXd xx = Eigen::MatrixXd::Ones(n, 1);
      GlmmParams params;
      params.beta = Eigen::VectorXd::Constant(1, rng.normal() * 0.5);
      params.sigma_u2 = std::pow(0.3 + rng.uniform() * 1.5, 2);
      params.theta = 0.5 + rng.uniform() * 3.0;
      Rng data_rng(derive_seed(123, static_cast<std::uint64_t>(trial)));
      for (int i = 0; i < n; ++i)
        yy(i) = static_cast<double>(data_rng.negative_binomial(
            std::exp(params.beta(0)), params.theta));
      const double ghq = group_marginal_loglik(yy, xx, params, 25);
      const double brute = brute_marginal_loglik(
          yy, xx, params.beta, params.sigma_u2, params.theta, 20001, 10.0);
      CHECK(std::abs(ghq - brute) <= 1e-6 * std::abs(brute));
    }
  }

  SUBCASE("preconditions enforced") {
    CHECK_THROWS_AS(brute_marginal_loglik(y, x, beta, 0.5, 1.0, 500, 10.0),
                    Error);
    CHECK_THROWS_AS(brute_marginal_loglik(y, x, beta, 0.5, 1.0, 20001, 4.0),
                    Error);
  }
}

TEST_CASE("recovery_report flags deviations past three SEs") {
  SimulationSpec spec;
  spec.n_groups = 2;
  spec.n_per_group = 2;
  spec.beta = Eigen::Vector2d(1.0, 0.5);
  spec.sigma_u = 1.0;
  spec.theta = 1.5;

  FittedGlmm fit;
  fit.converged = true;
  fit.beta = spec.beta;
  fit.sigma_u2 = 1.0;
  fit.theta = 1.5;
  fit.se_beta = Eigen::Vector2d(0.1, 0.1);
  fit.se_sigma_u2 = 0.2;
  fit.se_theta = 0.2;
  fit.column_names = {"(intercept)", "x1"};

  SUBCASE("truth equals estimate: all z = 0, pass") {
    const RecoveryReport report = recovery_report(spec, fit);
    CHECK(report.all_pass);
    for (const auto& row : report.rows) {
      CHECK(row.z == doctest::Approx(0.0));
      CHECK(row.pass);
    }
  }

  SUBCASE("a 3.5-SE deviation fails") {
    fit.beta(1) = spec.beta(1) + 3.5 * fit.se_beta(1);
    const RecoveryReport report = recovery_report(spec, fit);
    CHECK_FALSE(report.all_pass);
    CHECK(report.rows[1].z == doctest::Approx(3.5));
    CHECK_FALSE(report.rows[1].pass);
    CHECK(report.rows[0].pass);
  }
}

TEST_CASE("simulated table and model spec rebuild the same design") {
  SimulationSpec spec;
  spec.n_groups = 3;
  spec.n_per_group = 10;
  spec.beta = Eigen::Vector3d(0.5, 0.4, -0.2);
  spec.sigma_u = 0.5;
  spec.theta = 2.0;
  spec.seed = 77;
  const Simulated sim = simulate(spec);
  const Table table = simulated_to_table(sim);
  const DesignMatrix rebuilt = encode(table, simulated_model_spec(spec));
  CHECK(rebuilt.X == sim.design.X);
  CHECK(rebuilt.y == sim.design.y);
  CHECK(rebuilt.group == sim.design.group);
}
