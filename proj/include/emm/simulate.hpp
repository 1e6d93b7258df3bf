#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "emm/design.hpp"
#include "emm/glmm.hpp"

namespace emm {

struct SimulationSpec {
  int n_groups = 40;
  int n_per_group = 200;
  Eigen::VectorXd beta;   // beta(0) is the intercept
  double sigma_u = 1.0;
  double theta = 1.5;
  bool add_dummy = false; // appends a Bernoulli(0.5) column
  std::uint64_t seed = 1;
};

struct Simulated {
  DesignMatrix design;       // intercept + standard normal covariates
  Eigen::VectorXd true_u;    // the drawn random intercepts
};

// y ~ NB2(exp(x'beta + u_j), theta), u_j ~ N(0, sigma_u^2). The intercepts
// are drawn sequentially from the dedicated substream derive_seed(seed,
// 0x5EED); each group's covariates and counts come from derive_seed(seed, j),
// so output is independent of scheduling.
Simulated simulate(const SimulationSpec& spec);

// The simulated dataset as a staging table (columns y, group, x1..xp, d1)
// so the regular fit pipeline can run on it unchanged.
Table simulated_to_table(const Simulated& sim);
ModelSpec simulated_model_spec(const SimulationSpec& spec,
                               const std::string& label = "simulated");

// Independent oracle for group_marginal_loglik: trapezoid integration of the
// exact integrand over u in [-half_width*sigma_u, +half_width*sigma_u] in
// log-sum-exp form. sigma_u = 0 returns the conditional log-likelihood.
double brute_marginal_loglik(const Eigen::VectorXd& y_g,
                             const Eigen::MatrixXd& X_g,
                             const Eigen::VectorXd& beta, double sigma_u2,
                             double theta, int n_nodes = 20001,
                             double half_width = 10.0);

struct RecoveryRow {
  std::string name;
  double truth = 0.0;
  double estimate = 0.0;
  double se = 0.0;
  double z = 0.0;       // (estimate - truth) / se
  bool pass = false;    // |z| <= 3
};

struct RecoveryReport {
  std::vector<RecoveryRow> rows;
  bool all_pass = false;
};

RecoveryReport recovery_report(const SimulationSpec& spec,
                               const FittedGlmm& fit);

std::string render_recovery_text(const RecoveryReport& report);

}  // namespace emm
