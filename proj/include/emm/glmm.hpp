#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "emm/design.hpp"
#include "emm/error.hpp"
#include "emm/parallel.hpp"

namespace emm {

struct GlmmParams {
  Eigen::VectorXd beta;   // fixed effects, log scale
  double sigma_u2 = 0.0;  // level-2 variance
  double theta = 1.0;     // NB2 dispersion
};

// ln integral of the conditional NB likelihood against N(0, sigma_u2),
// by mode-centered, curvature-scaled Gauss-Hermite quadrature (log-sum-exp
// throughout). sigma_u2 = 0 collapses to the conditional log-likelihood.
double group_marginal_loglik(const Eigen::VectorXd& y_g,
                             const Eigen::MatrixXd& X_g,
                             const GlmmParams& params, int quad_order,
                             double* mode_out = nullptr);

double total_loglik(const DesignMatrix& design, const GlmmParams& params,
                    int quad_order = 15,
                    Execution exec = Execution::parallel);

struct LoglikGradient {
  double value = 0.0;
  Eigen::VectorXd grad_beta;
  double grad_sigma_u2 = 0.0;  // NaN when sigma_u2 = 0 (boundary)
  double grad_theta = 0.0;
};

// Analytic gradient of the quadrature approximation itself, differentiating
// through the adaptive center and scale, so it matches central differences of
// total_loglik to quadrature accuracy.
LoglikGradient total_loglik_grad(const DesignMatrix& design,
                                 const GlmmParams& params, int quad_order = 15,
                                 Execution exec = Execution::parallel);

struct IterationTrace {
  int iteration = 0;
  double loglik = 0.0;
  double grad_norm = 0.0;
  double step_norm = 0.0;
};

struct GlmmOptions {
  int quad_order = 15;
  int max_iter = 200;
  double tol = 1e-7;            // gradient max-norm and relative change
  bool fix_sigma_u_zero = false;  // single-level NB fit
  double theta_cap = 1e8;
  Execution exec = Execution::parallel;
};

struct FittedGlmm {
  Eigen::VectorXd beta;
  double sigma_u2 = 0.0;
  double theta = 1.0;
  double loglik = 0.0;
  int n_params = 0;  // p + 2 (p + 1 when sigma_u is fixed at zero)

  Eigen::MatrixXd cov_beta;
  Eigen::VectorXd se_beta;
  double se_sigma_u2 = 0.0;  // delta method from the ln-scale Hessian
  double se_theta = 0.0;
  Eigen::VectorXd re_modes;  // empirical-Bayes intercept modes per group

  bool converged = false;
  bool ses_reliable = true;
  bool sigma_boundary = false;  // sigma_u below 1e-6: effectively single level
  bool theta_boundary = false;  // theta at the cap
  int iterations = 0;
  std::vector<IterationTrace> trace;
  int quad_order = 15;

  std::vector<std::string> column_names;
  std::vector<std::string> group_labels;
};

class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, std::vector<IterationTrace> trace)
      : Error(what), trace(std::move(trace)) {}
  std::vector<IterationTrace> trace;
};

// Maximum likelihood over (beta, ln sigma_u, ln theta) by BFGS with analytic
// gradients; starts from a Poisson IRLS fit, sigma_u = 0.5, theta = 1.
// Standard errors from the observed information (central differences of the
// analytic gradient at the optimum).
FittedGlmm fit(const DesignMatrix& design, const GlmmOptions& options = {});

// exp(x'beta), plus the group's intercept mode when group is given.
double predict_mu(const FittedGlmm& fit, const Eigen::VectorXd& x,
                  std::optional<int> group = std::nullopt);

void save_glmm_json(std::ostream& out, const FittedGlmm& fit);
FittedGlmm load_glmm_json(std::istream& in);

}  // namespace emm
