#include "emm/glmm.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <json.hpp>
#include <limits>
#include <ostream>

#include "emm/nb.hpp"
#include "emm/quadrature.hpp"
#include "emm/special.hpp"

namespace emm {

namespace {

constexpr double kExpClamp = 690.0;

double safe_exp(double x) { return std::exp(std::min(x, kExpClamp)); }

struct GroupBlock {
  Eigen::VectorXd y;
  Eigen::MatrixXd X;
  Eigen::VectorXd lgamma_y1;  // lgamma(y + 1), fixed across evaluations
};

std::vector<GroupBlock> build_groups(const DesignMatrix& design) {
  std::vector<std::vector<int>> rows(static_cast<std::size_t>(design.n_groups));
  for (std::size_t i = 0; i < design.group.size(); ++i)
    rows[static_cast<std::size_t>(design.group[i])].push_back(
        static_cast<int>(i));
  std::vector<GroupBlock> blocks(rows.size());
  for (std::size_t g = 0; g < rows.size(); ++g) {
    const auto& idx = rows[g];
    GroupBlock& b = blocks[g];
    b.y.resize(static_cast<Eigen::Index>(idx.size()));
    b.X.resize(static_cast<Eigen::Index>(idx.size()), design.X.cols());
    b.lgamma_y1.resize(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      b.y(static_cast<Eigen::Index>(i)) = design.y(idx[i]);
      b.X.row(static_cast<Eigen::Index>(i)) = design.X.row(idx[i]);
      b.lgamma_y1(static_cast<Eigen::Index>(i)) =
          std::lgamma(design.y(idx[i]) + 1.0);
    }
  }
  return blocks;
}

// Joint log density pieces for one group at random intercept u, with the
// u-independent constants split off (mode search only needs differences).
struct GroupEval {
  const Eigen::VectorXd& y;
  const Eigen::VectorXd& eta;
  double sigma_u2;
  double theta;

  double h_core(double u) const {
    const double th = theta;
    double s = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const double mu = safe_exp(eta(i) + u);
      s += -th * std::log1p(mu / th) + y(i) * (eta(i) + u) -
           y(i) * std::log(th + mu);
    }
    return s - u * u / (2.0 * sigma_u2);
  }

  void h12(double u, double& h1, double& h2) const {
    const double th = theta;
    h1 = 0.0;
    h2 = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const double mu = safe_exp(eta(i) + u);
      const double denom = th + mu;
      const double r = mu / denom;
      h1 += th * (y(i) - mu) / denom;
      h2 -= th * (th + y(i)) * r / denom;
    }
    h1 -= u / sigma_u2;
    h2 -= 1.0 / sigma_u2;
  }
};

struct ModeResult {
  double mode = 0.0;
  double tau = 0.0;  // -h''(mode) > 0
};

// h' is strictly decreasing (h concave, and the prior contributes -1/s2 to
// h'' everywhere), so the mode is the unique root of h': bracket it, then
// run Newton with a bisection safeguard. Converges unconditionally.
ModeResult find_mode(const GroupEval& ev, int group_id) {
  double u = 0.0;
  double h1, h2;
  ev.h12(u, h1, h2);
  if (h1 == 0.0) return {u, -h2};

  double lo, hi;  // h'(lo) > 0 > h'(hi)
  {
    const double direction = h1 > 0.0 ? 1.0 : -1.0;
    double width = 1.0;
    double probe = direction * width;
    double p1, p2;
    ev.h12(probe, p1, p2);
    int guard = 0;
    while ((h1 > 0.0) == (p1 > 0.0) && p1 != 0.0) {
      if (++guard > 100)
        throw Error("conditional mode bracket failed for group " +
                    std::to_string(group_id));
      width *= 2.0;
      probe = direction * width;
      ev.h12(probe, p1, p2);
    }
    lo = std::min(0.0, probe);
    hi = std::max(0.0, probe);
  }

  for (int iter = 0; iter < 300; ++iter) {
    double u_new = u - h1 / h2;
    if (!(u_new > lo && u_new < hi)) u_new = 0.5 * (lo + hi);
    const double delta = std::abs(u_new - u);
    u = u_new;
    ev.h12(u, h1, h2);
    if (h1 > 0.0)
      lo = u;
    else
      hi = u;
    if (delta <= 1e-13 * (1.0 + std::abs(u)) ||
        hi - lo <= 1e-13 * (1.0 + std::abs(u)))
      return {u, -h2};
  }
  throw Error("conditional mode search did not converge for group " +
              std::to_string(group_id));
}

double logsumexp(const Eigen::VectorXd& a) {
  const double m = a.maxCoeff();
  return m + std::log((a.array() - m).exp().sum());
}

// ln L_g with adaptive GHQ; u-independent constants restored here.
double marginal_value(const GroupBlock& block, const Eigen::VectorXd& eta,
                      const GlmmParams& params, const GaussHermiteRule& rule,
                      int group_id, double* mode_out) {
  const double th = params.theta;
  double const0 = -block.y.size() * std::lgamma(th);
  for (Eigen::Index i = 0; i < block.y.size(); ++i)
    const0 += std::lgamma(block.y(i) + th) - block.lgamma_y1(i);

  if (params.sigma_u2 == 0.0) {
    if (mode_out) *mode_out = 0.0;
    double s = const0;
    for (Eigen::Index i = 0; i < block.y.size(); ++i) {
      const double mu = safe_exp(eta(i));
      s += -th * std::log1p(mu / th) + block.y(i) * (eta(i)) -
           block.y(i) * std::log(th + mu);
    }
    return s;
  }

  const GroupEval ev{block.y, eta, params.sigma_u2, th};
  const ModeResult mode = find_mode(ev, group_id);
  if (mode_out) *mode_out = mode.mode;
  const0 -= 0.5 * std::log(2.0 * M_PI * params.sigma_u2);

  const double scale = std::sqrt(2.0 / mode.tau);
  Eigen::VectorXd a(rule.order());
  for (int k = 0; k < rule.order(); ++k) {
    const double z = rule.nodes(k);
    a(k) = std::log(rule.weights(k)) + z * z + ev.h_core(mode.mode + scale * z);
  }
  return const0 + 0.5 * std::log(2.0 / mode.tau) + logsumexp(a);
}

// Value and gradient w.r.t. (beta, sigma_u2, theta), differentiating through
// the adaptive center/scale via the implicit function theorem.
double marginal_grad(const GroupBlock& block, const Eigen::VectorXd& eta,
                     const GlmmParams& params, const GaussHermiteRule& rule,
                     int group_id, Eigen::VectorXd& grad_beta,
                     double& grad_sigma, double& grad_theta) {
  const double th = params.theta;
  const double s2 = params.sigma_u2;
  const Eigen::Index n = block.y.size();
  const Eigen::Index p = block.X.cols();
  grad_beta.setZero(p);
  grad_sigma = 0.0;
  grad_theta = 0.0;

  // digamma(y + theta) - digamma(theta), node independent.
  Eigen::VectorXd dg(n);
  const double dg_th = digamma(th);
  for (Eigen::Index i = 0; i < n; ++i) dg(i) = digamma(block.y(i) + th) - dg_th;

  if (s2 == 0.0) {
    double value = -n * std::lgamma(th);
    Eigen::VectorXd g1v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double y = block.y(i);
      const double mu = safe_exp(eta(i));
      const double denom = th + mu;
      value += std::lgamma(y + th) - block.lgamma_y1(i) -
               th * std::log1p(mu / th) + y * eta(i) - y * std::log(denom);
      g1v(i) = th * (y - mu) / denom;
      grad_theta += dg(i) + std::log(th / denom) + (mu - y) / denom;
    }
    grad_beta = block.X.transpose() * g1v;
    grad_sigma = std::numeric_limits<double>::quiet_NaN();
    return value;
  }

  const GroupEval ev{block.y, eta, s2, th};
  const ModeResult mode = find_mode(ev, group_id);
  const double tau = mode.tau;
  const double m = mode.mode;

  // Partials of h', h'' at the mode (holding u fixed), plus h'''.
  Eigen::VectorXd g2v(n), g3v(n);
  double a1_s = m / (s2 * s2);
  double a1_t = 0.0;
  double a2_s = 1.0 / (s2 * s2);
  double a2_t = 0.0;
  double h3 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double y = block.y(i);
    const double mu = safe_exp(eta(i) + m);
    const double denom = th + mu;
    const double r = mu / denom;
    g2v(i) = -th * (th + y) * r / denom;
    g3v(i) = -th * (th + y) * r * ((th - mu) / denom) / denom;
    a1_t += ((y - mu) / denom) * r;
    a2_t -= r * (2.0 * th * r - th * y / denom + y * r) / denom;
    h3 += g3v(i);
  }
  const Eigen::VectorXd a1_b = block.X.transpose() * g2v;
  const Eigen::VectorXd a2_b = block.X.transpose() * g3v;

  const Eigen::VectorXd dm_b = a1_b / tau;
  const double dm_s = a1_s / tau;
  const double dm_t = a1_t / tau;
  const Eigen::VectorXd dtau_b = -(h3 * dm_b + a2_b);
  const double dtau_s = -(h3 * dm_s + a2_s);
  const double dtau_t = -(h3 * dm_t + a2_t);

  // Node sweep; mu cached for the weighted second pass.
  const int order = rule.order();
  const double scale = std::sqrt(2.0 / tau);
  Eigen::MatrixXd mu_nodes(order, n);
  Eigen::VectorXd a(order), h1_node(order), s_theta(order), s_sigma(order),
      u_node(order);
  for (int k = 0; k < order; ++k) {
    const double z = rule.nodes(k);
    const double u = m + scale * z;
    u_node(k) = u;
    double h_core = -u * u / (2.0 * s2);
    double h1 = -u / s2;
    double st = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double y = block.y(i);
      const double mu = safe_exp(eta(i) + u);
      mu_nodes(k, i) = mu;
      const double denom = th + mu;
      h_core += -th * std::log1p(mu / th) + y * (eta(i) + u) -
                y * std::log(denom);
      h1 += th * (y - mu) / denom;
      st += dg(i) + std::log(th / denom) + (mu - y) / denom;
    }
    a(k) = std::log(rule.weights(k)) + z * z + h_core;
    h1_node(k) = h1;
    s_theta(k) = st;
    s_sigma(k) = u * u / (2.0 * s2 * s2) - 1.0 / (2.0 * s2);
  }

  const double lse = logsumexp(a);
  Eigen::VectorXd omega = (a.array() - lse).exp();

  double const0 = -n * std::lgamma(th) - 0.5 * std::log(2.0 * M_PI * s2);
  for (Eigen::Index i = 0; i < n; ++i)
    const0 += std::lgamma(block.y(i) + th) - block.lgamma_y1(i);
  const double value = const0 + 0.5 * std::log(2.0 / tau) + lse;

  // du_k/dpi = dm/dpi - (z_k/sqrt(2)) tau^{-3/2} dtau/dpi.
  double s1 = 0.0;  // sum omega_k h1_k
  double s2w = 0.0; // sum omega_k h1_k c_k
  const double tau_pow = std::pow(tau, -1.5);
  Eigen::VectorXd g1_mix = Eigen::VectorXd::Zero(n);
  double mix_theta = 0.0, mix_sigma = 0.0;
  for (int k = 0; k < order; ++k) {
    const double w = omega(k);
    const double c_k = rule.nodes(k) / std::sqrt(2.0) * tau_pow;
    s1 += w * h1_node(k);
    s2w += w * h1_node(k) * c_k;
    mix_theta += w * s_theta(k);
    mix_sigma += w * s_sigma(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double mu = mu_nodes(k, i);
      g1_mix(i) += w * th * (block.y(i) - mu) / (th + mu);
    }
  }

  grad_beta = block.X.transpose() * g1_mix + s1 * dm_b -
              (s2w + 0.5 / tau) * dtau_b;
  grad_sigma = mix_sigma + s1 * dm_s - (s2w + 0.5 / tau) * dtau_s;
  grad_theta = mix_theta + s1 * dm_t - (s2w + 0.5 / tau) * dtau_t;
  return value;
}

}  // namespace

namespace {

void validate_params(const GlmmParams& params, Eigen::Index p) {
  if (params.beta.size() != p)
    throw Error("glmm: beta length does not match the design");
  if (!(params.sigma_u2 >= 0.0)) throw Error("glmm: sigma_u2 must be >= 0");
  if (!(params.theta > 0.0)) throw Error("glmm: theta must be positive");
}

}  // namespace

double group_marginal_loglik(const Eigen::VectorXd& y_g,
                             const Eigen::MatrixXd& X_g,
                             const GlmmParams& params, int quad_order,
                             double* mode_out) {
  if (quad_order < 1) throw Error("group_marginal_loglik: quad_order >= 1");
  if (y_g.size() != X_g.rows())
    throw Error("group_marginal_loglik: y/X size mismatch");
  validate_params(params, X_g.cols());
  GroupBlock block;
  block.y = y_g;
  block.X = X_g;
  block.lgamma_y1.resize(y_g.size());
  for (Eigen::Index i = 0; i < y_g.size(); ++i)
    block.lgamma_y1(i) = std::lgamma(y_g(i) + 1.0);
  const Eigen::VectorXd eta = X_g * params.beta;
  const GaussHermiteRule rule = gauss_hermite(quad_order);
  return marginal_value(block, eta, params, rule, 0, mode_out);
}

namespace {

template <class PerGroup>
void parallel_groups(const std::vector<GroupBlock>& blocks, Execution exec,
                     PerGroup&& body) {
  const auto n = static_cast<std::int64_t>(blocks.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic) if (exec == Execution::parallel)
  for (std::int64_t g = 0; g < n; ++g) {
    try {
      body(static_cast<std::size_t>(g));
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

double total_loglik(const DesignMatrix& design, const GlmmParams& params,
                    int quad_order, Execution exec) {
  validate_params(params, design.X.cols());
  const auto blocks = build_groups(design);
  const GaussHermiteRule rule = gauss_hermite(quad_order);
  std::vector<double> values(blocks.size());
  parallel_groups(blocks, exec, [&](std::size_t g) {
    const Eigen::VectorXd eta = blocks[g].X * params.beta;
    values[g] = marginal_value(blocks[g], eta, params, rule,
                               static_cast<int>(g), nullptr);
  });
  double total = 0.0;
  for (double v : values) total += v;  // fixed order: bit-reproducible
  return total;
}

LoglikGradient total_loglik_grad(const DesignMatrix& design,
                                 const GlmmParams& params, int quad_order,
                                 Execution exec) {
  validate_params(params, design.X.cols());
  const auto blocks = build_groups(design);
  const GaussHermiteRule rule = gauss_hermite(quad_order);
  const Eigen::Index p = design.X.cols();
  std::vector<double> values(blocks.size());
  std::vector<Eigen::VectorXd> gb(blocks.size());
  std::vector<double> gs(blocks.size()), gt(blocks.size());
  parallel_groups(blocks, exec, [&](std::size_t g) {
    const Eigen::VectorXd eta = blocks[g].X * params.beta;
    values[g] = marginal_grad(blocks[g], eta, params, rule,
                              static_cast<int>(g), gb[g], gs[g], gt[g]);
  });
  LoglikGradient out;
  out.grad_beta = Eigen::VectorXd::Zero(p);
  for (std::size_t g = 0; g < blocks.size(); ++g) {
    out.value += values[g];
    out.grad_beta += gb[g];
    out.grad_sigma_u2 += gs[g];
    out.grad_theta += gt[g];
  }
  if (params.sigma_u2 == 0.0)
    out.grad_sigma_u2 = std::numeric_limits<double>::quiet_NaN();
  return out;
}

namespace {

Eigen::VectorXd poisson_irls_start(const DesignMatrix& design) {
  const Eigen::Index p = design.X.cols();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  const int icol = design.intercept_column();
  const double ymean = design.y.mean();
  if (icol >= 0) beta(icol) = std::log(std::max(ymean, 1e-2));
  for (int iter = 0; iter < 50; ++iter) {
    const Eigen::VectorXd eta =
        (design.X * beta).cwiseMax(-30.0).cwiseMin(30.0);
    const Eigen::VectorXd mu = eta.array().exp();
    const Eigen::VectorXd z =
        eta.array() + (design.y - mu).array() / mu.array();
    Eigen::MatrixXd a = design.X.transpose() * mu.asDiagonal() * design.X;
    a.diagonal().array() += 1e-10;
    const Eigen::VectorXd b =
        design.X.transpose() * (mu.array() * z.array()).matrix();
    const Eigen::VectorXd next = a.ldlt().solve(b);
    const double delta = (next - beta).cwiseAbs().maxCoeff();
    beta = next;
    if (delta < 1e-10) break;
  }
  return beta;
}

struct Packed {
  // phi = [beta, ln sigma_u, ln theta] (ln sigma_u omitted when fixed at 0).
  // sigma_u is floored at 1e-8: below that the marginal equals the
  // conditional to machine precision and the ln-sigma direction goes flat,
  // which would otherwise stall BFGS at the boundary.
  static constexpr double kSigmaFloor = 1e-8;
  bool fix_sigma;
  Eigen::Index p;
  double theta_cap;

  GlmmParams unpack(const Eigen::VectorXd& phi) const {
    GlmmParams params;
    params.beta = phi.head(p);
    if (fix_sigma) {
      params.sigma_u2 = 0.0;
      params.theta = std::min(safe_exp(phi(p)), theta_cap);
    } else {
      const double sigma_u = std::max(safe_exp(phi(p)), kSigmaFloor);
      params.sigma_u2 = sigma_u * sigma_u;
      params.theta = std::min(safe_exp(phi(p + 1)), theta_cap);
    }
    return params;
  }

  // Negative loglik and its gradient in phi coordinates; coordinates pinned
  // at their cap/floor report zero gradient.
  double eval(const DesignMatrix& design, const Eigen::VectorXd& phi,
              int quad_order, Execution exec, Eigen::VectorXd* grad) const {
    const GlmmParams params = unpack(phi);
    if (!grad) return -total_loglik(design, params, quad_order, exec);
    const LoglikGradient g =
        total_loglik_grad(design, params, quad_order, exec);
    grad->resize(phi.size());
    grad->head(p) = -g.grad_beta;
    if (fix_sigma) {
      (*grad)(p) = params.theta < theta_cap ? -g.grad_theta * params.theta : 0.0;
    } else {
      const bool at_floor = safe_exp(phi(p)) <= kSigmaFloor;
      (*grad)(p) = at_floor ? 0.0 : -g.grad_sigma_u2 * 2.0 * params.sigma_u2;
      (*grad)(p + 1) =
          params.theta < theta_cap ? -g.grad_theta * params.theta : 0.0;
    }
    return -g.value;
  }
};

}  // namespace

FittedGlmm fit(const DesignMatrix& design, const GlmmOptions& options) {
  const Eigen::Index n = design.n_rows();
  const Eigen::Index p = design.n_cols();
  const int extra = options.fix_sigma_u_zero ? 1 : 2;
  if (n <= p + extra)
    throw Error("fit: need more rows than parameters");

  const Packed packed{options.fix_sigma_u_zero, p, options.theta_cap};
  const Eigen::Index q = p + extra;

  Eigen::VectorXd phi(q);
  phi.head(p) = poisson_irls_start(design);
  if (options.fix_sigma_u_zero) {
    phi(p) = 0.0;  // ln theta
  } else {
    phi(p) = std::log(0.5);  // ln sigma_u
    phi(p + 1) = 0.0;        // ln theta
  }

  std::vector<IterationTrace> trace;
  Eigen::VectorXd grad(q), grad_new(q);
  double f = packed.eval(design, phi, options.quad_order, options.exec, &grad);

  Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(q, q);
  bool converged = false;
  int iterations = 0;
  bool scaled = false;

  for (int iter = 1; iter <= options.max_iter; ++iter) {
    iterations = iter;
    Eigen::VectorXd dir = -h_inv * grad;
    if (dir.dot(grad) >= 0.0) {
      h_inv.setIdentity();
      dir = -grad;
    }

    // Backtracking Armijo line search. Steps too small to change phi (or f)
    // in floating point count as failure, not acceptance.
    const double slope = grad.dot(dir);
    double alpha = 1.0;
    double f_new = f;
    Eigen::VectorXd phi_new = phi;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      if (alpha * dir.cwiseAbs().maxCoeff() <=
          1e-15 * (1.0 + phi.cwiseAbs().maxCoeff()))
        break;
      phi_new = phi + alpha * dir;
      f_new = packed.eval(design, phi_new, options.quad_order, options.exec,
                          nullptr);
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * alpha * slope &&
          f_new != f) {
        accepted = true;
        break;
      }
      if (std::isfinite(f_new) && f_new == f && (phi_new - phi).norm() == 0.0)
        break;
      alpha *= 0.5;
    }
    if (!accepted) {
      // No downhill step representable; treat as converged at fp resolution.
      converged = grad.cwiseAbs().maxCoeff() <=
                  std::sqrt(options.tol) * (1.0 + std::abs(f));
      break;
    }

    packed.eval(design, phi_new, options.quad_order, options.exec, &grad_new);
    const Eigen::VectorXd s = phi_new - phi;
    const Eigen::VectorXd yv = grad_new - grad;
    const double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      if (!scaled) {
        h_inv *= sy / yv.squaredNorm();
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd left =
          Eigen::MatrixXd::Identity(q, q) - rho * s * yv.transpose();
      h_inv = left * h_inv * left.transpose() + rho * s * s.transpose();
    }

    const double f_change = std::abs(f - f_new);
    phi = phi_new;
    f = f_new;
    grad = grad_new;

    trace.push_back({iter, -f, grad.cwiseAbs().maxCoeff(), s.norm()});
    if (grad.cwiseAbs().maxCoeff() <= options.tol * (1.0 + std::abs(f)) &&
        f_change <= options.tol * (1.0 + std::abs(f))) {
      converged = true;
      break;
    }
  }

  if (!converged)
    throw NonConvergence(
        "glmm fit did not converge in " + std::to_string(iterations) +
            " iterations (grad max-norm " +
            std::to_string(grad.cwiseAbs().maxCoeff()) + ")",
        trace);

  FittedGlmm out;
  const GlmmParams params = packed.unpack(phi);
  out.beta = params.beta;
  out.sigma_u2 = params.sigma_u2;
  out.theta = params.theta;
  out.loglik = -f;
  out.n_params = static_cast<int>(q);
  out.converged = converged;
  out.iterations = iterations;
  out.trace = std::move(trace);
  out.quad_order = options.quad_order;
  out.sigma_boundary =
      !options.fix_sigma_u_zero && std::sqrt(params.sigma_u2) < 1e-6;
  out.theta_boundary = params.theta >= options.theta_cap * (1.0 - 1e-12);
  for (const auto& c : design.columns) out.column_names.push_back(c.name);
  out.group_labels = design.group_labels;

  // Observed information via central differences of the analytic gradient.
  Eigen::MatrixXd hess(q, q);
  Eigen::VectorXd gp(q), gm(q);
  for (Eigen::Index j = 0; j < q; ++j) {
    const double h = 1e-4 * (1.0 + std::abs(phi(j)));
    Eigen::VectorXd phi_j = phi;
    phi_j(j) = phi(j) + h;
    packed.eval(design, phi_j, options.quad_order, options.exec, &gp);
    phi_j(j) = phi(j) - h;
    packed.eval(design, phi_j, options.quad_order, options.exec, &gm);
    hess.col(j) = (gp - gm) / (2.0 * h);
  }
  hess = 0.5 * (hess + hess.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hess);
  const double max_eig = es.eigenvalues().cwiseAbs().maxCoeff();
  Eigen::VectorXd inv_eig(q);
  out.ses_reliable = true;
  for (Eigen::Index i = 0; i < q; ++i) {
    const double lambda = es.eigenvalues()(i);
    if (lambda <= 1e-12 * max_eig) {
      out.ses_reliable = false;
      inv_eig(i) = 0.0;  // pseudo-inverse on the degenerate directions
    } else {
      inv_eig(i) = 1.0 / lambda;
    }
  }
  const Eigen::MatrixXd cov =
      es.eigenvectors() * inv_eig.asDiagonal() * es.eigenvectors().transpose();
  out.cov_beta = cov.topLeftCorner(p, p);
  out.se_beta = out.cov_beta.diagonal().cwiseMax(0.0).cwiseSqrt();
  if (options.fix_sigma_u_zero) {
    out.se_sigma_u2 = 0.0;
    out.se_theta = params.theta * std::sqrt(std::max(0.0, cov(p, p)));
  } else {
    out.se_sigma_u2 =
        2.0 * params.sigma_u2 * std::sqrt(std::max(0.0, cov(p, p)));
    out.se_theta =
        params.theta * std::sqrt(std::max(0.0, cov(p + 1, p + 1)));
  }

  // Empirical-Bayes modes at the optimum.
  const auto blocks = build_groups(design);
  const GaussHermiteRule rule = gauss_hermite(options.quad_order);
  out.re_modes.resize(static_cast<Eigen::Index>(blocks.size()));
  for (std::size_t g = 0; g < blocks.size(); ++g) {
    double mode = 0.0;
    const Eigen::VectorXd eta = blocks[g].X * params.beta;
    marginal_value(blocks[g], eta, params, rule, static_cast<int>(g), &mode);
    out.re_modes(static_cast<Eigen::Index>(g)) = mode;
  }
  return out;
}

double predict_mu(const FittedGlmm& fit, const Eigen::VectorXd& x,
                  std::optional<int> group) {
  if (x.size() != fit.beta.size())
    throw Error("predict_mu: covariate length mismatch");
  double eta = x.dot(fit.beta);
  if (group) {
    if (*group < 0 || *group >= fit.re_modes.size())
      throw Error("predict_mu: unknown group " + std::to_string(*group));
    eta += fit.re_modes(*group);
  }
  return safe_exp(eta);
}

namespace {

using nlohmann::json;

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

Eigen::VectorXd vector_from_json(const json& arr) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i)
    v(static_cast<Eigen::Index>(i)) = arr.at(i).get<double>();
  return v;
}

}  // namespace

void save_glmm_json(std::ostream& out, const FittedGlmm& fit) {
  json cov = json::array();
  for (Eigen::Index i = 0; i < fit.cov_beta.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < fit.cov_beta.cols(); ++j)
      row.push_back(fit.cov_beta(i, j));
    cov.push_back(std::move(row));
  }
  json trace = json::array();
  for (const auto& t : fit.trace)
    trace.push_back({{"iteration", t.iteration},
                     {"loglik", t.loglik},
                     {"grad_norm", t.grad_norm},
                     {"step_norm", t.step_norm}});
  const json obj{{"beta", vector_to_json(fit.beta)},
                 {"sigma_u2", fit.sigma_u2},
                 {"theta", fit.theta},
                 {"loglik", fit.loglik},
                 {"n_params", fit.n_params},
                 {"cov_beta", cov},
                 {"se_beta", vector_to_json(fit.se_beta)},
                 {"se_sigma_u2", fit.se_sigma_u2},
                 {"se_theta", fit.se_theta},
                 {"re_modes", vector_to_json(fit.re_modes)},
                 {"converged", fit.converged},
                 {"ses_reliable", fit.ses_reliable},
                 {"sigma_boundary", fit.sigma_boundary},
                 {"theta_boundary", fit.theta_boundary},
                 {"iterations", fit.iterations},
                 {"quad_order", fit.quad_order},
                 {"column_names", fit.column_names},
                 {"group_labels", fit.group_labels},
                 {"trace", trace}};
  out << obj.dump() << '\n';
}

FittedGlmm load_glmm_json(std::istream& in) {
  json obj;
  in >> obj;
  FittedGlmm fit;
  fit.beta = vector_from_json(obj.at("beta"));
  fit.sigma_u2 = obj.at("sigma_u2").get<double>();
  fit.theta = obj.at("theta").get<double>();
  fit.loglik = obj.at("loglik").get<double>();
  fit.n_params = obj.at("n_params").get<int>();
  const auto& cov = obj.at("cov_beta");
  fit.cov_beta.resize(static_cast<Eigen::Index>(cov.size()),
                      static_cast<Eigen::Index>(cov.size()));
  for (std::size_t i = 0; i < cov.size(); ++i)
    for (std::size_t j = 0; j < cov.size(); ++j)
      fit.cov_beta(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          cov.at(i).at(j).get<double>();
  fit.se_beta = vector_from_json(obj.at("se_beta"));
  fit.se_sigma_u2 = obj.at("se_sigma_u2").get<double>();
  fit.se_theta = obj.at("se_theta").get<double>();
  fit.re_modes = vector_from_json(obj.at("re_modes"));
  fit.converged = obj.at("converged").get<bool>();
  fit.ses_reliable = obj.at("ses_reliable").get<bool>();
  fit.sigma_boundary = obj.at("sigma_boundary").get<bool>();
  fit.theta_boundary = obj.at("theta_boundary").get<bool>();
  fit.iterations = obj.at("iterations").get<int>();
  fit.quad_order = obj.at("quad_order").get<int>();
  fit.column_names =
      obj.at("column_names").get<std::vector<std::string>>();
  fit.group_labels = obj.at("group_labels").get<std::vector<std::string>>();
  for (const auto& t : obj.at("trace"))
    fit.trace.push_back({t.at("iteration").get<int>(),
                         t.at("loglik").get<double>(),
                         t.at("grad_norm").get<double>(),
                         t.at("step_norm").get<double>()});
  return fit;
}

}  // namespace emm
