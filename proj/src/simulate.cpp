#include "emm/simulate.hpp"

#include <cmath>
#include <sstream>

#include "emm/error.hpp"
#include "emm/nb.hpp"
#include "emm/rng.hpp"

namespace emm {

Simulated simulate(const SimulationSpec& spec) {
  if (spec.n_groups < 1 || spec.n_per_group < 1)
    throw Error("simulate: need at least one group and one row per group");
  if (spec.sigma_u < 0.0 || spec.theta <= 0.0)
    throw Error("simulate: sigma_u >= 0 and theta > 0 required");
  if (spec.beta.size() < 1) throw Error("simulate: beta must include intercept");

  const int p_normal = static_cast<int>(spec.beta.size()) - 1 -
                       (spec.add_dummy ? 1 : 0);
  if (p_normal < 0)
    throw Error("simulate: beta shorter than the covariate layout");

  const Eigen::Index n =
      static_cast<Eigen::Index>(spec.n_groups) * spec.n_per_group;
  const Eigen::Index p = spec.beta.size();

  Simulated sim;
  sim.design.X.resize(n, p);
  sim.design.y.resize(n);
  sim.design.group.resize(static_cast<std::size_t>(n));
  sim.design.n_groups = spec.n_groups;
  sim.true_u.resize(spec.n_groups);

  sim.design.columns.push_back(
      {"(intercept)", "(intercept)", ColumnRole::intercept, 0.0, 1.0});
  for (int j = 0; j < p_normal; ++j) {
    const std::string name = "x" + std::to_string(j + 1);
    sim.design.columns.push_back({name, name, ColumnRole::raw, 0.0, 1.0});
  }
  if (spec.add_dummy)
    sim.design.columns.push_back({"d1", "d1", ColumnRole::dummy, 0.0, 1.0});

  // Intercepts come from one dedicated substream; covariates and counts from
  // per-group streams, so output is independent of group scheduling.
  Rng intercept_rng(derive_seed(spec.seed, 0x5EED));
  for (int g = 0; g < spec.n_groups; ++g)
    sim.true_u(g) = spec.sigma_u * intercept_rng.normal();

  for (int g = 0; g < spec.n_groups; ++g) {
    char label[16];
    std::snprintf(label, sizeof(label), "g%03d", g);
    sim.design.group_labels.emplace_back(label);
    Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(g)));
    const double u = sim.true_u(g);
    for (int i = 0; i < spec.n_per_group; ++i) {
      const Eigen::Index row =
          static_cast<Eigen::Index>(g) * spec.n_per_group + i;
      sim.design.group[static_cast<std::size_t>(row)] = g;
      sim.design.X(row, 0) = 1.0;
      for (int j = 0; j < p_normal; ++j)
        sim.design.X(row, 1 + j) = rng.normal();
      if (spec.add_dummy)
        sim.design.X(row, 1 + p_normal) = rng.uniform() < 0.5 ? 0.0 : 1.0;
      const double eta = sim.design.X.row(row).dot(spec.beta) + u;
      const double mu = std::exp(std::min(eta, 30.0));
      sim.design.y(row) =
          static_cast<double>(rng.negative_binomial(mu, spec.theta));
    }
  }
  return sim;
}

Table simulated_to_table(const Simulated& sim) {
  Table t;
  const Eigen::Index n = sim.design.n_rows();
  t.n_rows = static_cast<std::size_t>(n);
  auto& y = t.numeric["y"];
  auto& group = t.categorical["group"];
  y.reserve(t.n_rows);
  group.reserve(t.n_rows);
  for (Eigen::Index i = 0; i < n; ++i) {
    y.push_back(sim.design.y(i));
    group.push_back(sim.design.group_labels[static_cast<std::size_t>(
        sim.design.group[static_cast<std::size_t>(i)])]);
  }
  for (std::size_t c = 1; c < sim.design.columns.size(); ++c) {
    auto& col = t.numeric[sim.design.columns[c].name];
    col.reserve(t.n_rows);
    for (Eigen::Index i = 0; i < n; ++i)
      col.push_back(sim.design.X(i, static_cast<Eigen::Index>(c)));
  }
  return t;
}

ModelSpec simulated_model_spec(const SimulationSpec& spec,
                               const std::string& label) {
  ModelSpec ms;
  ms.label = label;
  ms.response = "y";
  ms.group = "group";
  const int p_normal = static_cast<int>(spec.beta.size()) - 1 -
                       (spec.add_dummy ? 1 : 0);
  for (int j = 0; j < p_normal; ++j) {
    VariableSpec v;
    v.name = "x" + std::to_string(j + 1);
    v.transform = Transform::raw;
    ms.variables.push_back(std::move(v));
  }
  if (spec.add_dummy) {
    VariableSpec v;
    v.name = "d1";
    v.transform = Transform::binary;
    ms.variables.push_back(std::move(v));
  }
  return ms;
}

double brute_marginal_loglik(const Eigen::VectorXd& y_g,
                             const Eigen::MatrixXd& X_g,
                             const Eigen::VectorXd& beta, double sigma_u2,
                             double theta, int n_nodes, double half_width) {
  if (y_g.size() != X_g.rows())
    throw Error("brute_marginal_loglik: y/X size mismatch");
  const Eigen::VectorXd eta = X_g * beta;
  if (sigma_u2 == 0.0) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < y_g.size(); ++i)
      s += nb_log_pmf(y_g(i), std::exp(eta(i)), theta);
    return s;
  }
  if (n_nodes < 1000) throw Error("brute_marginal_loglik: n_nodes >= 1000");
  if (half_width < 8.0) throw Error("brute_marginal_loglik: half_width >= 8");

  const double sigma = std::sqrt(sigma_u2);
  const double lo = -half_width * sigma;
  const double step = 2.0 * half_width * sigma / (n_nodes - 1);
  const double log_step = std::log(step);
  const double log_norm = -0.5 * std::log(2.0 * M_PI * sigma_u2);

  double max_term = -std::numeric_limits<double>::infinity();
  std::vector<double> terms(static_cast<std::size_t>(n_nodes));
  for (int k = 0; k < n_nodes; ++k) {
    const double u = lo + k * step;
    double f = log_norm - u * u / (2.0 * sigma_u2);
    for (Eigen::Index i = 0; i < y_g.size(); ++i)
      f += nb_log_pmf(y_g(i), std::exp(std::min(eta(i) + u, 690.0)), theta);
    // trapezoid endpoints carry half weight
    if (k == 0 || k == n_nodes - 1) f -= std::log(2.0);
    terms[static_cast<std::size_t>(k)] = f;
    max_term = std::max(max_term, f);
  }
  double sum = 0.0;
  for (double t : terms) sum += std::exp(t - max_term);
  return log_step + max_term + std::log(sum);
}

RecoveryReport recovery_report(const SimulationSpec& spec,
                               const FittedGlmm& fit) {
  if (!fit.converged) throw Error("recovery_report: fit did not converge");
  if (fit.beta.size() != spec.beta.size())
    throw Error("recovery_report: coefficient count mismatch");

  RecoveryReport report;
  const auto add = [&](const std::string& name, double truth, double est,
                       double se) {
    RecoveryRow row;
    row.name = name;
    row.truth = truth;
    row.estimate = est;
    row.se = se;
    row.z = se > 0.0 ? (est - truth) / se : 0.0;
    row.pass = std::abs(row.z) <= 3.0;
    report.rows.push_back(std::move(row));
  };
  for (Eigen::Index j = 0; j < spec.beta.size(); ++j) {
    const std::string name =
        j < static_cast<Eigen::Index>(fit.column_names.size())
            ? fit.column_names[static_cast<std::size_t>(j)]
            : "beta" + std::to_string(j);
    add(name, spec.beta(j), fit.beta(j), fit.se_beta(j));
  }
  add("sigma_u2", spec.sigma_u * spec.sigma_u, fit.sigma_u2, fit.se_sigma_u2);
  add("theta", spec.theta, fit.theta, fit.se_theta);
  report.all_pass = true;
  for (const auto& r : report.rows) report.all_pass = report.all_pass && r.pass;
  return report;
}

std::string render_recovery_text(const RecoveryReport& report) {
  std::ostringstream out;
  out << "parameter        truth      estimate   se         z        pass\n";
  char buf[160];
  for (const auto& r : report.rows) {
    std::snprintf(buf, sizeof(buf), "%-16s %-10.4f %-10.4f %-10.4f %-8.2f %s\n",
                  r.name.c_str(), r.truth, r.estimate, r.se, r.z,
                  r.pass ? "yes" : "NO");
    out << buf;
  }
  out << (report.all_pass ? "recovery: PASS\n" : "recovery: FAIL\n");
  return out.str();
}

}  // namespace emm
