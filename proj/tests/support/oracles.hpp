// Test-only oracles, kept independent of the library implementation paths
// they check.
#pragma once

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

// NB2 log pmf via summed logs of the rising factorial (integer y), an
// independent route around lgamma.
inline double nb_log_pmf(long y, double mu, double theta) {
  double rising = 0.0;
  for (long i = 0; i < y; ++i) rising += std::log(theta + static_cast<double>(i));
  double log_yfact = 0.0;
  for (long i = 2; i <= y; ++i) log_yfact += std::log(static_cast<double>(i));
  return rising - log_yfact + theta * std::log(theta / (theta + mu)) +
         static_cast<double>(y) * std::log(mu / (theta + mu));
}

// Nelder-Mead simplex minimizer (direct search; no gradients).
inline Eigen::VectorXd nelder_mead(
    const std::function<double(const Eigen::VectorXd&)>& f,
    Eigen::VectorXd x0, double step = 0.5, int max_iter = 20000,
    double tol = 1e-12) {
  const int n = static_cast<int>(x0.size());
  std::vector<Eigen::VectorXd> simplex(static_cast<std::size_t>(n + 1), x0);
  std::vector<double> value(static_cast<std::size_t>(n + 1));
  for (int i = 0; i < n; ++i) simplex[static_cast<std::size_t>(i + 1)](i) += step;
  for (std::size_t i = 0; i < simplex.size(); ++i) value[i] = f(simplex[i]);

  const auto order = [&]() {
    for (std::size_t i = 1; i < simplex.size(); ++i) {
      for (std::size_t j = i; j > 0 && value[j] < value[j - 1]; --j) {
        std::swap(value[j], value[j - 1]);
        std::swap(simplex[j], simplex[j - 1]);
      }
    }
  };
  order();

  for (int iter = 0; iter < max_iter; ++iter) {
    if (std::abs(value.back() - value.front()) <=
        tol * (1.0 + std::abs(value.front())))
      break;
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (std::size_t i = 0; i + 1 < simplex.size(); ++i) centroid += simplex[i];
    centroid /= static_cast<double>(n);

    const Eigen::VectorXd reflected = centroid + (centroid - simplex.back());
    const double fr = f(reflected);
    if (fr < value.front()) {
      const Eigen::VectorXd expanded =
          centroid + 2.0 * (centroid - simplex.back());
      const double fe = f(expanded);
      if (fe < fr) {
        simplex.back() = expanded;
        value.back() = fe;
      } else {
        simplex.back() = reflected;
        value.back() = fr;
      }
    } else if (fr < value[static_cast<std::size_t>(n - 1)]) {
      simplex.back() = reflected;
      value.back() = fr;
    } else {
      const Eigen::VectorXd contracted =
          centroid + 0.5 * (simplex.back() - centroid);
      const double fc = f(contracted);
      if (fc < value.back()) {
        simplex.back() = contracted;
        value.back() = fc;
      } else {
        for (std::size_t i = 1; i < simplex.size(); ++i) {
          simplex[i] = simplex.front() + 0.5 * (simplex[i] - simplex.front());
          value[i] = f(simplex[i]);
        }
      }
    }
    order();
  }
  return simplex.front();
}

// Total-variation distance between probability rows.
inline double tv_distance(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  return 0.5 * (p - q).cwiseAbs().sum();
}

// Minimum mean matched TV distance over row permutations (k <= 8).
inline double best_matched_tv(const Eigen::MatrixXd& a,
                              const Eigen::MatrixXd& b) {
  const int k = static_cast<int>(a.rows());
  std::vector<int> perm(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) perm[static_cast<std::size_t>(i)] = i;
  double best = 1e300;
  do {
    double total = 0.0;
    for (int i = 0; i < k; ++i)
      total += tv_distance(a.row(i), b.row(perm[static_cast<std::size_t>(i)]));
    best = std::min(best, total / k);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// Central-moment recurrence for E[u^d], u ~ N(m, s^2).
inline double normal_moment(int d, double m, double s2) {
  if (d == 0) return 1.0;
  if (d == 1) return m;
  return m * normal_moment(d - 1, m, s2) +
         (d - 1) * s2 * normal_moment(d - 2, m, s2);
}

}  // namespace oracle
